"""FMCW radar constants, MIMO array geometry, target scenes, and IF-cube synthesis.

The simulated radar transmits linear chirps from ``n_tx`` transmitters and
mixes the returns at ``n_rx`` receivers, producing one demultiplexed
intermediate-frequency (IF) channel per (tx, rx) pair.  Channels are
synthesized directly in their separated form; orthogonal-waveform
multiplexing is assumed ideal and is not modeled at waveform level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LIGHT_SPEED_M_PER_S = 2.99792458e8


@dataclass(frozen=True)
class RadarParams:
    """Chirp and sampling constants for one radar configuration.

    Parameters
    ----------
    carrier_freq_hz : float
        Chirp start/carrier frequency.
    bandwidth_hz : float
        Swept bandwidth of one chirp.
    chirp_duration_s : float
        Duration of one chirp (one pulse).
    sample_rate_hz : float
        IF sampling rate; one pulse yields ``round(sample_rate_hz *
        chirp_duration_s)`` fast-time samples.
    pulses_per_cpi : int
        Number of chirps in one coherent processing interval.
    """

    carrier_freq_hz: float
    bandwidth_hz: float
    chirp_duration_s: float
    sample_rate_hz: float
    pulses_per_cpi: int
    light_speed_m_per_s: float = LIGHT_SPEED_M_PER_S

    def __post_init__(self):
        for name in ("carrier_freq_hz", "bandwidth_hz", "chirp_duration_s",
                     "sample_rate_hz", "light_speed_m_per_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.pulses_per_cpi < 1:
            raise ValueError("pulses_per_cpi must be >= 1")
        if self.samples_per_pulse < 2:
            raise ValueError("sample_rate_hz * chirp_duration_s must give at least 2 samples")

    @property
    def chirp_rate_hz_per_s(self) -> float:
        """Chirp slope, bandwidth over duration."""
        return self.bandwidth_hz / self.chirp_duration_s

    @property
    def samples_per_pulse(self) -> int:
        """Fast-time samples per pulse. Non-integer products are rounded;
        the effective observation window is then samples / sample_rate."""
        return int(round(self.sample_rate_hz * self.chirp_duration_s))

    @property
    def wavelength_m(self) -> float:
        return self.light_speed_m_per_s / self.carrier_freq_hz

    @property
    def range_bin_m(self) -> float:
        """Width of one DFT range bin, c / (2 B)."""
        return self.light_speed_m_per_s / (2.0 * self.bandwidth_hz)


@dataclass(frozen=True)
class ArrayGeometry:
    """Transmit/receive element positions in normalized aperture units.

    Physical element positions along the array axis are ``Z * alpha / 2``
    (transmitters) and ``Z * beta / 2`` (receivers) where ``Z`` is the total
    aperture.  Channels are flattened tx-major: flat index = n * n_rx + m for
    transmitter n and receiver m.
    """

    tx_positions_norm: tuple[float, ...]
    rx_positions_norm: tuple[float, ...]
    aperture_tx_m: float
    aperture_rx_m: float

    def __post_init__(self):
        if self.aperture_tx_m <= 0 or self.aperture_rx_m <= 0:
            raise ValueError("apertures must be positive")
        if not self.tx_positions_norm or not self.rx_positions_norm:
            raise ValueError("at least one element per side")
        z = self.aperture_total_m
        tol = 1e-12
        lim_tx = self.aperture_tx_m / z + tol
        lim_rx = self.aperture_rx_m / z + tol
        if any(abs(a) > lim_tx for a in self.tx_positions_norm):
            raise ValueError("tx position outside [-Z_T/Z, Z_T/Z]")
        if any(abs(b) > lim_rx for b in self.rx_positions_norm):
            raise ValueError("rx position outside [-Z_R/Z, Z_R/Z]")

    @property
    def aperture_total_m(self) -> float:
        return self.aperture_tx_m + self.aperture_rx_m

    @property
    def n_tx(self) -> int:
        return len(self.tx_positions_norm)

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions_norm)

    @property
    def n_channels(self) -> int:
        return self.n_tx * self.n_rx

    def channel_sums(self) -> np.ndarray:
        """alpha_n + beta_m for every channel, flattened tx-major."""
        alpha = np.asarray(self.tx_positions_norm)
        beta = np.asarray(self.rx_positions_norm)
        return np.add.outer(alpha, beta).ravel()

    def flat_index(self, m: int, n: int) -> int:
        """Flat channel index for receiver m, transmitter n."""
        if not (0 <= m < self.n_rx and 0 <= n < self.n_tx):
            raise IndexError("channel index out of range")
        return n * self.n_rx + m


@dataclass(frozen=True)
class Target:
    """Point target: range (m), angle of arrival (rad), complex gain."""

    range_m: float
    aoa_rad: float
    gain: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError("range_m must be positive")
        if not abs(self.aoa_rad) < math.pi / 2:
            raise ValueError("aoa_rad must satisfy |aoa| < pi/2")


@dataclass(frozen=True)
class TargetScene:
    """A list of stationary far-field point targets."""

    targets: tuple[Target, ...] = field(default_factory=tuple)

    @property
    def k(self) -> int:
        return len(self.targets)

    @classmethod
    def from_list(cls, targets) -> "TargetScene":
        return cls(targets=tuple(targets))


@dataclass(eq=False)
class IfDataCube:
    """Sampled IF measurements, shape (n_channels, pulses, samples)."""

    samples: np.ndarray
    params: RadarParams
    geometry: ArrayGeometry

    def __post_init__(self):
        expected = (self.geometry.n_channels, self.params.pulses_per_cpi,
                    self.params.samples_per_pulse)
        if self.samples.shape != expected:
            raise ValueError(f"cube shape {self.samples.shape} != expected {expected}")
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ValueError("cube contains non-finite samples")


def total_delay(target: Target, geometry: ArrayGeometry, m: int, n: int,
                params: RadarParams) -> float:
    """Round-trip delay for one target on channel (rx m, tx n).

    The delay splits into the range part 2R/c and the angular part
    Z (alpha_n + beta_m) sin(theta) / (2c).
    """
    c = params.light_speed_m_per_s
    tau_range = 2.0 * target.range_m / c
    z = geometry.aperture_total_m
    sum_norm = geometry.tx_positions_norm[n] + geometry.rx_positions_norm[m]
    tau_angle = z * sum_norm * math.sin(target.aoa_rad) / (2.0 * c)
    return tau_range + tau_angle


def noise_sigma_from_snr(snr_db: float) -> float:
    """Noise standard deviation for a given SNR in dB (unit target gain).

    SNR is defined against unit signal power: sigma^2 = 10**(-snr/10).
    """
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return 10.0 ** (-snr_db / 20.0)


def _channel_delays(params: RadarParams, geometry: ArrayGeometry,
                    scene: TargetScene) -> np.ndarray:
    """Delays tau[channel, target], channels flattened tx-major."""
    c = params.light_speed_m_per_s
    ranges = np.array([t.range_m for t in scene.targets])
    sines = np.array([math.sin(t.aoa_rad) for t in scene.targets])
    sums = geometry.channel_sums()
    z = geometry.aperture_total_m
    return (2.0 * ranges / c)[None, :] + z * np.outer(sums, sines) / (2.0 * c)


def synthesize_cube(params: RadarParams, geometry: ArrayGeometry,
                    scene: TargetScene, sigma: float, seed) -> IfDataCube:
    """Generate the sampled IF cube for a scene plus complex Gaussian noise.

    The phase is evaluated as a cycle count f_c*tau - (gamma/2)*tau^2 +
    gamma*tau*t/f_s and reduced modulo 1 before conversion to radians; with
    f_c*tau around 1e3 cycles, double precision keeps >= 12 significant
    digits of the fractional phase.  Noise is circular complex Gaussian with
    per-sample variance sigma^2 (real/imag parts N(0, sigma^2/2) each).
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    n_ch = geometry.n_channels
    n_p = params.pulses_per_cpi
    n_s = params.samples_per_pulse
    gamma = params.chirp_rate_hz_per_s
    fs = params.sample_rate_hz

    if scene.k:
        tau = _channel_delays(params, geometry, scene)
        beat = gamma * (2.0 * np.array([t.range_m for t in scene.targets])
                        / params.light_speed_m_per_s)
        bad = np.flatnonzero(beat >= fs / 2.0)
        if bad.size:
            k = int(bad[0])
            raise ValueError(
                f"target {k} at {scene.targets[k].range_m} m has beat frequency "
                f"{beat[k]:.6g} Hz >= f_s/2 = {fs / 2.0:.6g} Hz (aliased); "
                "reduce range or raise the sample rate")
        gains = np.conj(np.array([t.gain for t in scene.targets], dtype=complex))
        t_idx = np.arange(n_s)
        const_cycles = params.carrier_freq_hz * tau - 0.5 * gamma * tau ** 2
        slope_cycles = gamma * tau / fs
        cycles = const_cycles[:, :, None] + slope_cycles[:, :, None] * t_idx
        phase = np.mod(cycles, 1.0)
        tones = np.exp(2j * np.pi * phase)
        per_channel = np.tensordot(gains, tones, axes=([0], [1]))
        samples = np.broadcast_to(per_channel[:, None, :], (n_ch, n_p, n_s)).copy()
    else:
        samples = np.zeros((n_ch, n_p, n_s), dtype=complex)

    if sigma > 0:
        rng = np.random.default_rng(seed)
        scale = sigma / math.sqrt(2.0)
        samples = samples + scale * (rng.standard_normal((n_ch, n_p, n_s))
                                     + 1j * rng.standard_normal((n_ch, n_p, n_s)))
    return IfDataCube(samples=samples, params=params, geometry=geometry)


def random_sparse_geometry(n_tx: int, n_rx: int, aperture_tx_m: float,
                           aperture_rx_m: float, seed=None,
                           placement: str = "random") -> ArrayGeometry:
    """Draw a sparse MIMO array over the given apertures.

    ``placement="random"`` draws positions i.i.d. uniform over the allowed
    normalized interval; ``placement="spaced"`` places them equispaced over
    the interval inclusive of the endpoints (a single element goes to the
    aperture center).
    """
    if n_tx < 1 or n_rx < 1:
        raise ValueError("element counts must be >= 1")
    if aperture_tx_m <= 0 or aperture_rx_m <= 0:
        raise ValueError("apertures must be positive")
    if placement not in ("random", "spaced"):
        raise ValueError(f"unknown placement {placement!r}")
    z = aperture_tx_m + aperture_rx_m
    lim_tx = aperture_tx_m / z
    lim_rx = aperture_rx_m / z
    if placement == "random":
        rng = np.random.default_rng(seed)
        alpha = rng.uniform(-lim_tx, lim_tx, n_tx)
        beta = rng.uniform(-lim_rx, lim_rx, n_rx)
    else:
        alpha = np.linspace(-lim_tx, lim_tx, n_tx) if n_tx > 1 else np.array([0.0])
        beta = np.linspace(-lim_rx, lim_rx, n_rx) if n_rx > 1 else np.array([0.0])
    return ArrayGeometry(tx_positions_norm=tuple(float(a) for a in alpha),
                         rx_positions_norm=tuple(float(b) for b in beta),
                         aperture_tx_m=aperture_tx_m,
                         aperture_rx_m=aperture_rx_m)
