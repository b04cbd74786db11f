"""Per-pulse range detection: DFT spectra, peak picking, binary integration.

Each (channel, pulse) look is transformed and thresholded independently;
two-stage M-of-N binary integration across pulses and then across channels
confirms range bins while keeping the false-alarm probability low.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .radar import IfDataCube, RadarParams


@dataclass(eq=False)
class SpectrumPlane:
    """Unscaled forward DFTs of the IF cube, shape (channels, pulses, bins)."""

    coefficients: np.ndarray
    source: IfDataCube


@dataclass(frozen=True)
class ConfirmedRangeBin:
    bin_index: int
    range_m: float
    support_count: int


@dataclass(eq=False)
class RangeDetectionSet:
    """Confirmed range bins plus the vote tallies that produced them.

    ``pulse_votes[c]`` maps a candidate bin to the number of pulses in which
    channel ``c`` detected it (within the bin tolerance); ``channel_support``
    maps a candidate bin to the number of channels on which it survived the
    pulse stage.
    """

    confirmed: list[ConfirmedRangeBin]
    pulse_votes: list[dict[int, int]] = field(default_factory=list)
    channel_support: dict[int, int] = field(default_factory=dict)

    @property
    def bins(self) -> list[int]:
        return [c.bin_index for c in self.confirmed]


def dft_all(cube: IfDataCube) -> SpectrumPlane:
    """N-point unscaled forward DFT of every (channel, pulse) row."""
    return SpectrumPlane(coefficients=np.fft.fft(cube.samples, axis=2), source=cube)


def focus_kernel_magnitude(x: float, x_bar: float, m_terms: int, omega: float) -> float:
    """Magnitude of the coherent sum of ``m_terms`` phasors exp(j (x - x_bar) q w).

    Closed form |sin(M u / 2) / sin(u / 2)| with u = (x - x_bar) * omega; the
    removable singularity at u = 2 pi k evaluates to M.  Energy within
    |x - x_bar| <= pi / (M w) integrates coherently (the focus zone); outside
    it the sum is attenuated.
    """
    if m_terms < 1:
        raise ValueError("m_terms must be >= 1")
    if omega == 0:
        raise ValueError("omega must be nonzero")
    u = (x - x_bar) * omega
    denom = math.sin(u / 2.0)
    if abs(denom) < 1e-9:
        return float(m_terms)
    return abs(math.sin(m_terms * u / 2.0) / denom)


def detect_peaks(spectrum_row: np.ndarray, threshold_mult: float) -> np.ndarray:
    """Bins that are strict circular local maxima above the noise floor.

    The floor is median(|row|) / log(2), a robust scale estimate that is
    insensitive to a small number of target peaks; the detection threshold is
    ``threshold_mult`` times the floor.
    """
    if threshold_mult < 0:
        raise ValueError("threshold_mult must be >= 0")
    mags = np.asarray(spectrum_row, dtype=float)
    floor = float(np.median(mags)) / math.log(2.0)
    threshold = threshold_mult * floor
    peaks = ((mags > np.roll(mags, 1))
             & (mags > np.roll(mags, -1))
             & (mags > threshold))
    return np.flatnonzero(peaks)


def bin_to_range(l_prime: int, params: RadarParams) -> float:
    """Range corresponding to a DFT peak bin: c * l' / (2 gamma T)."""
    n = params.samples_per_pulse
    if not 0 <= l_prime < n:
        raise ValueError(f"bin {l_prime} outside [0, {n})")
    gamma_t = params.chirp_rate_hz_per_s * params.chirp_duration_s
    return params.light_speed_m_per_s * l_prime / (2.0 * gamma_t)


def _dilate(mask: np.ndarray, tol: int) -> np.ndarray:
    """OR each truth value into its +-tol neighborhood along the last axis."""
    if tol == 0:
        return mask
    out = mask.copy()
    for s in range(1, tol + 1):
        out[..., :-s] |= mask[..., s:]
        out[..., s:] |= mask[..., :-s]
    return out


def binary_integrate(per_pulse_detections, m_of_pulses: int, m_of_channels: int,
                     bin_tolerance: int, params: RadarParams) -> RangeDetectionSet:
    """Two-stage M-of-N confirmation of per-look peak detections.

    Stage 1: per channel, a candidate bin (any bin detected at least once in
    that channel) survives if some detection falls within ``bin_tolerance``
    of it in at least ``m_of_pulses`` pulses.  Stage 2: a bin is confirmed if
    it has a stage-1 survivor within the tolerance on at least
    ``m_of_channels`` channels.

    Confirmed bins are reported individually (deduplicated by bin value, no
    cross-bin merging): distinct close-range targets land on adjacent bins
    and may never be simultaneous local maxima in any single look, so the
    union across looks is what resolves them.
    """
    n_channels = len(per_pulse_detections)
    if n_channels == 0:
        raise ValueError("need at least one channel")
    n_pulses = len(per_pulse_detections[0])
    if not 1 <= m_of_pulses <= n_pulses:
        raise ValueError("m_of_pulses outside [1, pulses]")
    if not 1 <= m_of_channels <= n_channels:
        raise ValueError("m_of_channels outside [1, channels]")
    if bin_tolerance < 0:
        raise ValueError("bin_tolerance must be >= 0")
    n_bins = params.samples_per_pulse

    survivor_masks = np.zeros((n_channels, n_bins), dtype=bool)
    pulse_votes: list[dict[int, int]] = []
    for c, det_c in enumerate(per_pulse_detections):
        present = np.zeros((n_pulses, n_bins), dtype=bool)
        for p, det in enumerate(det_c):
            det = np.asarray(det, dtype=int)
            present[p, det] = True
        votes = _dilate(present, bin_tolerance).sum(axis=0)
        candidates = present.any(axis=0)
        survivors = candidates & (votes >= m_of_pulses)
        survivor_masks[c] = survivors
        pulse_votes.append({int(b): int(votes[b]) for b in np.flatnonzero(candidates)})

    support = _dilate(survivor_masks, bin_tolerance).sum(axis=0)
    candidate_bins = np.flatnonzero(survivor_masks.any(axis=0))
    channel_support = {int(b): int(support[b]) for b in candidate_bins}
    confirmed_list = [ConfirmedRangeBin(bin_index=int(b),
                                        range_m=bin_to_range(int(b), params),
                                        support_count=int(support[b]))
                      for b in candidate_bins if support[b] >= m_of_channels]
    return RangeDetectionSet(confirmed=confirmed_list, pulse_votes=pulse_votes,
                             channel_support=channel_support)
