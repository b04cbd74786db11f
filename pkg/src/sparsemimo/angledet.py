"""Sparse angle recovery at confirmed range bins.

A steering dictionary over a sin(theta) grid turns per-bin angle estimation
into sparse support recovery; OMP handles single (pulse-summed) measurement
vectors and SOMP shares one support across all pulses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radar import ArrayGeometry, RadarParams
from .rangedet import SpectrumPlane, bin_to_range


@dataclass(eq=False)
class AngleGrid:
    """Candidate angles, uniformly spaced in the sin(theta) domain."""

    sin_values: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.sin_values, dtype=float)
        if phi.ndim != 1 or phi.size < 1:
            raise ValueError("grid must be a 1-D array with at least one point")
        if np.any(np.abs(phi) > 1.0):
            raise ValueError("sin values must lie in [-1, 1]")
        if phi.size > 1:
            steps = np.diff(phi)
            if np.any(steps <= 0):
                raise ValueError("grid must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12:
                raise ValueError("grid must be uniform in the sin domain")
        self.sin_values = phi

    @classmethod
    def uniform(cls, sin_lo: float, sin_hi: float, n_points: int) -> "AngleGrid":
        return cls(sin_values=np.linspace(sin_lo, sin_hi, n_points))

    @property
    def size(self) -> int:
        return self.sin_values.size

    def aoa_deg(self, index: int) -> float:
        return math.degrees(math.asin(float(self.sin_values[index])))


@dataclass(eq=False)
class SteeringDictionary:
    """Virtual-array steering vectors evaluated on an angle grid (columns)."""

    columns: np.ndarray
    grid: AngleGrid
    geometry: ArrayGeometry

    def to_csv(self, path: str) -> None:
        """Dump columns for inspection: one row per grid point with the
        sin value followed by interleaved re/im entries per channel."""
        import csv

        n_ch = self.columns.shape[0]
        header = ["sin_theta"]
        for ch in range(n_ch):
            header += [f"re_{ch}", f"im_{ch}"]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for g in range(self.grid.size):
                row = [format(float(self.grid.sin_values[g]), ".12g")]
                for ch in range(n_ch):
                    row += [format(self.columns[ch, g].real, ".12g"),
                            format(self.columns[ch, g].imag, ".12g")]
                writer.writerow(row)


@dataclass(eq=False)
class BinMeasurement:
    """DFT coefficients at one confirmed bin, shape (channels, pulses)."""

    samples: np.ndarray
    bin_index: int
    range_m: float


@dataclass(frozen=True)
class AngleEstimate:
    grid_index: int
    aoa_deg: float
    score: float
    amplitude: complex | None = None


@dataclass(eq=False)
class AngleEstimateSet:
    entries: list[AngleEstimate]
    solver: str

    @property
    def aoas_deg(self) -> list[float]:
        return [e.aoa_deg for e in self.entries]


@dataclass(eq=False)
class SparseRecovery:
    """Result of a greedy pursuit: selected atoms and refit coefficients."""

    support: list[int]
    coefficients: np.ndarray
    residual_norm: float
    rank_deficient: bool
    solver: str


def steering_vector(theta: float, geometry: ArrayGeometry,
                    params: RadarParams) -> np.ndarray:
    """Per-channel phases for a plane wave from angle ``theta``.

    Entry for channel (m, n) is exp(j pi (Z / lambda) (alpha_n + beta_m)
    sin(theta)), ordered tx-major to match the cube flattening.
    """
    if not abs(theta) < math.pi / 2:
        raise ValueError("theta must satisfy |theta| < pi/2")
    z_over_lambda = geometry.aperture_total_m / params.wavelength_m
    phase = np.pi * z_over_lambda * geometry.channel_sums() * math.sin(theta)
    return np.exp(1j * phase)


def build_dictionary(grid: AngleGrid, geometry: ArrayGeometry,
                     params: RadarParams) -> SteeringDictionary:
    """Steering matrix with one column per grid point, shape (channels, G)."""
    z_over_lambda = geometry.aperture_total_m / params.wavelength_m
    phase = np.pi * z_over_lambda * np.outer(geometry.channel_sums(), grid.sin_values)
    return SteeringDictionary(columns=np.exp(1j * phase), grid=grid, geometry=geometry)


def extract_bin_measurements(plane: SpectrumPlane, l_prime: int) -> BinMeasurement:
    """Stack the l'-th DFT coefficient of every (channel, pulse) look."""
    n_bins = plane.coefficients.shape[2]
    if not 0 <= l_prime < n_bins:
        raise ValueError(f"bin {l_prime} outside [0, {n_bins})")
    return BinMeasurement(samples=plane.coefficients[:, :, l_prime].copy(),
                          bin_index=l_prime,
                          range_m=bin_to_range(l_prime, plane.source.params))


def _refit(cols, support, y):
    sub = cols[:, support]
    coeffs, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
    residual = y - sub @ coeffs
    return coeffs, residual, float(np.linalg.norm(residual)), rank


_REFINE_RADIUS = 3


def _local_refine(cols, y, support, coeffs, residual, res_norm, rank_min,
                  anchors):
    """Move selected atoms to neighboring grid cells while that strictly
    lowers the least-squares residual.

    Greedy selection on a grid that oversamples the array resolution lands
    atoms a cell or two off the least-squares optimum; coordinate-wise swap
    refinement converges to a locally optimal support.  Atoms stay within
    a few cells of where selection placed them so the refinement corrects
    quantization, not support identity.
    """
    n_atoms = cols.shape[1]
    tiny = 1e-12 * (res_norm + 1.0)
    improved = True
    while improved:
        improved = False
        for i in range(len(support)):
            for cand in (support[i] - 1, support[i] + 1):
                if not 0 <= cand < n_atoms or cand in support:
                    continue
                if abs(cand - anchors[i]) > _REFINE_RADIUS:
                    continue
                trial = list(support)
                trial[i] = cand
                t_coeffs, t_residual, t_norm, t_rank = _refit(cols, trial, y)
                if t_norm < res_norm - tiny:
                    support, coeffs, residual, res_norm = \
                        trial, t_coeffs, t_residual, t_norm
                    rank_min = min(rank_min, t_rank)
                    improved = True
    return support, coeffs, residual, res_norm, rank_min


def _backward_prune(cols, y, support, coeffs, residual, res_norm, stop_norm):
    """Drop atoms while the residual target still holds.

    The sparse objective asks for the smallest support whose least-squares
    fit meets the residual bound; greedy selection can overshoot it when
    coherent atoms jointly explain the measurement.
    """
    while len(support) > 1:
        best = None
        for i in range(len(support)):
            trial = support[:i] + support[i + 1:]
            t_coeffs, t_residual, t_norm, _ = _refit(cols, trial, y)
            if t_norm <= stop_norm and (best is None or t_norm < best[3]):
                best = (trial, t_coeffs, t_residual, t_norm)
        if best is None:
            break
        support, coeffs, residual, res_norm = best
    return support, coeffs, residual, res_norm


def _pursuit(measurement: np.ndarray, dictionary: SteeringDictionary,
             k_max: int, residual_tol: float, solver: str,
             noise_level: float, local_refine: bool) -> SparseRecovery:
    cols = dictionary.columns
    n_atoms = cols.shape[1]
    y = measurement
    norm_y = float(np.linalg.norm(y))
    if norm_y == 0.0 or y.shape[0] == 0:
        empty = np.zeros((0,) + y.shape[1:], dtype=complex)
        return SparseRecovery(support=[], coefficients=empty, residual_norm=0.0,
                              rank_deficient=False, solver=solver)

    stop_norm = max(residual_tol * norm_y, noise_level)
    support: list[int] = []
    residual = y
    coeffs = np.zeros((0,) + y.shape[1:], dtype=complex)
    rank_deficient = False
    if norm_y <= stop_norm:
        return SparseRecovery(support=[], coefficients=coeffs,
                              residual_norm=norm_y, rank_deficient=False,
                              solver=solver)
    for _ in range(min(k_max, n_atoms)):
        corr = cols.conj().T @ residual
        if corr.ndim == 1:
            scores = np.abs(corr)
        else:
            scores = np.sum(np.abs(corr) ** 2, axis=1)
        scores[support] = -np.inf
        g = int(np.argmax(scores))
        support = support + [g]
        coeffs, residual, res_norm, rank = _refit(cols, support, y)
        if local_refine:
            support, coeffs, residual, res_norm, rank = _local_refine(
                cols, y, support, coeffs, residual, res_norm, rank)
        if rank < len(support):
            rank_deficient = True
        if res_norm <= stop_norm:
            break
    if local_refine and len(support) > 1 and res_norm <= stop_norm:
        support, coeffs, residual, res_norm = _backward_prune(
            cols, y, support, coeffs, residual, res_norm, stop_norm)
    return SparseRecovery(support=support, coefficients=coeffs,
                          residual_norm=float(np.linalg.norm(residual)),
                          rank_deficient=rank_deficient, solver=solver)


def omp(y: np.ndarray, dictionary: SteeringDictionary, k_max: int = 10,
        residual_tol: float = 1e-6, noise_level: float = 0.0,
        local_refine: bool = True) -> SparseRecovery:
    """Orthogonal matching pursuit on a single measurement vector.

    Atom selection maximizes |<c_g, r>| (dictionary columns share equal
    norms, so no per-column normalization is needed; ties break to the
    lowest grid index).  After each selection all coefficients are refit by
    least squares and, with ``local_refine``, each selected atom may slide
    to a neighboring grid cell while that lowers the residual.  Iteration
    stops at ``k_max`` atoms or when the residual drops below
    max(``residual_tol`` * ||y||, ``noise_level``); the absolute
    ``noise_level`` stop keeps the pursuit from interpolating pure noise.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    y = np.asarray(y, dtype=complex).reshape(-1)
    return _pursuit(y, dictionary, k_max, residual_tol, "omp", noise_level,
                    local_refine)


def somp(Y: np.ndarray, dictionary: SteeringDictionary, k_max: int = 10,
         residual_tol: float = 1e-6, noise_level: float = 0.0,
         local_refine: bool = True) -> SparseRecovery:
    """Simultaneous OMP on matrix measurements (channels x pulses).

    Atom selection maximizes the l2 aggregate of residual correlations
    across pulses; the refit is a joint least squares over all pulse
    columns.  With one pulse this reduces exactly to ``omp``.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim != 2:
        raise ValueError("Y must be a 2-D (channels x pulses) array")
    return _pursuit(Y, dictionary, k_max, residual_tol, "somp", noise_level,
                    local_refine)


def recovery_scores(recovery: SparseRecovery) -> np.ndarray:
    """Per-atom detection scores: |coefficient| for OMP, pulse-normalized
    row energy ||row|| / sqrt(P) for SOMP."""
    coeffs = recovery.coefficients
    if coeffs.ndim == 1:
        return np.abs(coeffs)
    if coeffs.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.norm(coeffs, axis=1) / math.sqrt(coeffs.shape[1])


def threshold_support(recovery: SparseRecovery, grid: AngleGrid,
                      rel_threshold: float = 0.25,
                      score_ref: float | None = None) -> AngleEstimateSet:
    """Keep recovered atoms scoring at least ``rel_threshold`` of the max.

    ``score_ref`` substitutes an external reference maximum (e.g. the
    strongest atom across all range bins of a trial) for the per-recovery
    maximum.
    """
    if not 0.0 < rel_threshold <= 1.0:
        raise ValueError("rel_threshold must be in (0, 1]")
    scores = recovery_scores(recovery)
    if scores.size == 0:
        return AngleEstimateSet(entries=[], solver=recovery.solver)
    ref = float(np.max(scores)) if score_ref is None else float(score_ref)
    entries = []
    for i, g in enumerate(recovery.support):
        if scores[i] >= rel_threshold * ref:
            amp = complex(recovery.coefficients[i]) \
                if recovery.coefficients.ndim == 1 else None
            entries.append(AngleEstimate(grid_index=g, aoa_deg=grid.aoa_deg(g),
                                         score=float(scores[i]), amplitude=amp))
    entries.sort(key=lambda e: e.grid_index)
    return AngleEstimateSet(entries=entries, solver=recovery.solver)
