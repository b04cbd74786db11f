"""Monte Carlo evaluation harness.

Generates scenes, runs the proposed and classical pipelines end to end,
scores hits/false alarms/misses against truth, calibrates detection
thresholds for a target false-alarm rate on noise-only scenes, and sweeps
SNR over seeded independent trials.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import classical as cb
from .angledet import (AngleGrid, build_dictionary, extract_bin_measurements,
                       omp, recovery_scores, somp)
from .radar import (ArrayGeometry, RadarParams, Target, TargetScene,
                    noise_sigma_from_snr, random_sparse_geometry, synthesize_cube)
from .rangedet import binary_integrate, detect_peaks, dft_all

METHODS = ("proposed-omp", "proposed-somp", "classical")
ARRAYS = ("sparse", "full")


@dataclass(frozen=True)
class DetectionSettings:
    """Thresholds and solver knobs shared by the pipelines.

    ``m_of_pulses`` / ``m_of_channels`` default to ceil(P/2) and
    ceil(channels/2) when left as None.
    """

    range_threshold_mult: float = 6.0
    m_of_pulses: int | None = None
    m_of_channels: int | None = None
    bin_tolerance: int = 1
    k_max: int = 10
    residual_tol: float = 1e-6
    noise_stop_factor: float = 1.0
    rel_threshold: float = 0.25
    grid_points: int = 150
    grid_sin_bounds: tuple[float, float] = (-0.7071, 0.7071)
    classical_fft_size: int = 256
    classical_angle_mult: float = 3.0


@dataclass(frozen=True)
class GeometrySpec:
    """How to realize the array for a trial run."""

    kind: str = "sparse"  # sparse | full
    n_tx: int = 3
    n_rx: int = 3
    aperture_tx_wavelengths: float = 6.0
    aperture_rx_wavelengths: float = 6.0
    placement: str = "random"
    seed: int = 20230511

    def build(self, params: RadarParams):
        if self.kind == "full":
            return cb.full_array_geometry(params)
        lam = params.wavelength_m
        return random_sparse_geometry(self.n_tx, self.n_rx,
                                      self.aperture_tx_wavelengths * lam,
                                      self.aperture_rx_wavelengths * lam,
                                      seed=self.seed, placement=self.placement)


@dataclass(frozen=True)
class SceneSpec:
    """Fixed target list or random-scene bounds.

    ``gain_phase_per_pulse`` redraws each target's gain phase on every
    pulse (fluctuating-phase returns); the default keeps gains constant
    over the CPI (non-fluctuating targets).
    """

    kind: str = "random"  # random | fixed
    k: int = 5
    range_bounds_m: tuple[float, float] = (10.0, 40.0)
    aoa_bounds_deg: tuple[float, float] = (-15.0, 15.0)
    targets: tuple[Target, ...] = ()
    random_gain_phase: bool = True
    gain_phase_per_pulse: bool = False


@dataclass(frozen=True)
class TrialConfig:
    params: RadarParams
    geometry: GeometrySpec
    scene: SceneSpec
    snr_db: float
    method: str
    detection: DetectionSettings = field(default_factory=DetectionSettings)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.geometry.kind not in ARRAYS:
            raise ValueError(f"array kind must be one of {ARRAYS}")


@dataclass(frozen=True)
class Estimate:
    range_m: float
    aoa_deg: float
    score: float
    bin_index: int
    grid_index: int | None = None


@dataclass(eq=False)
class TrialOutcome:
    estimates: list[Estimate]
    truth: TargetScene
    hits: list[tuple[int, int]]        # (estimate index, truth index)
    false_alarms: list[int]            # unmatched estimate indices
    misses: list[int]                  # unmatched truth indices

    @property
    def n_hits(self) -> int:
        return len(self.hits)


@dataclass(frozen=True)
class MetricsRow:
    snr_db: float
    method: str
    array: str
    hit_rate: float
    fa_rate: float
    range_rmse_m: float
    angle_rmse_deg: float
    n_trials: int


@dataclass(frozen=True)
class CalibrationResult:
    range_threshold_mult: float
    rel_threshold: float
    classical_angle_mult: float
    achieved_fa_per_trial: float
    converged: bool


def _rng(*entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def random_scene(spec: SceneSpec, seed) -> TargetScene:
    """Realize a scene: random targets in the configured bounds, or the
    fixed list (optionally with freshly drawn gain phases)."""
    rng = np.random.default_rng(seed)
    if spec.kind == "fixed":
        targets = []
        for t in spec.targets:
            gain = t.gain
            if spec.random_gain_phase:
                gain = complex(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi)))
            targets.append(Target(range_m=t.range_m, aoa_rad=t.aoa_rad, gain=gain))
        return TargetScene.from_list(targets)
    if spec.k < 0:
        raise ValueError("k must be >= 0")
    r_lo, r_hi = spec.range_bounds_m
    a_lo, a_hi = spec.aoa_bounds_deg
    if r_lo > r_hi or a_lo > a_hi:
        raise ValueError("scene bounds must be ordered")
    targets = []
    for _ in range(spec.k):
        r = rng.uniform(r_lo, r_hi)
        a = math.radians(rng.uniform(a_lo, a_hi))
        gain = complex(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi)))
        targets.append(Target(range_m=float(r), aoa_rad=float(a), gain=gain))
    return TargetScene.from_list(targets)


def resolved_m_of(detection: DetectionSettings, params: RadarParams,
                  n_channels: int) -> tuple[int, int]:
    m_p = detection.m_of_pulses or math.ceil(params.pulses_per_cpi / 2)
    m_c = detection.m_of_channels or math.ceil(n_channels / 2)
    return m_p, m_c


def synthesize_cube_pulse_phases(params: RadarParams, geometry: ArrayGeometry,
                                 scene: TargetScene, sigma: float, seed,
                                 phase_rng: np.random.Generator):
    """Cube with each target's gain phase redrawn independently per pulse.

    Pulse p is synthesized noiselessly on its own, then noise for the whole
    cube is added in one draw so the per-sample variance stays sigma^2.
    """
    single = replace(params, pulses_per_cpi=1)
    pulses = []
    for _ in range(params.pulses_per_cpi):
        targets = [Target(t.range_m, t.aoa_rad,
                          complex(np.exp(1j * phase_rng.uniform(0.0, 2.0 * np.pi))))
                   for t in scene.targets]
        cube_p = synthesize_cube(single, geometry, TargetScene.from_list(targets),
                                 0.0, None)
        pulses.append(cube_p.samples[:, 0, :])
    samples = np.stack(pulses, axis=1)
    if sigma > 0:
        rng = np.random.default_rng(seed)
        scale = sigma / math.sqrt(2.0)
        samples = samples + scale * (rng.standard_normal(samples.shape)
                                     + 1j * rng.standard_normal(samples.shape))
    from .radar import IfDataCube
    return IfDataCube(samples=samples, params=params, geometry=geometry)


def run_proposed(cube, geometry: ArrayGeometry, settings: DetectionSettings,
                 use_somp: bool) -> list[Estimate]:
    """Proposed pipeline: per-look peak detection, binary integration, then
    OMP/SOMP angle recovery per confirmed bin with a trial-global relative
    amplitude threshold."""
    params = cube.params
    plane = dft_all(cube)
    mags = np.abs(plane.coefficients)
    n_ch, n_p = mags.shape[0], mags.shape[1]
    detections = [[detect_peaks(mags[c, p], settings.range_threshold_mult)
                   for p in range(n_p)] for c in range(n_ch)]
    m_p, m_c = resolved_m_of(settings, params, n_ch)
    rset = binary_integrate(detections, m_p, m_c, settings.bin_tolerance, params)
    if not rset.confirmed:
        return []

    grid = AngleGrid.uniform(*settings.grid_sin_bounds, settings.grid_points)
    dictionary = build_dictionary(grid, geometry, params)
    # spectral noise scale from the per-look median floor (Rayleigh median
    # = s * sqrt(ln 2)); the pursuit stops once its residual reaches the
    # expected noise norm so it never interpolates pure noise
    s_hat = float(np.median(mags, axis=2).mean()) / math.sqrt(math.log(2.0))
    noise_norm = settings.noise_stop_factor * s_hat * math.sqrt(n_ch * n_p)
    per_bin = []
    for cbin in rset.confirmed:
        Y = extract_bin_measurements(plane, cbin.bin_index).samples
        if use_somp:
            rec = somp(Y, dictionary, settings.k_max, settings.residual_tol,
                       noise_level=noise_norm)
        else:
            rec = omp(Y.sum(axis=1), dictionary, settings.k_max,
                      settings.residual_tol, noise_level=noise_norm)
        per_bin.append((cbin, rec, recovery_scores(rec)))
    global_max = max((float(s.max()) for _, _, s in per_bin if s.size), default=0.0)
    estimates = []
    for cbin, rec, scores in per_bin:
        for i, g in enumerate(rec.support):
            if global_max > 0 and scores[i] >= settings.rel_threshold * global_max:
                estimates.append(Estimate(range_m=cbin.range_m,
                                          aoa_deg=dictionary.grid.aoa_deg(g),
                                          score=float(scores[i]),
                                          bin_index=cbin.bin_index,
                                          grid_index=g))
    return _dedup_straddle(estimates, settings.bin_tolerance)


def _dedup_straddle(estimates: list[Estimate], bin_tolerance: int) -> list[Estimate]:
    """Merge estimates sharing one angle cell on adjacent range bins.

    A target whose beat frequency straddles a bin edge can be confirmed on
    both neighboring bins and recovers the same angle in each; only the
    stronger report is kept.  Estimates with distinct angle cells are never
    merged.
    """
    kept: list[Estimate] = []
    order = sorted(estimates, key=lambda e: (-e.score, e.bin_index,
                                             e.grid_index or 0))
    for est in order:
        dup = any(abs((k.grid_index or 0) - (est.grid_index or 0)) <= 1
                  and 0 < abs(k.bin_index - est.bin_index) <= bin_tolerance
                  for k in kept)
        if not dup:
            kept.append(est)
    kept.sort(key=lambda e: (e.bin_index, e.grid_index or 0))
    return kept


def _parabolic_offset(magnitudes: np.ndarray, peak: int) -> float:
    """Sub-bin peak offset from a quadratic through three spectrum samples."""
    if not 1 <= peak < magnitudes.size - 1:
        return 0.0
    left, mid, right = (float(magnitudes[peak - 1]), float(magnitudes[peak]),
                        float(magnitudes[peak + 1]))
    denom = left - 2.0 * mid + right
    if denom >= 0.0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def run_classical(cube, geometry, settings: DetectionSettings) -> list[Estimate]:
    """Classical pipeline: non-coherent integrated range detection, then
    spatial-spectrum angle peaks per confirmed bin with the same
    trial-global relative threshold.

    Reported ranges are refined to sub-bin precision by parabolic
    interpolation on the integrated spectrum; integrating all pulses before
    detection buys the classical pipeline its finer range estimate.
    """
    params = cube.params
    plane = dft_all(cube)
    rset = cb.classical_range_detect_plane(plane, settings.range_threshold_mult)
    if not rset.confirmed:
        return []
    integrated = cb.integrate_magnitudes(plane)
    bin_m = params.range_bin_m
    per_bin = []
    for cbin in rset.confirmed:
        bm = extract_bin_measurements(plane, cbin.bin_index)
        est = cb.classical_angle_detect(bm, geometry, params,
                                        settings.classical_fft_size,
                                        settings.classical_angle_mult)
        offset = _parabolic_offset(integrated, cbin.bin_index)
        per_bin.append((cbin, cbin.range_m + offset * bin_m, est))
    global_max = max((e.score for _, _, est in per_bin for e in est.entries),
                     default=0.0)
    estimates = []
    for cbin, range_m, est in per_bin:
        for e in est.entries:
            if global_max > 0 and e.score >= settings.rel_threshold * global_max:
                estimates.append(Estimate(range_m=range_m, aoa_deg=e.aoa_deg,
                                          score=e.score, bin_index=cbin.bin_index))
    return estimates


def match_hits(estimates, truth: TargetScene, range_tol_m: float = 0.6,
               angle_tol_deg: float = 1.0):
    """Greedy one-to-one matching of estimates to true targets.

    Candidate pairs within both tolerances are sorted by the normalized
    distance max(|dR|/range_tol, |dTheta|/angle_tol) and accepted in order,
    skipping estimates or truths that are already matched.  Returns
    (hits, false_alarm_indices, miss_indices).
    """
    if range_tol_m <= 0 or angle_tol_deg <= 0:
        raise ValueError("tolerances must be positive")
    pairs = []
    for ei, est in enumerate(estimates):
        for ti, tgt in enumerate(truth.targets):
            dr = abs(est.range_m - tgt.range_m)
            da = abs(est.aoa_deg - math.degrees(tgt.aoa_rad))
            if dr <= range_tol_m and da <= angle_tol_deg:
                pairs.append((max(dr / range_tol_m, da / angle_tol_deg), ei, ti))
    pairs.sort()
    hits = []
    used_e, used_t = set(), set()
    for _, ei, ti in pairs:
        if ei in used_e or ti in used_t:
            continue
        hits.append((ei, ti))
        used_e.add(ei)
        used_t.add(ti)
    false_alarms = [ei for ei in range(len(estimates)) if ei not in used_e]
    misses = [ti for ti in range(truth.k) if ti not in used_t]
    return hits, false_alarms, misses


def run_trial(config: TrialConfig, seed: int) -> TrialOutcome:
    """One seeded end-to-end trial: synthesize, detect, estimate, score."""
    scene = random_scene(config.scene, np.random.SeedSequence([int(seed), 1]))
    sigma = noise_sigma_from_snr(config.snr_db)
    geometry = config.geometry.build(config.params)
    synth_geometry = geometry.geometry if isinstance(geometry, cb.FullArrayGeometry) \
        else geometry
    if config.scene.gain_phase_per_pulse:
        cube = synthesize_cube_pulse_phases(
            config.params, synth_geometry, scene, sigma,
            np.random.SeedSequence([int(seed), 2]),
            phase_rng=np.random.default_rng(np.random.SeedSequence([int(seed), 3])))
    else:
        cube = synthesize_cube(config.params, synth_geometry, scene, sigma,
                               np.random.SeedSequence([int(seed), 2]))
    if config.method == "classical":
        estimates = run_classical(cube, geometry, config.detection)
    else:
        estimates = run_proposed(cube, synth_geometry, config.detection,
                                 use_somp=config.method == "proposed-somp")
    hits, fas, misses = match_hits(estimates, scene)
    return TrialOutcome(estimates=estimates, truth=scene, hits=hits,
                        false_alarms=fas, misses=misses)


def _trial_summary(config: TrialConfig, seed: int):
    out = run_trial(config, seed)
    dr = [out.estimates[ei].range_m - out.truth.targets[ti].range_m
          for ei, ti in out.hits]
    da = [out.estimates[ei].aoa_deg - math.degrees(out.truth.targets[ti].aoa_rad)
          for ei, ti in out.hits]
    return len(out.hits), len(out.false_alarms), out.truth.k, dr, da


def calibrate_threshold(config: TrialConfig, target_fa_per_trial: float,
                        n_cal_trials: int = 200, seed: int = 0,
                        bracket: tuple[float, float] = (0.25, 64.0),
                        rel_tol: float = 0.2) -> CalibrationResult:
    """Bisect the range threshold multiplier on noise-only trials.

    The empirical false-alarm rate (estimates per target-free trial) is
    monotone non-increasing in the multiplier; geometric bisection stops
    once the rate is within ``rel_tol`` of the target or the bracket
    collapses, in which case the achievable bound is reported with
    ``converged=False``.
    """
    if target_fa_per_trial <= 0:
        raise ValueError("target_fa_per_trial must be positive")
    noise_cfg = replace(config, scene=SceneSpec(kind="fixed", targets=(),
                                                random_gain_phase=False))
    seeds = [int(np.random.SeedSequence([seed, 777, i]).generate_state(1)[0])
             for i in range(n_cal_trials)]

    def rate(mult: float) -> float:
        cfg = replace(noise_cfg, detection=replace(noise_cfg.detection,
                                                   range_threshold_mult=mult))
        total = sum(_trial_summary(cfg, s)[1] for s in seeds)
        return total / n_cal_trials

    def result(mult, achieved, converged):
        return CalibrationResult(range_threshold_mult=mult,
                                 rel_threshold=config.detection.rel_threshold,
                                 classical_angle_mult=config.detection.classical_angle_mult,
                                 achieved_fa_per_trial=achieved,
                                 converged=converged)

    lo, hi = bracket
    r_lo = rate(lo)
    if abs(r_lo - target_fa_per_trial) <= rel_tol * target_fa_per_trial:
        return result(lo, r_lo, True)
    if r_lo < target_fa_per_trial:
        # even the most permissive threshold cannot reach the target
        return result(lo, r_lo, False)
    r_hi = rate(hi)
    while r_hi > target_fa_per_trial and hi < 4096.0:
        hi *= 2.0
        r_hi = rate(hi)
    if abs(r_hi - target_fa_per_trial) <= rel_tol * target_fa_per_trial:
        return result(hi, r_hi, True)
    best_mult, best_rate = (hi, r_hi)
    while hi / lo > 1.02:
        mid = math.sqrt(lo * hi)
        r = rate(mid)
        if abs(r - target_fa_per_trial) <= rel_tol * target_fa_per_trial:
            return result(mid, r, True)
        if abs(r - target_fa_per_trial) < abs(best_rate - target_fa_per_trial):
            best_mult, best_rate = mid, r
        if r > target_fa_per_trial:
            lo = mid
        else:
            hi = mid
    return result(best_mult, best_rate, False)


def trial_seed(master_seed: int, row_index: int, trial_index: int) -> int:
    """Counter-based per-trial seed split, recorded in run manifests."""
    ss = np.random.SeedSequence([int(master_seed), int(row_index), int(trial_index)])
    return int(ss.generate_state(1)[0])


def _run_trials(config: TrialConfig, seeds: list[int], n_jobs: int):
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_trial_summary, [config] * len(seeds), seeds,
                                 chunksize=max(1, len(seeds) // (4 * n_jobs))))
    return [_trial_summary(config, s) for s in seeds]


def monte_carlo(config: TrialConfig, snr_list, n_trials: int = 300,
                master_seed: int = 0, target_fa_per_trial: float = 0.1,
                n_cal_trials: int = 200, n_jobs: int = 1,
                calibrate: bool = True):
    """Run calibrated seeded trials per SNR and aggregate metrics.

    Returns (rows, calibrations): one MetricsRow and one CalibrationResult
    per SNR, in SNR order.  Aggregation is sum-based, so results do not
    depend on trial execution order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rows, calibrations = [], []
    for row_index, snr_db in enumerate(snr_list):
        cfg = replace(config, snr_db=float(snr_db))
        if calibrate:
            cal = calibrate_threshold(cfg, target_fa_per_trial, n_cal_trials,
                                      seed=master_seed)
            cfg = replace(cfg, detection=replace(
                cfg.detection, range_threshold_mult=cal.range_threshold_mult))
        else:
            det = cfg.detection
            cal = CalibrationResult(det.range_threshold_mult, det.rel_threshold,
                                    det.classical_angle_mult, float("nan"), True)
        seeds = [trial_seed(master_seed, row_index, i) for i in range(n_trials)]
        summaries = _run_trials(cfg, seeds, n_jobs)
        hits = sum(s[0] for s in summaries)
        fas = sum(s[1] for s in summaries)
        truths = sum(s[2] for s in summaries)
        dr = np.concatenate([np.asarray(s[3]) for s in summaries]) \
            if hits else np.zeros(0)
        da = np.concatenate([np.asarray(s[4]) for s in summaries]) \
            if hits else np.zeros(0)
        rows.append(MetricsRow(
            snr_db=float(snr_db),
            method=config.method,
            array=config.geometry.kind,
            hit_rate=hits / truths if truths else 0.0,
            fa_rate=fas / n_trials,
            range_rmse_m=float(np.sqrt(np.mean(dr ** 2))) if hits else float("nan"),
            angle_rmse_deg=float(np.sqrt(np.mean(da ** 2))) if hits else float("nan"),
            n_trials=n_trials,
        ))
        calibrations.append(cal)
    return rows, calibrations
