"""Command-line entry point.

Commands: ``sweep`` (Monte Carlo SNR sweep over method/array combinations),
``close-targets`` (close-range spectra comparison), ``single`` (one seeded
trial), ``calibrate`` (threshold calibration only).  Exit codes: 0 success,
2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import classical as cb
from .harness import (calibrate_threshold, dft_all, monte_carlo, random_scene,
                      run_classical, run_proposed, run_trial,
                      synthesize_cube_pulse_phases, trial_seed)
from .radar import noise_sigma_from_snr, synthesize_cube
from .rangedet import bin_to_range
from .runconfig import DEFAULTS, ConfigError, RunConfig, build_run_config, load_run_config
from .svgplot import line_chart

METRICS_HEADER = ["snr_db", "method", "array", "hit_rate", "fa_rate",
                  "range_rmse_m", "angle_rmse_deg", "n_trials"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def atomic_write(path: str, data: str) -> None:
    """Write via a temp file and rename so interrupted runs leave no partials."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _load(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else build_run_config({})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _write_manifest(cfg: RunConfig, path: str, rows_meta) -> None:
    manifest = {
        "config": cfg.raw,
        "master_seed": cfg.seed,
        "seed_scheme": "trial i of row r uses SeedSequence([master_seed, r, i]); "
                       "calibration trial i uses SeedSequence([master_seed, 777, i])",
        "rows": rows_meta,
    }
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    sweep = cfg.sweep
    all_rows, rows_meta = [], []
    row_offset = 0
    for method in sweep["methods"]:
        for array in sweep["arrays"]:
            trial_cfg = cfg.trial_config(method=method, array=array,
                                         snr_db=sweep["snr_db"][0])
            rows, cals = monte_carlo(
                trial_cfg, sweep["snr_db"], n_trials=sweep["n_trials"],
                master_seed=cfg.seed + row_offset,
                target_fa_per_trial=sweep["target_fa_per_trial"],
                n_cal_trials=sweep["n_cal_trials"], n_jobs=args.jobs,
                calibrate=sweep["calibrate"])
            all_rows.extend(rows)
            for row, cal in zip(rows, cals):
                rows_meta.append({
                    "method": method, "array": array, "snr_db": row.snr_db,
                    "master_seed": cfg.seed + row_offset,
                    "n_trials": row.n_trials,
                    "range_threshold_mult": cal.range_threshold_mult,
                    "achieved_fa_per_trial": cal.achieved_fa_per_trial,
                    "calibration_converged": cal.converged,
                })
            row_offset += 1
    csv_rows = [(r.snr_db, r.method, r.array, r.hit_rate, r.fa_rate,
                 r.range_rmse_m, r.angle_rmse_deg, r.n_trials) for r in all_rows]
    atomic_write(os.path.join(cfg.out_dir, "metrics.csv"),
                 _csv_text(METRICS_HEADER, csv_rows))
    _write_manifest(cfg, os.path.join(cfg.out_dir, "manifest.json"), rows_meta)
    if args.plots:
        _emit_plots(cfg.out_dir, all_rows)
    print(f"wrote {len(csv_rows)} metric rows to {cfg.out_dir}/metrics.csv")
    return 0


def _emit_plots(out_dir: str, rows) -> None:
    metrics = [("hit_rate", "hit rate"), ("fa_rate", "false alarms per trial"),
               ("range_rmse_m", "range RMSE (m)"),
               ("angle_rmse_deg", "angle RMSE (deg)")]
    for attr, label in metrics:
        series = {}
        for row in rows:
            key = f"{row.method} / {row.array}"
            xs, ys = series.setdefault(key, ([], []))
            xs.append(row.snr_db)
            ys.append(getattr(row, attr))
        svg = line_chart(series, f"{label} vs SNR", "SNR (dB)", label)
        atomic_write(os.path.join(out_dir, "plots", f"{attr}.svg"), svg)


def cmd_close_targets(args) -> int:
    cfg = _load(args)
    if cfg.scene.kind != "fixed" or not cfg.scene.targets:
        scene_cfg = dict(DEFAULTS["scene"])
        scene_cfg.update({
            "kind": "fixed",
            "gain_phase_per_pulse": True,
            "targets": [{"range_m": 20.6, "aoa_deg": 0.0},
                        {"range_m": 20.0, "aoa_deg": 0.0},
                        {"range_m": 19.4, "aoa_deg": 0.0}],
        })
        raw = dict(cfg.raw)
        raw["scene"] = scene_cfg
        cfg = build_run_config(raw)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out

    params = cfg.params
    trial_cfg = cfg.trial_config(method="proposed-somp", array="sparse")
    geometry = trial_cfg.geometry.build(params)
    scene = random_scene(cfg.scene, np.random.SeedSequence([cfg.seed, 1]))
    sigma = noise_sigma_from_snr(trial_cfg.snr_db)
    if cfg.scene.gain_phase_per_pulse:
        cube = synthesize_cube_pulse_phases(
            params, geometry, scene, sigma, np.random.SeedSequence([cfg.seed, 2]),
            phase_rng=np.random.default_rng(np.random.SeedSequence([cfg.seed, 3])))
    else:
        cube = synthesize_cube(params, geometry, scene, sigma,
                               np.random.SeedSequence([cfg.seed, 2]))
    plane = dft_all(cube)
    ranges = [bin_to_range(l, params) for l in range(params.samples_per_pulse)]

    integrated = cb.integrate_magnitudes(plane)
    rows = [(l, ranges[l], float(integrated[l])) for l in range(len(ranges))]
    atomic_write(os.path.join(cfg.out_dir, "classical_integrated.csv"),
                 _csv_text(["bin", "range_m", "magnitude"], rows))

    n_pulses = min(3, params.pulses_per_cpi)
    for p in range(n_pulses):
        mags = np.abs(plane.coefficients[0, p])
        rows = [(l, ranges[l], float(mags[l])) for l in range(len(ranges))]
        atomic_write(os.path.join(cfg.out_dir, f"proposed_pulse_{p}.csv"),
                     _csv_text(["bin", "range_m", "magnitude"], rows))

    proposed = run_proposed(cube, geometry, cfg.detection, use_somp=True)
    classical = run_classical(cube, geometry, cfg.detection)
    det_rows = [("proposed", e.bin_index, e.range_m, e.aoa_deg) for e in proposed]
    det_rows += [("classical", e.bin_index, e.range_m, e.aoa_deg) for e in classical]
    atomic_write(os.path.join(cfg.out_dir, "detections.csv"),
                 _csv_text(["pipeline", "bin", "range_m", "aoa_deg"], det_rows))
    print(f"wrote close-target spectra for {scene.k} targets to {cfg.out_dir}")
    return 0


def cmd_single(args) -> int:
    cfg = _load(args)
    trial_cfg = cfg.trial_config()
    outcome = run_trial(trial_cfg, trial_seed(cfg.seed, 0, 0))
    hit_by_est = {ei: ti for ei, ti in outcome.hits}

    print(f"method={trial_cfg.method} array={trial_cfg.geometry.kind} "
          f"snr_db={trial_cfg.snr_db:g} seed={cfg.seed}")
    print(f"{'':14}{'range_m':>10} {'aoa_deg':>10}  classification")
    rows = []
    for ti, tgt in enumerate(outcome.truth.targets):
        status = "hit" if ti not in outcome.misses else "miss"
        print(f"truth[{ti}]     {tgt.range_m:>10.3f} "
              f"{math.degrees(tgt.aoa_rad):>10.3f}  {status}")
        rows.append(("truth", ti, tgt.range_m, math.degrees(tgt.aoa_rad), status))
    for ei, est in enumerate(outcome.estimates):
        status = f"hit->truth[{hit_by_est[ei]}]" if ei in hit_by_est else "false_alarm"
        print(f"estimate[{ei}]  {est.range_m:>10.3f} {est.aoa_deg:>10.3f}  {status}")
        rows.append(("estimate", ei, est.range_m, est.aoa_deg, status))
    print(f"hits={len(outcome.hits)} false_alarms={len(outcome.false_alarms)} "
          f"misses={len(outcome.misses)}")
    atomic_write(os.path.join(cfg.out_dir, "single_trial.csv"),
                 _csv_text(["kind", "index", "range_m", "aoa_deg", "classification"],
                           rows))
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    sweep = cfg.sweep
    rows = []
    for method in sweep["methods"]:
        for array in sweep["arrays"]:
            for snr_db in sweep["snr_db"]:
                trial_cfg = cfg.trial_config(method=method, array=array,
                                             snr_db=snr_db)
                cal = calibrate_threshold(trial_cfg, sweep["target_fa_per_trial"],
                                          sweep["n_cal_trials"], seed=cfg.seed)
                rows.append((method, array, snr_db, cal.range_threshold_mult,
                             cal.achieved_fa_per_trial, cal.converged))
                print(f"{method}/{array} @ {snr_db:g} dB: "
                      f"mult={cal.range_threshold_mult:.4g} "
                      f"fa={cal.achieved_fa_per_trial:.4g} converged={cal.converged}")
    atomic_write(os.path.join(cfg.out_dir, "calibration.csv"),
                 _csv_text(["method", "array", "snr_db", "range_threshold_mult",
                            "achieved_fa_per_trial", "converged"], rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsemimo",
        description="MIMO-FMCW radar range/angle detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (("sweep", cmd_sweep), ("close-targets", cmd_close_targets),
                       ("single", cmd_single), ("calibrate", cmd_calibrate)):
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH",
                       help="JSON run config (defaults used when omitted)")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, metavar="U64", help="master seed")
        p.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="parallel trial workers")
        p.add_argument("--plots", action="store_true",
                       help="emit SVG charts alongside CSVs")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
