"""Run configuration: JSON schema, validation, and assembly into trial configs.

A run config is a single JSON file with flat sections (radar / array /
scene / detection / sweep / trial); unknown keys are rejected and all
values are schema-checked before anything executes.  Command-line flags
override the file-level seed and output directory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import jsonschema

from .harness import (ARRAYS, METHODS, DetectionSettings, GeometrySpec,
                      SceneSpec, TrialConfig)
from .radar import RadarParams, Target


class ConfigError(Exception):
    """Invalid run configuration; message carries field diagnostics."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_BOUNDS = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
        "radar": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "carrier_freq_hz": _POS,
                "bandwidth_hz": _POS,
                "chirp_duration_s": _POS,
                "sample_rate_hz": _POS,
                "pulses_per_cpi": {"type": "integer", "minimum": 1},
            },
        },
        "array": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_tx": {"type": "integer", "minimum": 1},
                "n_rx": {"type": "integer", "minimum": 1},
                "aperture_tx_wavelengths": _POS,
                "aperture_rx_wavelengths": _POS,
                "placement": {"enum": ["random", "spaced"]},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["random", "fixed"]},
                "k": {"type": "integer", "minimum": 1},
                "range_bounds_m": _BOUNDS,
                "aoa_bounds_deg": _BOUNDS,
                "random_gain_phase": {"type": "boolean"},
                "gain_phase_per_pulse": {"type": "boolean"},
                "targets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["range_m", "aoa_deg"],
                        "properties": {
                            "range_m": _POS,
                            "aoa_deg": {"type": "number",
                                        "exclusiveMinimum": -90,
                                        "exclusiveMaximum": 90},
                            "gain": {"type": "array", "items": _NUM,
                                     "minItems": 2, "maxItems": 2},
                        },
                    },
                },
            },
        },
        "detection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "range_threshold_mult": _POS,
                "m_of_pulses": {"type": ["integer", "null"], "minimum": 1},
                "m_of_channels": {"type": ["integer", "null"], "minimum": 1},
                "bin_tolerance": {"type": "integer", "minimum": 0},
                "k_max": {"type": "integer", "minimum": 1},
                "residual_tol": {"type": "number", "minimum": 0},
                "rel_threshold": {"type": "number", "exclusiveMinimum": 0,
                                  "maximum": 1},
                "grid_points": {"type": "integer", "minimum": 2},
                "grid_sin_bounds": _BOUNDS,
                "classical_fft_size": {"type": "integer", "minimum": 2},
                "classical_angle_mult": _POS,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "methods": {"type": "array", "minItems": 1,
                            "items": {"enum": list(METHODS)}},
                "arrays": {"type": "array", "minItems": 1,
                           "items": {"enum": list(ARRAYS)}},
                "snr_db": {"type": "array", "minItems": 1, "items": _NUM},
                "n_trials": {"type": "integer", "minimum": 1},
                "target_fa_per_trial": _POS,
                "n_cal_trials": {"type": "integer", "minimum": 1},
                "calibrate": {"type": "boolean"},
            },
        },
        "trial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": list(METHODS)},
                "array": {"enum": list(ARRAYS)},
                "snr_db": _NUM,
            },
        },
    },
}

DEFAULTS = {
    "seed": 12345,
    "out_dir": "results",
    "radar": {
        "carrier_freq_hz": 9.4e9,
        "bandwidth_hz": 250e6,
        "chirp_duration_s": 363e-6,
        "sample_rate_hz": 1.4e6,
        "pulses_per_cpi": 10,
    },
    "array": {
        "n_tx": 3,
        "n_rx": 3,
        "aperture_tx_wavelengths": 6.0,
        "aperture_rx_wavelengths": 6.0,
        "placement": "random",
        "seed": 20230511,
    },
    "scene": {
        "kind": "random",
        "k": 5,
        "range_bounds_m": [10.0, 40.0],
        "aoa_bounds_deg": [-15.0, 15.0],
        "random_gain_phase": True,
        "gain_phase_per_pulse": False,
        "targets": [],
    },
    "detection": {
        "range_threshold_mult": 6.0,
        "m_of_pulses": None,
        "m_of_channels": None,
        "bin_tolerance": 1,
        "k_max": 10,
        "residual_tol": 1e-6,
        "rel_threshold": 0.25,
        "grid_points": 150,
        "grid_sin_bounds": [-0.7071, 0.7071],
        "classical_fft_size": 256,
        "classical_angle_mult": 3.0,
    },
    "sweep": {
        "methods": ["proposed-omp", "proposed-somp", "classical"],
        "arrays": ["sparse", "full"],
        "snr_db": [0.0, 5.0, 10.0, 15.0, 20.0],
        "n_trials": 300,
        "target_fa_per_trial": 0.1,
        "n_cal_trials": 200,
        "calibrate": True,
    },
    "trial": {
        "method": "proposed-somp",
        "array": "sparse",
        "snr_db": 20.0,
    },
}


@dataclass
class RunConfig:
    seed: int
    out_dir: str
    params: RadarParams
    array: GeometrySpec
    scene: SceneSpec
    detection: DetectionSettings
    sweep: dict = field(default_factory=dict)
    trial: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def trial_config(self, method: str | None = None, array: str | None = None,
                     snr_db: float | None = None) -> TrialConfig:
        geometry = self.array
        kind = array or self.trial["array"]
        geometry = GeometrySpec(kind=kind, n_tx=geometry.n_tx, n_rx=geometry.n_rx,
                                aperture_tx_wavelengths=geometry.aperture_tx_wavelengths,
                                aperture_rx_wavelengths=geometry.aperture_rx_wavelengths,
                                placement=geometry.placement, seed=geometry.seed)
        return TrialConfig(
            params=self.params,
            geometry=geometry,
            scene=self.scene,
            snr_db=self.trial["snr_db"] if snr_db is None else float(snr_db),
            method=method or self.trial["method"],
            detection=self.detection,
        )


def _merged(user: dict) -> dict:
    out = {}
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            section = dict(default)
            section.update(user.get(key, {}))
            out[key] = section
        else:
            out[key] = user.get(key, default)
    return out


def validate_config(data: dict) -> dict:
    """Schema-check a raw config dict and return it merged with defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            path = "/".join(str(p) for p in err.absolute_path) or "(root)"
            lines.append(f"{path}: {err.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    merged = _merged(data)
    scene = merged["scene"]
    if scene["kind"] == "fixed" and not scene["targets"]:
        raise ConfigError("scene: fixed scene requires a non-empty targets list")
    lo, hi = scene["range_bounds_m"]
    if lo > hi or lo <= 0:
        raise ConfigError("scene/range_bounds_m: bounds must be ordered and positive")
    lo, hi = scene["aoa_bounds_deg"]
    if lo > hi:
        raise ConfigError("scene/aoa_bounds_deg: bounds must be ordered")
    lo, hi = merged["detection"]["grid_sin_bounds"]
    if not -1.0 <= lo < hi <= 1.0:
        raise ConfigError("detection/grid_sin_bounds: need -1 <= lo < hi <= 1")
    return merged


def _scene_spec(section: dict) -> SceneSpec:
    targets = tuple(
        Target(range_m=t["range_m"], aoa_rad=math.radians(t["aoa_deg"]),
               gain=complex(*t.get("gain", (1.0, 0.0))))
        for t in section["targets"])
    return SceneSpec(kind=section["kind"], k=section["k"],
                     range_bounds_m=tuple(section["range_bounds_m"]),
                     aoa_bounds_deg=tuple(section["aoa_bounds_deg"]),
                     targets=targets,
                     random_gain_phase=section["random_gain_phase"],
                     gain_phase_per_pulse=section["gain_phase_per_pulse"])


def build_run_config(data: dict) -> RunConfig:
    merged = validate_config(data)
    radar = merged["radar"]
    params = RadarParams(carrier_freq_hz=radar["carrier_freq_hz"],
                         bandwidth_hz=radar["bandwidth_hz"],
                         chirp_duration_s=radar["chirp_duration_s"],
                         sample_rate_hz=radar["sample_rate_hz"],
                         pulses_per_cpi=radar["pulses_per_cpi"])
    arr = merged["array"]
    det = merged["detection"]
    return RunConfig(
        seed=merged["seed"],
        out_dir=merged["out_dir"],
        params=params,
        array=GeometrySpec(kind="sparse", n_tx=arr["n_tx"], n_rx=arr["n_rx"],
                           aperture_tx_wavelengths=arr["aperture_tx_wavelengths"],
                           aperture_rx_wavelengths=arr["aperture_rx_wavelengths"],
                           placement=arr["placement"], seed=arr["seed"]),
        scene=_scene_spec(merged["scene"]),
        detection=DetectionSettings(
            range_threshold_mult=det["range_threshold_mult"],
            m_of_pulses=det["m_of_pulses"],
            m_of_channels=det["m_of_channels"],
            bin_tolerance=det["bin_tolerance"],
            k_max=det["k_max"],
            residual_tol=det["residual_tol"],
            rel_threshold=det["rel_threshold"],
            grid_points=det["grid_points"],
            grid_sin_bounds=tuple(det["grid_sin_bounds"]),
            classical_fft_size=det["classical_fft_size"],
            classical_angle_mult=det["classical_angle_mult"],
        ),
        sweep=merged["sweep"],
        trial=merged["trial"],
        raw=merged,
    )


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return build_run_config(data)
