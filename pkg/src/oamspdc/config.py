"""Run configuration: one JSON document per run, units spelled out in keys.

Missing keys take the defaults below; command-line flags override the file;
the merged result is what gets validated, hashed and echoed to the manifest.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os

from .errors import ConfigError
from .spectrum import (
    CRYSTAL_LENGTH,
    DEFAULT_COLLECTION_RATIO,
    DEFAULT_PUMP_WAIST,
    PUMP_WAVELENGTH,
    CrystalConfig,
    ModeWindow,
    PumpSpec,
    QuadratureSettings,
)

__all__ = ["DEFAULTS", "load_config", "merge", "config_hash", "parse_window", "crystal_from", "pump_from"]

_SQRT25 = math.sqrt(2.5)

DEFAULTS: dict = {
    "seed": 0,
    "crystal": {
        "length_m": CRYSTAL_LENGTH,
        "pump": {"waist_m": DEFAULT_PUMP_WAIST, "wavelength_m": PUMP_WAVELENGTH},
        "signal": {"waist_m": DEFAULT_PUMP_WAIST * DEFAULT_COLLECTION_RATIO, "wavelength_m": 2 * PUMP_WAVELENGTH},
        "idler": {"waist_m": DEFAULT_PUMP_WAIST * DEFAULT_COLLECTION_RATIO, "wavelength_m": 2 * PUMP_WAVELENGTH},
    },
    "pump": [
        {"L": -2, "abs": _SQRT25, "arg": 0.0},
        {"L": 0, "abs": 1.0, "arg": 0.0},
        {"L": 2, "abs": _SQRT25, "arg": 0.0},
    ],
    "window": {"l_max": 5, "p_max": 3},
    "quadrature": {"n_r": 64, "n_z": 32},
    "state": {"source": "mes", "visibility": 1.0, "theta0_rad": 0.0, "theta2_rad": 0.0},
    "design": {
        "subspace": [[-1, -1], [0, 0], [1, 1]],
        "coefficients": [{"re": 1.0, "im": 0.0}] * 3,
        "collection": "azimuthal",
    },
    "interfere": {
        "alphas_rad": [2 * math.pi / 3, math.pi / 3],
        "scan": "theta2",
        "samples": 101,
        "max_counts": 300.0,
        "integration_s": 20.0,
    },
    "bell": {
        "preset": "experiment",
        "tau_a": None,
        "tau_b": None,
        "resolution": 64,
        "max_counts": 300.0,
        "integration_s": 20.0,
        "bootstrap": 500,
    },
    "tomo": {
        "mode": "full144",
        "max_counts": 300.0,
        "integration_s": 20.0,
        "bootstrap": 100,
        "counts_file": None,
    },
    "holo": {
        "panel": {"width": 1920, "height": 1080, "pitch_m": 8e-6, "depth": 256, "center_offset_px": [0.0, 0.0]},
        "w0_m": 1e-3,
        "wavelength_m": PUMP_WAVELENGTH,
        "blaze": {"period_px": 8.0, "angle_rad": 0.0},
        "adjust_waists": True,
    },
}


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; lists and scalars in ``override`` replace those in ``base``."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {os.fspath(path)!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {os.fspath(path)!r} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    if "manifest_version" in user:
        # replay: a run manifest carries the full merged config
        user = user.get("config")
        if not isinstance(user, dict):
            raise ConfigError("manifest lacks a config object")
    unknown = set(user) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return merge(DEFAULTS, user)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def parse_window(text: str) -> dict:
    try:
        lmax, pmax = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--window expects 'lmax,pmax', got {text!r}") from exc
    if lmax < 0 or pmax < 0:
        raise ConfigError("window bounds must be non-negative")
    return {"l_max": lmax, "p_max": pmax}


def _positive(value, name: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc
    if not (x > 0 and math.isfinite(x)):
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return x


def crystal_from(cfg: dict) -> CrystalConfig:
    c = cfg["crystal"]
    try:
        for arm in ("pump", "signal", "idler"):
            _positive(c[arm]["waist_m"], f"crystal.{arm}.waist_m")
            _positive(c[arm]["wavelength_m"], f"crystal.{arm}.wavelength_m")
        _positive(c["length_m"], "crystal.length_m")
        return CrystalConfig.from_dict(c)
    except KeyError as exc:
        raise ConfigError(f"crystal section lacks {exc}") from exc


def pump_from(cfg: dict) -> PumpSpec:
    try:
        pump = PumpSpec.from_dict(cfg["pump"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid pump: {exc}") from exc
    if pump.norm == 0:
        raise ConfigError("pump has zero norm")
    return pump


def window_from(cfg: dict) -> ModeWindow:
    try:
        return ModeWindow(int(cfg["window"]["l_max"]), int(cfg["window"]["p_max"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid window: {exc}") from exc


def quad_from(cfg: dict) -> QuadratureSettings:
    try:
        return QuadratureSettings(int(cfg["quadrature"]["n_r"]), int(cfg["quadrature"]["n_z"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid quadrature: {exc}") from exc


def validate(cfg: dict) -> None:
    """Fail early with :class:`ConfigError` on any malformed section."""
    if not isinstance(cfg.get("seed"), int) or isinstance(cfg.get("seed"), bool) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    crystal_from(cfg)
    pump_from(cfg)
    window_from(cfg)
    quad_from(cfg)
    st = cfg["state"]
    if st.get("source") not in ("mes", "pump"):
        raise ConfigError("state.source must be 'mes' or 'pump'")
    v = st.get("visibility")
    if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
        raise ConfigError("state.visibility must lie in [0, 1]")
    for sec, keys in (
        ("interfere", ("max_counts", "integration_s")),
        ("bell", ("max_counts", "integration_s")),
        ("tomo", ("max_counts", "integration_s")),
    ):
        for k in keys:
            _positive(cfg[sec][k], f"{sec}.{k}")
    if cfg["bell"]["preset"] not in ("experiment", "standard", "optimize", "custom"):
        raise ConfigError("bell.preset must be experiment, standard, optimize or custom")
    if cfg["tomo"]["mode"] not in ("full144", "paper81"):
        raise ConfigError("tomo.mode must be full144 or paper81")
    panel = cfg["holo"]["panel"]
    for k in ("width", "height", "depth"):
        if not isinstance(panel.get(k), int) or panel[k] <= 0:
            raise ConfigError(f"holo.panel.{k} must be a positive integer")
    _positive(panel["pitch_m"], "holo.panel.pitch_m")
    _positive(cfg["holo"]["w0_m"], "holo.w0_m")
    _positive(cfg["holo"]["wavelength_m"], "holo.wavelength_m")
