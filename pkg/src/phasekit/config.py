"""Run configuration: YAML files with unit-suffixed keys and env overrides.

Physical quantities carry their unit in the key name (wavelength_nm,
distance_z_mm, pixel_pitch_um) and are converted to SI on load.  Any key
can be overridden from the environment using the PHASEKIT_ prefix with
double underscores separating nesting levels, e.g.
PHASEKIT_OPTICS__WAVELENGTH_NM=532 overrides optics.wavelength_nm.
"""

from __future__ import annotations

import os
from pathlib import Path

import yaml

from .optics import OpticalConfig
from .priors import DeepStage, PriorChain, TVStage
from .simulate import NoiseModel
from .solvers import AFTER_STATIONARY, FROM_START, PriorPhase, SolveSchedule

ENV_PREFIX = "PHASEKIT_"

METHODS = ("backprop", "gs", "er", "er_tv", "phy_zsn", "phytv_zsn")
ITERATIVE_METHODS = ("er", "er_tv", "phy_zsn", "phytv_zsn")
DEEP_METHODS = ("phy_zsn", "phytv_zsn")


class ConfigError(ValueError):
    """Invalid or missing configuration; the message names the bad field."""


def _apply_env_overrides(cfg: dict, environ) -> dict:
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        node = cfg
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"env override {name}: {part} is not a mapping")
        node[path[-1]] = yaml.safe_load(raw)
    return cfg


def load_config(path, environ=None) -> dict:
    """Load a YAML config and apply PHASEKIT_* environment overrides."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = yaml.safe_load(text)
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return _apply_env_overrides(cfg, os.environ if environ is None else environ)


def _section(cfg: dict, name: str) -> dict:
    value = cfg.get(name)
    if value is None:
        raise ConfigError(f"missing config section {name!r}")
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return value


def _number(section: dict, section_name: str, key: str, minimum=None):
    if key not in section:
        raise ConfigError(f"missing config field {section_name}.{key}")
    value = section[key]
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms like 1.0e4 (no sign) as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config field {section_name}.{key} must be a number, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"config field {section_name}.{key} must be >= {minimum}, got {value}")
    return value


def optical_config(cfg: dict) -> OpticalConfig:
    optics = _section(cfg, "optics")
    return OpticalConfig(
        wavelength=_number(optics, "optics", "wavelength_nm", minimum=0) * 1e-9,
        distance_z=_number(optics, "optics", "distance_z_mm", minimum=0) * 1e-3,
        pixel_pitch=_number(optics, "optics", "pixel_pitch_um", minimum=0) * 1e-6,
        width=int(_number(optics, "optics", "width_px", minimum=2)),
        height=int(_number(optics, "optics", "height_px", minimum=2)),
    )


def noise_model(section: dict, section_name: str, seed: int) -> NoiseModel:
    noise = section.get("noise", {"kind": "none"})
    if not isinstance(noise, dict):
        raise ConfigError(f"config field {section_name}.noise must be a mapping")
    kind = noise.get("kind", "none")
    if kind == "none":
        return NoiseModel(kind="none", seed=seed)
    if kind == "poisson":
        return NoiseModel(
            kind="poisson",
            peak_photons=float(_number(noise, f"{section_name}.noise", "peak_photons", minimum=0)),
            seed=seed,
        )
    raise ConfigError(f"config field {section_name}.noise.kind must be none|poisson, got {kind!r}")


def _tv_stage(params: dict) -> TVStage:
    tv = params.get("tv", {})
    if not isinstance(tv, dict):
        raise ConfigError("config field tv must be a mapping")
    return TVStage(
        weight=float(tv.get("weight", 0.1)),
        max_iter=int(tv.get("max_iter", 50)),
        tol=float(tv.get("tol", 1e-4)),
    )


def _deep_stage(params: dict) -> DeepStage:
    deep = params.get("deep", {})
    if not isinstance(deep, dict):
        raise ConfigError("config field deep must be a mapping")
    return DeepStage(sigma=float(deep.get("sigma", 10.0)))


def build_schedule(method: str, params: dict) -> SolveSchedule:
    """Translate a method name plus prior parameters into a solve schedule."""
    if method not in ITERATIVE_METHODS:
        raise ConfigError(f"method {method!r} does not use a solve schedule")
    sched = params.get("schedule", {})
    if not isinstance(sched, dict):
        raise ConfigError("config field schedule must be a mapping")

    if method == "er":
        phases = (PriorPhase(PriorChain()),)
    elif method == "er_tv":
        phases = (PriorPhase(PriorChain(stages=(_tv_stage(params),))),)
    elif method == "phy_zsn":
        phases = (PriorPhase(PriorChain(stages=(_deep_stage(params),))),)
    else:  # phytv_zsn: TV-only until stationary, then cascaded TV + deep
        tv = _tv_stage(params)
        deep = _deep_stage(params)
        phases = (
            PriorPhase(PriorChain(stages=(tv,)), FROM_START),
            PriorPhase(PriorChain(stages=(tv, deep)), AFTER_STATIONARY),
        )

    hio_beta = params.get("hio_beta")
    return SolveSchedule(
        max_outer_iter=int(sched.get("max_outer_iter", 200)),
        stop_tol=float(sched.get("stop_tol", 1e-4)),
        stop_window=int(sched.get("stop_window", 5)),
        prior_phases=phases,
        hio_beta=None if hio_beta is None else float(hio_beta),
    )


def validate_method(method: str) -> str:
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return method
