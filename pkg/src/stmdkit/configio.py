"""Config files and hashing.

Configs are nested key/value YAML documents (two levels: section -> key ->
scalar or short list). Unknown sections or keys are rejected with the full
key path. Environment variables of the form STMD_<SECTION>_<KEY> override
file values; their text is parsed like YAML scalars.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os

import yaml

DEFAULTS: dict = {
    "run": {
        "detector": "stmdnet",
        "top_k": 64,
    },
    "retina": {"sigma": 1.0, "radius": 2},
    "lamina": {"frac_order": 0.8, "memory": 10},
    "emd": {
        "delay_tau": 4,
        "offset": [-1, 0],
        "second_delay": 4,
        "second_offset": [-2, 0],
        "division_guard": 1e-3,
    },
    "estmd": {"tau": 4},
    "dstmd": {
        "directions": 8,
        "alpha_sep": 2.0,
        "tau1": 1,
        "tau3": 4,
        "delay_tau": 4,
    },
    "medulla": {
        "decay_g": 0.5,
        "inhib_gain": 2.0,
        "inhib_sigma": 3.0,
        "step_dt": 1.0,
        "excit_gain": 1.0,
        "ceiling": 1e6,
    },
    "ldfc": {"guard_eps": 1e-3, "noise_floor": 1e-3, "decode_radius": 1},
    "feedback": {"fb_gain": 1.0, "fb_delay": 1, "fb_sigma": 5.0},
    "matching": {
        "match_radius": 5.0,
        "nms_radius": 5.0,
        "threshold_count": 50,
        "fppi_max": 5.0,
        "top_k": 64,
    },
    "synth": {
        "width": 470,
        "height": 310,
        "frames": 300,
        "seed": 0,
        "bg_velocity": [0.25, 0.0],
        "bg_texture": "stripes",
        "target_size": [5.0, 5.0],
        "target_luminance": 0.1,
        "bg_mean_luminance": 0.55,
        "path": {"kind": "linear", "start": [40.0, 155.0], "velocity": [1.0, 0.0]},
        "base_rate_hz": 1000.0,
    },
}

ENV_PREFIX = "STMD_"


class ConfigError(ValueError):
    """A config file or override referenced an unknown or invalid key."""


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    for key, value in override.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {here} must be a mapping")
            _merge(base[key], value, here)
        else:
            base[key] = value
    return base


def load_config(path: str | None = None, environ: dict | None = None) -> dict:
    """Defaults, overlaid by the YAML file at ``path``, then by STMD_* vars."""
    cfg = default_config()
    if path is not None:
        with open(path) as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        _merge(cfg, loaded)
    _apply_env(cfg, os.environ if environ is None else environ)
    return cfg


def _apply_env(cfg: dict, environ: dict) -> None:
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX) :].lower()
        section = next(
            (s for s in sorted(cfg, key=len, reverse=True) if rest.startswith(s + "_")),
            None,
        )
        if section is None:
            raise ConfigError(f"environment override {name} matches no config section")
        key = rest[len(section) + 1 :]
        if key not in cfg[section]:
            raise ConfigError(f"environment override {name}: unknown key {section}.{key}")
        cfg[section][key] = yaml.safe_load(raw)


def config_hash(cfg: dict) -> str:
    """Stable 12-hex digest of the fully resolved config."""
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)


def synth_config_from(cfg: dict):
    """Build a SynthConfig from the ``synth`` section."""
    from .synth import CircularPath, LinearPath, SynthConfig

    section = dict(cfg["synth"])
    path_spec = section.pop("path")
    kind = path_spec.get("kind", "linear")
    if kind == "linear":
        path = LinearPath(
            start=tuple(float(v) for v in path_spec["start"]),
            velocity=tuple(float(v) for v in path_spec["velocity"]),
        )
    elif kind == "circular":
        path = CircularPath(
            center=tuple(float(v) for v in path_spec["center"]),
            radius=float(path_spec["radius"]),
            angular_speed=float(path_spec["angular_speed"]),
            phase=float(path_spec.get("phase", 0.0)),
        )
    else:
        raise ConfigError(f"unknown path kind {kind!r}")
    for key in ("bg_velocity", "target_size"):
        section[key] = tuple(float(v) for v in section[key])
    return SynthConfig(path=path, **section)
