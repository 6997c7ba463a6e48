"""Experiment configuration: strict INI-style files.

Unknown sections or keys are fatal (experiment provenance stays
trustworthy); every value is typed and defaulted here, and the parsed
configuration echoes back into every output file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigError

# section -> key -> (type tag, default); None default means required when the
# section is used by a command
_SCHEMA = {
    "surface": {"file": ("str", None)},
    "grid": {"m": ("int", 27)},
    "eigen": {"k": ("int", 40), "tol": ("float", 1e-9), "seed": ("int", 1)},
    "solve": {
        "theta": ("float", 0.0),
        "sigma": ("float", 0.0),
        "twist_mode": ("str", "raw"),
        "method": ("str", "lsq"),
        "lsq_tol": ("float", 1e-12),
        "rank_tol": ("float", 1e-8),
        "r": ("float", 1.0),
        "s": ("float", 0.0),
        "obstruction": ("str", "full"),
    },
    "scan": {
        "theta_count": ("int", 64),
        "sigma": ("float", 0.0),
        "p_values": ("floats", (0.6,)),
        "obstruction": ("str", "mean_only"),
    },
    "data": {
        "kind": ("str", "mode"),
        "k": ("int", 1),
        "l": ("int", 0),
        "seed": ("int", 7),
        "kmax": ("int", 3),
        "n_modes": ("int", 8),
        "re": ("float", 1.0),
        "im": ("float", 0.0),
    },
    "beurling": {
        "sigma": ("float", 1.0),
        "sigma_grid": ("floats", ()),
        "j_seed": ("int", 0),
        "alpha": ("float", 0.5),
        "radial_samples": ("int", 10),
        "theta_count": ("int", 64),
        "probe_seed": ("int", 11),
    },
    "product": {
        "c": ("float", 0.37),
        "n_max": ("int", 8),
        "mode_n": ("int", 1),
        "theta": ("float", 0.83),
        "chi_center": ("float", 0.5),
        "chi_width": ("float", 0.25),
        "phi0": ("float", 0.0),
        "sample_seed": ("int", 5),
        "n_samples": ("int", 8),
        "m_list": ("ints", ()),
        "n_list": ("ints", ()),
    },
    "output": {"dir": ("str", "out")},
}


def _convert(section, key, tag, raw):
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "floats":
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
        if tag == "ints":
            return tuple(int(tok) for tok in raw.replace(",", " ").split())
        return str(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {tag}") from None


@dataclass
class ExperimentConfig:
    """Typed view of a parsed configuration file."""

    values: dict
    path: str | None = None
    overrides: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.values[section]

    def get(self, section, key):
        return self.values[section][key]

    def echo(self):
        """Flat, json-friendly copy for embedding into outputs."""
        return {sec: dict(kv) for sec, kv in self.values.items()}


def parse_config(path):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")
            tag, _ = _SCHEMA[section][key]
            values[section][key] = _convert(section, key, tag, raw)
    for section, keys in _SCHEMA.items():
        values.setdefault(section, {})
        for key, (tag, default) in keys.items():
            values[section].setdefault(key, default)
    return ExperimentConfig(values=values, path=str(path))


def require(cfg: ExperimentConfig, section, key):
    val = cfg.get(section, key)
    if val is None:
        raise ConfigError(f"config is missing required key {key!r} in section [{section}]")
    return val
