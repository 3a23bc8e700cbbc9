"""YAML configuration: defaults, validated overrides and the config hash."""
import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from numbers import Number

import yaml

from .errors import ConfigError
from .soliton import ModelParams

# run keys that cannot change any result
_HASH_EXCLUDE = ("threads",)


def load_defaults():
    text = resources.files("nlkg").joinpath("defaults.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base, over, path=""):
    if not isinstance(over, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(f"unknown key {where!r}")
        ref = base[key]
        if isinstance(ref, dict):
            out[key] = _merge(ref, val, where)
        else:
            out[key] = _check_leaf(ref, val, where)
    return out


def _is_num(v):
    return isinstance(v, Number) and not isinstance(v, bool)


def _check_leaf(ref, val, where):
    if ref is None or val is None:
        if val is not None and not _is_num(val):
            raise ConfigError(f"{where}: expected a number or null, got {val!r}")
        return val
    if _is_num(ref):
        if not _is_num(val):
            raise ConfigError(f"{where}: expected a number, got {val!r}")
        return val
    if isinstance(ref, list):
        if not isinstance(val, list):
            raise ConfigError(f"{where}: expected a list, got {val!r}")
        if ref and all(_is_num(r) for r in ref) and not all(_is_num(v) for v in val):
            raise ConfigError(f"{where}: expected a list of numbers")
        return val
    if not isinstance(val, type(ref)):
        raise ConfigError(f"{where}: expected {type(ref).__name__}, got {val!r}")
    return val


@dataclass(frozen=True)
class Config:
    data: dict

    @property
    def model(self):
        return self.data["model"]

    @property
    def constants(self):
        return self.data["constants"]

    @property
    def run(self):
        return self.data["run"]

    def exp(self, name):
        return self.data["experiments"][name]

    @property
    def params(self):
        return params_from(self.data)

    @property
    def hash(self):
        d = copy.deepcopy(self.data)
        for key in _HASH_EXCLUDE:
            d["run"].pop(key, None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def header(self):
        """Metadata embedded in every output file."""
        m = self.model
        return dict(p=m["p"], L=m["L"], N=m["N"], dt=m["dt"], constants=self.constants,
                    config_hash=self.hash)


def params_from(data):
    c = data["constants"]
    try:
        P = ModelParams(float(data["model"]["p"]), delta_E=c["delta_E"], delta_X=c["delta_X"],
                        C_star=c["C_star"], delta_star=c["delta_star"], R_star=c["R_star"],
                        eps_star=c["eps_star"], eps=c["eps"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if c["delta_trap"] is not None and abs(c["delta_trap"] - P.delta_trap) > 1e-15:
        raise ConfigError(f"delta_trap must equal 3 eps = {P.delta_trap}")
    return P


def _validate(data):
    m = data["model"]
    if not (m["L"] > 0 and m["N"] >= 16 and m["dt"] > 0 and m["T_max"] > 0):
        raise ConfigError("model: L, dt, T_max must be positive and N >= 16")
    if int(m["N"]) != m["N"]:
        raise ConfigError("model.N must be an integer")
    c = data["constants"]
    if not (0 < c["nu"] and 0 < c["tau_res"] and c["Lambda_max"] > 1):
        raise ConfigError("constants: nu, tau_res must be positive and Lambda_max > 1")
    if data["run"]["threads"] < 1 or data["run"]["horizon_scale"] <= 0:
        raise ConfigError("run: threads >= 1 and horizon_scale > 0 required")
    if int(data["run"]["seed"]) != data["run"]["seed"] or data["run"]["seed"] < 0:
        raise ConfigError("run.seed must be a non-negative integer")
    params_from(data)


def load_config(path=None, overrides=None):
    """Defaults, then the YAML file at ``path``, then ``overrides`` (same nesting).

    Raises
    ------
    ConfigError
        Unknown keys, wrong types, unreadable YAML or violated constant orderings.
    """
    data = load_defaults()
    if path is not None:
        try:
            with open(path) as fh:
                user = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        data = _merge(data, user)
    if overrides:
        data = _merge(data, overrides)
    _validate(data)
    return Config(data)
