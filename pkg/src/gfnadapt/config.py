"""Experiment configuration: sectioned YAML files, overrides, stable hashes.

Precedence is flag override > config file > built-in default. Two digests
are derived from the resolved config: the reward hash (fields that determine
the reward landscape, used to locate the shared reward cache) and the run
hash (everything except method and output directory, used for the output
layout). Every output file embeds the run hash.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .simulator import DEFAULT_TRUTH_KEY

DEFAULTS: dict = {
    "space": {
        "file": "builtin",
        "cycles": None,          # None = value from the space file
        "step_fraction": None,
    },
    "reward": {
        "beta": 4.0,
        "lambda": 0.25,
        "k_tail": 2,
        "lo_level": 0.05,
        "hi_level": 0.95,
        "warmup": 256,
    },
    "data": {
        "contexts_seed": 7,
        "noise_rel": 0.03,
        "days": 180,
        "truth_key": list(DEFAULT_TRUTH_KEY),
    },
    "train": {
        "steps": 1000,
        "batch": 16,
        "lr": 5e-4,
        "log_z_lr": 0.1,
        "explore_eps": 0.05,
        "hidden": [256, 256, 256],
        "n_samples": 5000,
        "budget": None,          # unique-simulation cap; None = unlimited
    },
    "baseline": {
        "budget": 2000,
        "gamma": 0.25,
        "n_candidates": 24,
        "startup": 10,
    },
    "run": {
        "method": "gflownet",
        "seeds": [1, 2, 3],
        "out_dir": "runs",
        "enum_cap": 100_000,
    },
}

# keys that do not affect produced numbers and are excluded from the run hash
_HASH_EXCLUDE = {("run", "out_dir"), ("run", "method")}

_REWARD_SECTIONS = ("space", "reward", "data")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    values: dict
    space_doc: dict | None = None  # resolved space definition, for hashing

    def __getitem__(self, dotted: str):
        node = self.values
        for part in dotted.split("."):
            node = node[part]
        return node

    def section(self, name: str) -> dict:
        return self.values[name]

    # -- hashes -------------------------------------------------------------

    def _canonical(self, sections) -> dict:
        doc = {}
        for sec in sections:
            doc[sec] = {
                k: v
                for k, v in self.values[sec].items()
                if (sec, k) not in _HASH_EXCLUDE
            }
        if self.space_doc is not None:
            doc["space_definition"] = self.space_doc
        return doc

    def run_hash(self) -> str:
        return _digest(self._canonical(sorted(self.values)))

    def reward_hash(self) -> str:
        return _digest(self._canonical(_REWARD_SECTIONS))

    def out_root(self) -> Path:
        return Path(self.values["run"]["out_dir"]) / self.run_hash()

    def cache_dir(self) -> Path:
        override = os.environ.get("GFNADAPT_CACHE_DIR")
        if override:
            return Path(override) / self.reward_hash()
        return Path(self.values["run"]["out_dir"]) / "cache" / self.reward_hash()


def _digest(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def parse_overrides(pairs: list[str]) -> dict:
    """Turn --set section.key=value pairs into a nested update dict."""
    update: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like section.key=value: {pair}")
        dotted, raw = pair.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key must be section.key: {dotted}")
        node = update.setdefault(parts[0], {})
        node[parts[1]] = yaml.safe_load(raw)
    return update


def load_config(path=None, overrides: list[str] | None = None) -> ExperimentConfig:
    values = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} is not a mapping")
        values = _merge(values, doc)
    if overrides:
        values = _merge(values, parse_overrides(overrides))
    cfg = ExperimentConfig(values=values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    method = v["run"]["method"]
    if method not in ("gflownet", "random", "tpe"):
        raise ConfigError(f"unknown method: {method}")
    if not v["run"]["seeds"]:
        raise ConfigError("seeds list must be non-empty")
    if v["data"]["noise_rel"] < 0:
        raise ConfigError("noise_rel must be >= 0")
    sf = v["space"]["step_fraction"]
    if sf is not None and not 0 < sf <= 1:
        raise ConfigError("step_fraction must be in (0, 1]")
    cyc = v["space"]["cycles"]
    if cyc is not None and cyc < 1:
        raise ConfigError("cycles must be >= 1")
