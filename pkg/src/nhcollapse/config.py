"""Experiment configuration: JSON documents with dotted-key overrides.

A configuration is a nested JSON object.  Every key has a default (see
:data:`DEFAULTS`); unknown keys are rejected and values are checked
against the invariants of the objects they build before anything runs.
"""

from __future__ import annotations

import copy
import difflib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .collapse import MeasurementSetup, born_state
from .dynamics import IntegratorConfig, StateVector
from .errors import MalformedConfigError, MissingConfigError, RangeError, UnknownKeyError
from .ham_models import SIGMA_X, GainLossModel, LoopSpec, Normalization, Orientation, PulseShape

EXPERIMENTS = ("pulse-collapse", "encircle", "calibrate", "born-stats", "surface", "ep-locate")

DEFAULTS: dict[str, Any] = {
    "experiment": "pulse-collapse",
    "gamma0": 1.0,
    "Gamma": 15.0,
    "pulse": {"center": 5.0, "sigma": 1.0, "normalization": "unit_area", "amplitude": 1.0},
    "loop": {
        "center_re": 0.0,
        "center_im": 1.0,
        "radius_major": 0.5,
        "radius_minor": 0.5,
        "orientation": "ccw",
        "start_phase": -math.pi / 2,
        "period": 60.0,
    },
    "window": {"t0": 0.0, "t1": 10.0},
    "integrator": {"dt": 0.01, "renormalize": True, "record_stride": 1},
    "trials": {"n_trials": 1000, "base_seed": 0, "dominance_threshold": 0.99, "born_target": 0.5},
    # null: experiment default; otherwise a list of numbers or [re, im] pairs
    "psi0": None,
    "surface": {"re_min": -1.0, "re_max": 1.0, "im_min": 0.0, "im_max": 2.0, "resolution": 65},
    "ep": {"guess_re": 0.0, "guess_im": 0.9},
    "output": {"dir": "out"},
}

_CHOICES = {
    "experiment": EXPERIMENTS,
    "pulse.normalization": tuple(n.value for n in Normalization),
    "loop.orientation": tuple(o.value for o in Orientation),
}


def _leaf_paths(d: dict, prefix: str = "") -> list[str]:
    out = []
    for k, v in d.items():
        p = f"{prefix}{k}"
        out.extend(_leaf_paths(v, p + ".") if isinstance(v, dict) else [p])
    return out


_ALL_KEYS = _leaf_paths(DEFAULTS)


def _suggest(path: str, siblings: Iterable[str]) -> str | None:
    leaf = path.rsplit(".", 1)[-1]
    near = difflib.get_close_matches(leaf, list(siblings), n=1, cutoff=0.6)
    if near:
        return path.rsplit(".", 1)[0] + "." + near[0] if "." in path else near[0]
    leaves = {p.rsplit(".", 1)[-1]: p for p in _ALL_KEYS}
    near = difflib.get_close_matches(leaf, list(leaves), n=1, cutoff=0.6)
    return leaves[near[0]] if near else None


def _coerce(path: str, default, value):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise RangeError(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise RangeError(path, f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise RangeError(path, f"expected a finite number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise RangeError(path, f"expected a string, got {value!r}")
        choices = _CHOICES.get(path)
        if choices and value not in choices:
            raise RangeError(path, f"must be one of {', '.join(choices)}; got {value!r}")
        return value
    return value


def _merge(base: dict, update: dict, prefix: str = "") -> None:
    for key, value in update.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise UnknownKeyError(path, _suggest(path, base.keys()))
        default = _default_at(path)
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise RangeError(path, "expected an object")
            _merge(base[key], value, path + ".")
        elif path == "psi0":
            base[key] = _check_psi0(value)
        else:
            base[key] = _coerce(path, default, value)


def _default_at(path: str):
    node: Any = DEFAULTS
    for part in path.split("."):
        node = node[part]
    return node


def _check_psi0(value):
    if value is None:
        return None
    if not isinstance(value, list) or len(value) != 2:
        raise RangeError("psi0", "expected a list of 2 amplitudes")
    out = []
    for a in value:
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            out.append([float(a), 0.0])
        elif isinstance(a, list) and len(a) == 2 and all(isinstance(x, (int, float)) for x in a):
            out.append([float(a[0]), float(a[1])])
        else:
            raise RangeError("psi0", f"amplitude {a!r} is neither a number nor [re, im]")
    if not any(x or y for x, y in out):
        raise RangeError("psi0", "state must be nonzero")
    return out


def _parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise MalformedConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _nest(path: str, value) -> dict:
    out: dict = {}
    node = out
    parts = path.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return out


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Fully resolved configuration (every key present)."""

    values: dict

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values

    def __getitem__(self, path: str):
        node: Any = self.values
        for part in path.split("."):
            node = node[part]
        return node

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)

    def to_json(self) -> str:
        return json.dumps(self.values, indent=2, sort_keys=True)

    # -- builders ------------------------------------------------------

    def pulse(self) -> PulseShape:
        p = self.values["pulse"]
        return PulseShape(p["center"], p["sigma"], Normalization(p["normalization"]), p["amplitude"])

    def gain_loss_model(self) -> GainLossModel:
        return GainLossModel(self["gamma0"], self["Gamma"], self.pulse())

    def loop(self) -> LoopSpec:
        lp = self.values["loop"]
        return LoopSpec(
            complex(lp["center_re"], lp["center_im"]),
            lp["radius_major"],
            lp["radius_minor"],
            Orientation(lp["orientation"]),
            lp["start_phase"],
            lp["period"],
        )

    def integrator(self) -> IntegratorConfig:
        i = self.values["integrator"]
        return IntegratorConfig(i["dt"], i["renormalize"], i["record_stride"])

    def window(self) -> tuple[float, float]:
        t0, t1 = self["window.t0"], self["window.t1"]
        if not t1 > t0:
            raise RangeError("window.t1", f"must exceed window.t0 ({t0}), got {t1}")
        return t0, t1

    def psi0(self) -> StateVector:
        raw = self.values["psi0"]
        if raw is not None:
            return StateVector(np.array([complex(re, im) for re, im in raw]))
        exp = self.experiment
        if exp == "pulse-collapse":
            return StateVector(np.array([1.0, 1.0]) / math.sqrt(2.0))
        if exp == "born-stats":
            return StateVector(born_state(self["gamma0"] * SIGMA_X, self["trials.born_target"]))
        return StateVector([1.0, 0.0])

    def setup(self) -> MeasurementSetup:
        return MeasurementSetup(
            self["gamma0"], self.loop(), self.psi0(), self["trials.dominance_threshold"], self.integrator()
        )

    def validate(self) -> ExperimentConfig:
        self.gain_loss_model()
        self.loop()
        self.integrator()
        self.window()
        self.psi0()
        self.setup()
        if self["trials.n_trials"] < 1:
            raise RangeError("trials.n_trials", "must be >= 1")
        if self["surface.resolution"] < 16:
            raise RangeError("surface.resolution", "must be >= 16")
        if not (self["surface.re_max"] > self["surface.re_min"]):
            raise RangeError("surface.re_max", "must exceed surface.re_min")
        if not (self["surface.im_max"] > self["surface.im_min"]):
            raise RangeError("surface.im_max", "must exceed surface.im_min")
        return self


def load_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise MissingConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedConfigError(f"{p}: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedConfigError(f"{p}: top level must be a JSON object")
    return data


def parse_config(
    source=None,
    overrides: Iterable[str] = (),
    experiment: str | None = None,
    updates: dict | None = None,
) -> ExperimentConfig:
    """Resolve a configuration.

    ``source`` is a path to a JSON file, an already-loaded dict, or None.
    ``overrides`` are ``key=value`` strings with dotted keys; values are
    parsed as JSON when possible (so ``n_trials=4096`` is an integer) and
    otherwise kept as strings.  A bare leaf name such as ``n_trials`` is
    accepted when it is unique.  ``updates`` is a nested dict merged last.
    """
    values = copy.deepcopy(DEFAULTS)
    if source is not None:
        data = source if isinstance(source, dict) else load_json(source)
        _merge(values, data)
    if experiment is not None:
        _merge(values, {"experiment": experiment})
    for item in overrides:
        key, value = _parse_override(item)
        if key not in _ALL_KEYS:
            matches = [p for p in _ALL_KEYS if p.rsplit(".", 1)[-1] == key]
            if len(matches) == 1:
                key = matches[0]
        _merge(values, _nest(key, value))
    if updates:
        _merge(values, updates)
    return ExperimentConfig(values).validate()
