"""Experiment configuration: one JSON document shared by every CLI command."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import jsonschema

from .dynamics import SCHEMES, ForcingPattern, GSNS, SimConfig, make_state
from .lattice import build_lattice

FORMAT_VERSION = "gsns-report/1"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_seed = {"type": "integer", "minimum": 0}
_mode = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "epsilon"],
    "properties": {
        "n": _int1,
        "epsilon": {"type": "number", "minimum": 0},
        "dt": {**_pos, "default": 1e-3},
        "t_final": {"type": "number", "minimum": 0, "default": 10.0},
        "seed": {**_seed, "default": 0},
        "seeds": {"type": "array", "items": _seed, "minItems": 1},
        "scheme": {"enum": sorted(SCHEMES), "default": "euler_maruyama"},
        "forcing": {
            "type": "array",
            "default": [],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["k", "e1", "e2"],
                "properties": {"k": _mode, "e1": _num, "e2": _num},
            },
        },
        "x0": {
            "default": "zero",
            "oneOf": [
                {"const": "zero"},
                {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["k"],
                        "properties": {"k": _mode, "q1": _num, "q2": _num},
                    },
                },
            ],
        },
        "lyapunov": {
            "type": "object",
            "default": {},
            "additionalProperties": False,
            "properties": {
                "p": {"type": ["integer", "null"], "minimum": 1, "default": None},
                "t_total": {**_pos, "default": 100.0},
                "reorth_every": {**_int1, "default": 10},
                "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1,
                            "default": 0.1},
                "n_batches": {"type": "integer", "minimum": 2, "default": 20},
                "frame": {"enum": ["identity", "random"], "default": "identity"},
            },
        },
        "stationary": {
            "type": "object",
            "default": {},
            "additionalProperties": False,
            "properties": {
                "burn_in": {"type": ["number", "null"], "minimum": 0, "default": None},
                "samples": {"type": "integer", "minimum": 1, "default": 1000},
                "thin": {**_int1, "default": 100},
                "n_batches": {"type": "integer", "minimum": 2, "default": 20},
            },
        },
        "horseshoe": {
            "type": "object",
            "default": {},
            "additionalProperties": False,
            "properties": {
                "radius": {"type": ["number", "null"], "exclusiveMinimum": 0, "default": None},
                "percentile": {"type": "number", "minimum": 0, "maximum": 100, "default": 30.0},
                "separation_factor": {"type": "number", "exclusiveMinimum": 2, "default": 4.0},
                "tau": {**_pos, "default": 1.0},
                "J": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0},
                      "default": None},
                "j_size": {"type": "integer", "minimum": 1, "maximum": 8, "default": 4},
                "min_spacing": {"type": ["integer", "null"], "minimum": 1, "default": None},
                "lyapunov_times": {**_pos, "default": 2.0},
                "horizon": {**_int1, "default": 60},
                "measure_samples": {"type": "integer", "minimum": 20, "default": 2000},
                "measure_burn_in": {"type": "number", "minimum": 0, "default": 1000.0},
                "measure_thin": {**_int1, "default": 100},
                "ensemble_size": {**_int1, "default": 5000},
                "ensemble_thin": {**_int1, "default": 50},
                "ball_seed": {**_seed, "default": 0},
                "n_starts": {**_int1, "default": 64},
                "max_iter": {**_int1, "default": 500},
                "tol": {**_pos, "default": 1e-10},
                "method": {"enum": ["nelder-mead", "gradient"], "default": "nelder-mead"},
                "margin": {"type": "number", "minimum": 0, "exclusiveMaximum": 1,
                           "default": 0.01},
                "retries": {"type": "integer", "minimum": 0, "default": 0},
            },
        },
    },
}


class ConfigError(ValueError):
    """Schema or semantic violation; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path
        self.message = message


def _format_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _fill_defaults(node: dict, schema: dict) -> None:
    for key, sub in schema.get("properties", {}).items():
        if key not in node and "default" in sub:
            node[key] = copy.deepcopy(sub["default"])
        if isinstance(node.get(key), dict) and "properties" in sub:
            _fill_defaults(node[key], sub)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration; ``data`` is the canonical dictionary."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical.encode()).hexdigest()

    @property
    def forcing(self) -> dict:
        return {tuple(f["k"]): (f["e1"], f["e2"]) for f in self.data["forcing"]}

    @property
    def seeds(self) -> list[int]:
        return list(self.data["seeds"])

    def sim_config(self) -> SimConfig:
        return SimConfig(self.data["epsilon"], self.data["dt"], self.data["scheme"])

    def model(self) -> GSNS:
        return GSNS(self.data["n"], self.sim_config(), self.forcing)

    def initial_state(self, model: GSNS):
        x0 = self.data["x0"]
        if x0 == "zero":
            return make_state(model.lattice, "zero")
        amps = {tuple(e["k"]): (e.get("q1", 0.0), e.get("q2", 0.0)) for e in x0}
        return make_state(model.lattice, amps)

    def header(self) -> dict:
        return {"format_version": FORMAT_VERSION, "config_hash": self.config_hash,
                "config": self.data}


def parse_config(text: str | bytes) -> ExperimentConfig:
    """Parse, validate and resolve a JSON configuration document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON: {exc}") from None
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_format_path(err.absolute_path), err.message)
    _fill_defaults(data, SCHEMA)
    data.setdefault("seeds", [data["seed"]])

    lattice = build_lattice(data["n"])
    seen = set()
    for i, entry in enumerate(data["forcing"]):
        k = tuple(entry["k"])
        where = f"forcing[{i}]"
        if k in seen:
            raise ConfigError(where + ".k", f"duplicate forcing mode {list(k)}")
        seen.add(k)
        if k not in lattice:
            raise ConfigError(where + ".k", f"mode {list(k)} is not in the truncated lattice")
        if (entry["e1"] * entry["e2"] == 0) != (entry["e1"] == 0 and entry["e2"] == 0):
            raise ConfigError(where, "e1*e2 = 0 must hold exactly when e1 = e2 = 0")
    if data["x0"] != "zero":
        for i, entry in enumerate(data["x0"]):
            if tuple(entry["k"]) not in lattice:
                raise ConfigError(f"x0[{i}].k", f"mode {entry['k']} is not in the truncated lattice")
    p = data["lyapunov"]["p"]
    if p is not None and p > lattice.d:
        raise ConfigError("lyapunov.p", f"p = {p} exceeds the state dimension {lattice.d}")
    J = data["horseshoe"]["J"]
    if J is not None and any(b <= a for a, b in zip(J, J[1:])):
        raise ConfigError("horseshoe.J", "J must be strictly increasing")
    try:
        ForcingPattern.from_modes(lattice, {tuple(f["k"]): (f["e1"], f["e2"])
                                            for f in data["forcing"]})
    except ValueError as exc:
        raise ConfigError("forcing", str(exc)) from None
    return ExperimentConfig(data)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read())
