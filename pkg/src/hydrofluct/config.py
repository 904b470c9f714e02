"""Run configuration: a versioned JSON schema, fail-closed validation, and
constructors for the model objects.

Unknown keys anywhere in the file are errors.  Reservoir sides take either
an explicit chemical potential or a target pressure (the chemical potential
is then solved from the equation of state at load time); exactly one of
the two must be given.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import json
import jsonschema
import numpy as np

from .eos import EquationOfState, IdealGasEos, thermo_tables
from .grid import Grid
from .model import BoundarySpec, HydroModel, Insulated, Reservoir
from .transport import TransportCoeffs, power_law_transport

_RESERVOIR = {
    "type": "object",
    "properties": {
        "kind": {"const": "reservoir"},
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "mu": {"type": "number"},
        "pressure": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind", "beta"],
    "additionalProperties": False,
    "oneOf": [{"required": ["mu"]}, {"required": ["pressure"]}],
}
_INSULATED = {
    "type": "object",
    "properties": {"kind": {"const": "insulated"}},
    "required": ["kind"],
    "additionalProperties": False,
}
_SIDE = {"oneOf": [_RESERVOIR, _INSULATED]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "version": {"const": 1},
        "geometry": {
            "type": "object",
            "properties": {
                "shape": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 4},
                    "minItems": 1,
                    "maxItems": 2,
                }
            },
            "required": ["shape"],
            "additionalProperties": False,
        },
        "eos": {
            "type": "object",
            "properties": {
                "cv": {"type": "number", "exclusiveMinimum": 0},
                "s_ref": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "transport": {
            "type": "object",
            "properties": {
                "kappa0": {"type": "number", "exclusiveMinimum": 0},
                "kappa_exponent": {"type": "number"},
                "gamma1": {"type": "number", "minimum": 0},
                "gamma2": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "boundary": {
            "type": "object",
            "properties": {
                "left": _SIDE,
                "right": _SIDE,
                "bottom": _SIDE,
                "top": _SIDE,
            },
            "required": ["left", "right"],
            "additionalProperties": False,
        },
        "stabilization": {"type": "number", "minimum": 0},
        "steady": {
            "type": "object",
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "process": {
            "type": "object",
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "n_steps": {"type": "integer", "minimum": 1},
                "n_traj": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "init": {"enum": ["stationary", "zero"]},
                "burn_in_steps": {"type": "integer", "minimum": 0},
                "sample_stride": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "analysis": {
            "type": "object",
            "properties": {
                "bump_width": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "component_pair": {
                    "type": "array",
                    "items": {"enum": ["e", "rho", "j1", "j2"]},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "min_separation_widths": {"type": "number", "exclusiveMinimum": 0},
                "condition_tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "required": ["version", "geometry", "boundary"],
    "additionalProperties": False,
}

_DEFAULTS = {
    "eos": {"cv": 1.5, "s_ref": 0.0},
    "transport": {"kappa0": 0.5, "kappa_exponent": 1.0, "gamma1": 0.0, "gamma2": 0.2},
    "stabilization": 1.0,
    "steady": {"tol": 1e-10, "max_iter": 50},
    "process": {
        "dt": 1.5e-4,
        "n_steps": 120000,
        "n_traj": 200,
        "seed": 1234,
        "init": "stationary",
        "burn_in_steps": 0,
        "sample_stride": 250,
    },
    "analysis": {
        "bump_width": None,
        "component_pair": ["e", "e"],
        "min_separation_widths": 4.0,
        "condition_tol": 1e-8,
    },
}

_SIDE_KEYS = {"left": (0, 0), "right": (0, 1), "bottom": (1, 0), "top": (1, 1)}


class ConfigError(ValueError):
    pass


def _merge_defaults(raw: dict) -> dict:
    out = {k: v for k, v in raw.items()}
    for key, defaults in _DEFAULTS.items():
        if isinstance(defaults, dict):
            section = dict(defaults)
            section.update(out.get(key, {}))
            out[key] = section
        else:
            out.setdefault(key, defaults)
    return out


def mu_for_pressure(eos: EquationOfState, beta: float, pressure: float) -> float:
    """Solve p(beta, mu) = pressure for mu by Newton (dp/dmu = rho0 > 0)."""
    mu = 0.0
    for _ in range(100):
        tab = thermo_tables(eos, np.asarray([beta]), np.asarray([mu]))
        f = float(tab.p[0]) - pressure
        if abs(f) < 1e-13 * max(1.0, pressure):
            return mu
        mu -= f / float(tab.p_mu[0])
    raise ConfigError(f"could not solve mu for beta={beta}, pressure={pressure}")


@dataclass
class RunConfig:
    resolved: dict

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        try:
            jsonschema.validate(raw, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config validation failed: {exc.message}") from exc
        resolved = _merge_defaults(raw)
        d = len(resolved["geometry"]["shape"])
        needed = {"left", "right"} | ({"bottom", "top"} if d == 2 else set())
        given = set(resolved["boundary"].keys())
        if given != needed:
            raise ConfigError(
                f"boundary sides must be exactly {sorted(needed)} for d={d}, got {sorted(given)}"
            )
        return RunConfig(resolved=resolved)

    @staticmethod
    def from_file(path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return RunConfig.from_dict(raw)

    # -- constructors -------------------------------------------------------

    def grid(self) -> Grid:
        return Grid(tuple(self.resolved["geometry"]["shape"]))

    def eos(self) -> IdealGasEos:
        e = self.resolved["eos"]
        return IdealGasEos(cv=e["cv"], s_ref=e["s_ref"])

    def transport(self) -> TransportCoeffs:
        t = self.resolved["transport"]
        return power_law_transport(
            kappa0=t["kappa0"],
            kappa_exponent=t["kappa_exponent"],
            gamma1=t["gamma1"],
            gamma2=t["gamma2"],
        )

    def boundary(self, eos: EquationOfState) -> BoundarySpec:
        sides = {}
        for name, spec in self.resolved["boundary"].items():
            key = _SIDE_KEYS[name]
            if spec["kind"] == "insulated":
                sides[key] = Insulated()
            else:
                mu = spec.get("mu")
                if mu is None:
                    mu = mu_for_pressure(eos, spec["beta"], spec["pressure"])
                sides[key] = Reservoir(beta=spec["beta"], mu=float(mu))
        return BoundarySpec(sides)

    def model(self) -> HydroModel:
        eos = self.eos()
        return HydroModel(
            self.grid(),
            eos,
            self.transport(),
            self.boundary(eos),
            stabilization=self.resolved["stabilization"],
        )

    @property
    def steady_opts(self) -> dict:
        return self.resolved["steady"]

    @property
    def process_opts(self) -> dict:
        return self.resolved["process"]

    @property
    def analysis_opts(self) -> dict:
        return self.resolved["analysis"]
