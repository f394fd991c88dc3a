#!/usr/bin/env python3

############################################################################
#                                                                          #
#  GradFlow - Gradient flow maximal function toolkit                       #
#  Copyright (C) 2026  GradFlow developers                                 #
#                                                                          #
#  This program is free software: you can redistribute it and/or modify    #
#  it under the terms of the GNU General Public License as published by    #
#  the Free Software Foundation, either version 3 of the License, or       #
#  (at your option) any later version.                                     #
#                                                                          #
#  This program is distributed in the hope that it will be useful,         #
#  but WITHOUT ANY WARRANTY; without even the implied warranty of          #
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the           #
#  GNU General Public License for more details.                            #
#                                                                          #
#  You should have received a copy of the GNU General Public License       #
#  along with this program.  If not, see <https://www.gnu.org/licenses/>.  #
#                                                                          #
############################################################################



import copy
import re

import loguru
import toml

from gf_coefficients import CoefficientField
from gf_energy import PPowerKernel, QuadraticKernel
from gf_ensemble import CHECKS, COEFFICIENTS, GENERATORS, SOURCES, Ensemble
from gf_errors import ParseError, ValidationError
from gf_grid import BOUNDARIES, Grid
from gf_pflow import ProximalConfig
from gf_timegrid import TimeGrid

logger = loguru.logger.bind(stage="config")

COMMANDS = ("run-flow", "verify", "kernel-check", "sweep")
KINDS = ("ppower", "quadratic")
FORMATS = ("csv", "json")

NUMBER_LISTS = {("ensemble", "p_values")}
LAYOUT = re.compile(r"(?P<dim>[12])x(?P<n>[1-9][0-9]*)")

DEFAULTS = {
    "grid": {"dim": 1, "n": 128, "h": 0.0625, "boundary": "dirichlet"},
    "kernel": {"kind": "ppower", "p": 4.0, "lambda": 1.0, "coefficients": "identity", "coefficient_file": ""},
    "time": {"t_min": 1e-4, "ratio": 1.25, "t_max": 10.0},
    "solver": {
        "newton_tol": 1e-10,
        "max_newton_iters": 100,
        "damping": 0.5,
        "delta": 1e-12,
        "spectral_cap": 4096,
        "detachment_tol": 1e-8,
        "rel_tol": 1e-6,
    },
    "ensemble": {
        "seed": 0,
        "count": 10,
        "generator": "bumps",
        "source": "pflow",
        "checks": ["contraction"],
        "p_values": [],
        "grids": [],
        "sources": [],
        "coefficient_kinds": [],
    },
    "output": {"directory": "gradflow-out", "formats": ["csv", "json"]},
}

PRESETS = {
    "theorem1-smoke": {
        "grid": {"n": 32},
        "time": {"t_max": 1.0},
        "ensemble": {"count": 5, "checks": ["contraction", "energy-ledger", "positivity"]},
    },
    "theorem2-smoke": {
        "grid": {"n": 32},
        "kernel": {"kind": "quadratic", "lambda": 10.0, "coefficients": "checkerboard"},
        "ensemble": {"count": 5, "source": "heat", "checks": ["contraction", "dissipation"]},
    },
    "kernel-identity": {
        "grid": {"n": 32, "boundary": "periodic"},
        "kernel": {"kind": "quadratic", "coefficients": "identity"},
    },
    "finite-speed": {
        "grid": {"n": 160},
        "time": {"t_max": 1.0},
        "ensemble": {"count": 1, "checks": ["finite-speed"]},
    },
    "default-ensemble": {
        "ensemble": {
            "count": 200,
            "grids": ["1x64", "1x128", "2x32"],
            "p_values": [2.5, 3.0, 4.0],
            "checks": ["contraction", "energy-ledger", "positivity", "order"],
        },
    },
    "semigroup-ensemble": {
        "kernel": {"kind": "quadratic", "lambda": 10.0},
        "ensemble": {
            "count": 40,
            "grids": ["1x128", "2x64"],
            "sources": ["heat", "poisson"],
            "coefficient_kinds": ["identity", "checkerboard", "random-spd"],
            "checks": ["contraction", "subharmonicity"],
        },
    },
}


class RunConfig:
    """ Validated run settings, one dictionary per configuration section """

    def __init__(self, command, sections):
        """ Class constructor """

        self.command = command
        self.sections = sections

    def __repr__(self):
        return f"RunConfig(command={self.command!r})"

    def __eq__(self, other):
        return isinstance(other, RunConfig) and (self.command, self.sections) == (other.command, other.sections)

    def __getitem__(self, section):
        return self.sections[section]

    def to_toml(self):
        return toml.dumps(self.sections)

    def grid(self):
        grid = self["grid"]
        return Grid((grid["n"],) * grid["dim"], grid["h"], grid["boundary"])

    def timegrid(self):
        return TimeGrid.geometric(self["time"]["t_min"], self["time"]["ratio"], self["time"]["t_max"])

    def proximal(self):
        solver = self["solver"]
        return ProximalConfig(solver["newton_tol"], solver["max_newton_iters"], solver["damping"], solver["delta"])

    def coefficient_kind(self):
        kernel = self["kernel"]
        return "file" if kernel["coefficient_file"] else kernel["coefficients"]

    def coefficients(self, grid, rng):
        kernel = self["kernel"]
        kind = self.coefficient_kind()

        if kind == "identity":
            return CoefficientField.identity(grid)
        if kind == "checkerboard":
            return CoefficientField.checkerboard(grid, kernel["lambda"])
        if kind == "random-spd":
            return CoefficientField.random_spd(grid, kernel["lambda"], rng)
        return CoefficientField.load(grid, kernel["coefficient_file"], kernel["lambda"])

    def kernel(self, grid, rng):
        if self["kernel"]["kind"] == "ppower":
            return PPowerKernel(self["kernel"]["p"])
        return QuadraticKernel(self.coefficients(grid, rng))

    def ensemble(self, source=None):
        grid, kernel, time, solver, ensemble = (self[_] for _ in ("grid", "kernel", "time", "solver", "ensemble"))

        return Ensemble(
            seed=ensemble["seed"],
            count=ensemble["count"],
            generator=ensemble["generator"],
            source=source or ensemble["source"],
            dim=grid["dim"],
            n=grid["n"],
            h=grid["h"],
            boundary=grid["boundary"],
            p_values=tuple(ensemble["p_values"] or [kernel["p"]]),
            ellipticity=kernel["lambda"],
            coefficients=self.coefficient_kind(),
            coefficient_file=kernel["coefficient_file"],
            t_min=time["t_min"],
            ratio=time["ratio"],
            t_max=time["t_max"],
            proximal=self.proximal(),
            detachment_tol=solver["detachment_tol"],
            rel_tol=solver["rel_tol"],
            spectral_cap=solver["spectral_cap"],
            grids=tuple(parse_layout(_) for _ in ensemble["grids"]),
            sources=() if source else tuple(ensemble["sources"]),
            coefficient_kinds=tuple(ensemble["coefficient_kinds"]),
        )


def parse_layout(text):
    """ Grid layout "DxN", for example "2x32", as the pair (dim, n) """

    match = LAYOUT.fullmatch(text.strip())

    if match is None:
        raise ValidationError(f"grid layout must look like 1x64 or 2x32, got {text!r}")

    return int(match["dim"]), int(match["n"])


def _merge(sections, overrides, context):
    """ Overlay overrides onto sections, unknown sections and keys are ParseErrors """

    for section, values in overrides.items():
        if section not in DEFAULTS:
            raise ParseError(f"unknown section [{section}]", context)

        if not isinstance(values, dict):
            raise ParseError(f"[{section}] must be a table", context)

        for key, value in values.items():
            if key not in DEFAULTS[section]:
                raise ParseError(f"unknown key {key!r} in [{section}]", context)

            sections[section][key] = _coerce(section, key, value, f"{context} [{section}] {key}")

    return sections


def _coerce(section, key, value, context):
    """ Bring a file or flag value to the type of its default, lists also accept comma separated text """

    default = DEFAULTS[section][key]

    try:
        if isinstance(default, list):
            items = value.split(",") if isinstance(value, str) else list(value)
            items = [str(_).strip() for _ in items if str(_).strip()]
            return [float(_) for _ in items] if (section, key) in NUMBER_LISTS else items
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"{value} is not an integer")
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)

    except (TypeError, ValueError) as error:
        raise ParseError(f"cannot read {value!r}: {error}", context) from error


def read_file(path):
    """ Parse a TOML configuration file into plain dictionaries """

    try:
        with open(path, encoding="utf-8") as stream:
            return toml.load(stream)

    except toml.TomlDecodeError as error:
        raise ParseError(f"line {error.lineno}: {error.msg}", str(path)) from error

    except OSError as error:
        raise ParseError(f"cannot open configuration: {error.strerror}", str(path)) from error


def parse_config(path=None, flags=None, preset=None, command="verify"):
    """ Effective configuration, flags over file over preset over defaults """

    if command not in COMMANDS:
        raise ParseError(f"unknown command {command!r}", "command")

    sections = copy.deepcopy(DEFAULTS)

    if preset is not None:
        if preset not in PRESETS:
            raise ParseError(f"unknown preset {preset!r}, expected one of {sorted(PRESETS)}", "--preset")
        _merge(sections, PRESETS[preset], f"preset {preset}")

    if path is not None:
        _merge(sections, read_file(path), str(path))

    for (section, key), value in (flags or {}).items():
        if value is not None:
            _merge(sections, {section: {key: value}}, f"--{section}-{key.replace('_', '-')}")

    config = RunConfig(command, sections)
    validate(config)
    logger.debug(f"Effective configuration for {command}: {sections}")
    return config


def _require(condition, message):
    if not condition:
        raise ValidationError(message)


def validate(config):
    """ Raise ValidationError naming the first violated invariant """

    grid, kernel, time, solver, ensemble, output = (config[_] for _ in ("grid", "kernel", "time", "solver", "ensemble", "output"))

    _require(grid["dim"] in {1, 2}, f"grid dim must be 1 or 2, got {grid['dim']}")
    _require(grid["n"] >= (2 if grid["boundary"] == "periodic" else 1), f"grid n too small for {grid['boundary']} boundary, got {grid['n']}")
    _require(grid["h"] > 0, f"grid h must be positive, got {grid['h']}")
    _require(grid["boundary"] in BOUNDARIES, f"grid boundary must be one of {sorted(BOUNDARIES)}, got {grid['boundary']!r}")

    _require(kernel["kind"] in KINDS, f"kernel kind must be one of {KINDS}, got {kernel['kind']!r}")
    sources = ensemble["sources"] or [ensemble["source"]]
    flow = (config.command == "run-flow" and kernel["kind"] == "ppower") or (config.command == "verify" and "pflow" in sources) or config.command == "sweep"
    for p in [kernel["p"]] + list(ensemble["p_values"]):
        _require(not flow or p > 2, f"p must exceed 2 for PPower flows, got {p:g}")
    _require(kernel["lambda"] >= 1, f"lambda must be at least 1, got {kernel['lambda']:g}")
    _require(kernel["coefficients"] in COEFFICIENTS, f"kernel coefficients must be one of {COEFFICIENTS}, got {kernel['coefficients']!r}")

    _require(time["t_min"] > 0, f"t_min must be positive, got {time['t_min']:g}")
    _require(time["ratio"] > 1, f"ratio must exceed 1, got {time['ratio']:g}")
    _require(time["t_max"] >= time["t_min"], f"t_max must be at least t_min, got {time['t_max']:g}")

    _require(solver["newton_tol"] > 0, f"newton_tol must be positive, got {solver['newton_tol']:g}")
    _require(solver["max_newton_iters"] >= 1, f"max_newton_iters must be at least 1, got {solver['max_newton_iters']}")
    _require(0 < solver["damping"] <= 1, f"damping must lie in (0, 1], got {solver['damping']:g}")
    _require(solver["delta"] >= 0, f"delta must be nonnegative, got {solver['delta']:g}")
    _require(solver["spectral_cap"] >= 1, f"spectral_cap must be at least 1, got {solver['spectral_cap']}")
    _require(solver["detachment_tol"] >= 0, f"detachment_tol must be nonnegative, got {solver['detachment_tol']:g}")
    _require(solver["rel_tol"] >= 0, f"rel_tol must be nonnegative, got {solver['rel_tol']:g}")

    _require(ensemble["count"] >= 0, f"ensemble count must be nonnegative, got {ensemble['count']}")
    _require(ensemble["generator"] in GENERATORS, f"ensemble generator must be one of {GENERATORS}, got {ensemble['generator']!r}")
    _require(ensemble["source"] in SOURCES, f"ensemble source must be one of {SOURCES}, got {ensemble['source']!r}")
    _require(set(ensemble["checks"]) <= set(CHECKS), f"ensemble checks must be a subset of {sorted(CHECKS)}, got {ensemble['checks']}")
    _require(set(ensemble["sources"]) <= set(SOURCES), f"ensemble sources must be a subset of {SOURCES}, got {ensemble['sources']}")
    _require(
        set(ensemble["coefficient_kinds"]) <= set(COEFFICIENTS),
        f"ensemble coefficient_kinds must be a subset of {COEFFICIENTS}, got {ensemble['coefficient_kinds']}",
    )
    for layout in ensemble["grids"]:
        parse_layout(layout)

    _require(set(output["formats"]) <= set(FORMATS), f"output formats must be a subset of {FORMATS}, got {output['formats']}")
    _require(bool(output["directory"]), "output directory must not be empty")
