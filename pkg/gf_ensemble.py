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


import asyncio
import os
import time
from dataclasses import dataclass, field

import loguru
import numpy as np

from gf_coefficients import CoefficientField
from gf_energy import PPowerKernel, QuadraticKernel, RegionMask
from gf_errors import GradflowError
from gf_grid import DIRICHLET_ZERO, Grid, GridFunction
from gf_maximal import ALL_PAIRS_CAP, HEAT, PFLOW, POISSON, HeatExtension, PFlowExtension, PoissonExtension, detachment_set, hajlasz_bound, vertical_max
from gf_operator import SPECTRAL_CAP, assemble
from gf_pflow import ProximalConfig
from gf_pflow_checks import check_finite_speed, check_order_preservation, check_positivity
from gf_report import CheckReport
from gf_timegrid import RATIO, T_MAX, T_MIN, TimeGrid
from gf_verify import REL_TOL, ContractionReport, contraction_report, energy_chain, refinement_ratios, subharmonicity_report, subharmonicity_trend

logger = loguru.logger.bind(stage="ensemble")

GENERATORS = ("bumps", "fourier")
COEFFICIENTS = ("identity", "checkerboard", "random-spd", "file")
SOURCES = (PFLOW, HEAT, POISSON)

CHECKS = {
    "contraction": SOURCES,
    "energy-ledger": (PFLOW,),
    "positivity": (PFLOW,),
    "order": (PFLOW,),
    "finite-speed": (PFLOW,),
    "subharmonicity": SOURCES,
    "subharmonicity-trend": (HEAT, POISSON),
    "hajlasz": SOURCES,
    "dissipation": (HEAT, POISSON),
    "operator-bounds": (HEAT, POISSON),
    "kernel-certificate": (HEAT, POISSON),
}

# Checks resting on the discrete comparison principle
COMPARISON_CHECKS = ("order", "subharmonicity", "subharmonicity-trend")

FINITE_SPEED_THRESHOLD = 1e-8
BOUND_TIMES = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


@dataclass(frozen=True)
class Ensemble:
    """ Seeded family of verification scenarios

    grids, sources and coefficient_kinds, when given, are cycled by scenario index so that one
    ensemble mixes (dim, n) layouts, extension sources and coefficient fields. Empty tuples fall back
    to the single dim, n, source and coefficients settings.
    """

    seed: int = 0
    count: int = 10
    generator: str = "bumps"
    source: str = PFLOW
    dim: int = 1
    n: int = 128
    h: float = 1 / 16
    boundary: str = DIRICHLET_ZERO
    p_values: tuple = (4.0,)
    ellipticity: float = 1.0
    coefficients: str = "identity"
    coefficient_file: str = ""
    t_min: float = T_MIN
    ratio: float = RATIO
    t_max: float = T_MAX
    proximal: ProximalConfig = field(default_factory=ProximalConfig)
    detachment_tol: float = 1e-8
    rel_tol: float = REL_TOL
    spectral_cap: int = SPECTRAL_CAP
    grids: tuple = ()
    sources: tuple = ()
    coefficient_kinds: tuple = ()

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"Unknown data generator {self.generator!r}, expected one of {GENERATORS}")

        for source in self.source_list:
            if source not in SOURCES:
                raise ValueError(f"Unknown source {source!r}, expected one of {SOURCES}")

        for kind in self.coefficient_list:
            if kind not in COEFFICIENTS:
                raise ValueError(f"Unknown coefficient field {kind!r}, expected one of {COEFFICIENTS}")

        for dim, n in self.layouts:
            if dim not in {1, 2} or n < 1:
                raise ValueError(f"Grid layout must be 1 or 2 dimensional with n >= 1, got {dim}x{n}")

    @property
    def layouts(self):
        return tuple(self.grids) or ((self.dim, self.n),)

    @property
    def source_list(self):
        return tuple(self.sources) or (self.source,)

    @property
    def coefficient_list(self):
        return tuple(self.coefficient_kinds) or (self.coefficients,)

    @property
    def grid(self):
        return self.scenario_grid(0)

    @property
    def timegrid(self):
        return TimeGrid.geometric(self.t_min, self.ratio, self.t_max)

    def scenario_grid(self, index):
        dim, n = self.layouts[index % len(self.layouts)]
        return Grid((n,) * dim, self.h, self.boundary)

    def scenario_source(self, index):
        return self.source_list[(index // len(self.layouts)) % len(self.source_list)]

    def scenario_coefficients(self, index):
        return self.coefficient_list[(index // (len(self.layouts) * len(self.source_list))) % len(self.coefficient_list)]


@dataclass(frozen=True)
class Scenario:
    seed: int
    name: str
    source: str
    f: GridFunction
    p: float
    coefficients: CoefficientField
    rng: np.random.Generator

    @property
    def grid(self):
        return self.f.grid

    @property
    def kernel(self):
        return PPowerKernel(self.p) if self.source == PFLOW else QuadraticKernel(self.coefficients)


def bumps(grid, rng, count=None):
    """ Sum of compactly supported bumps a (1 - |x - c|^2 / r^2)_+^2 near the middle of the box

    Centers lie within 0.1 L of the middle and radii stay below 0.15 L, so degenerate flows have
    room to spread before reaching the boundary.
    """

    coordinates = grid.coordinates()
    extent = min(grid.box_length)
    values = np.zeros(grid.shape)

    for _ in range(count or int(rng.integers(1, 4))):
        center = rng.uniform(-0.1 * extent, 0.1 * extent, grid.dim)
        radius = rng.uniform(0.1, 0.15) * extent
        amplitude = rng.uniform(0.5, 1.5)
        distance_sq = sum((axis - offset) ** 2 for axis, offset in zip(coordinates, center))
        values += amplitude * np.maximum(0.0, 1.0 - distance_sq / radius**2) ** 2

    return GridFunction(grid, values)


def fourier(grid, rng, modes=4):
    """ Truncated random Fourier series shifted to be nonnegative """

    coordinates = grid.coordinates()
    values = np.zeros(grid.shape)

    for wave in np.ndindex(*(modes + 1,) * grid.dim):
        if not any(wave):
            continue
        phase = sum(2 * np.pi * k * axis / length for k, axis, length in zip(wave, coordinates, grid.box_length))
        amplitude = rng.normal(0.0, 1.0) / max(wave) ** 2
        values += amplitude * np.cos(phase + rng.uniform(0.0, 2 * np.pi))

    return GridFunction(grid, values - values.min())


def coefficient_field(ensemble, grid, rng, kind=None):
    kind = kind or ensemble.coefficients

    if kind == "identity":
        return CoefficientField.identity(grid)

    if kind == "checkerboard":
        return CoefficientField.checkerboard(grid, ensemble.ellipticity, block=int(rng.integers(1, 4)))

    if kind == "random-spd":
        return CoefficientField.random_spd(grid, ensemble.ellipticity, rng, block=int(rng.integers(1, 4)))

    return CoefficientField.load(grid, ensemble.coefficient_file, ensemble.ellipticity)


def make_scenario(ensemble, index):
    """ Scenario number index, drawn from its own generator seeded with seed + index """

    seed = ensemble.seed + index
    rng = np.random.default_rng(seed)
    grid = ensemble.scenario_grid(index)
    source = ensemble.scenario_source(index)
    kind = ensemble.scenario_coefficients(index)
    p = float(rng.choice(ensemble.p_values))
    f = (bumps if ensemble.generator == "bumps" else fourier)(grid, rng)
    coefficients = coefficient_field(ensemble, grid, rng, kind)

    label = f"p{p:g}" if source == PFLOW else kind
    name = f"{source}-{ensemble.generator}-{grid.dim}d-n{grid.shape[0]}-{label}-s{seed}"
    return Scenario(seed, name, source, f, p, coefficients, rng)


def _run_checks(scenario, which, checks):
    reports = []

    for check in which:
        started = time.perf_counter()

        try:
            reports.append(checks[check]())

        except GradflowError as error:
            reports.append(ContractionReport.failure(scenario.name, scenario.seed, check, error))

        logger.debug(f"{check} took {time.perf_counter() - started:.3f}s")

    return reports


def _wrap(scenario, report):
    return ContractionReport.from_check(scenario.name, scenario.seed, report)


def _subharmonicity(scenario, result, kernel, ensemble):
    detachment = detachment_set(result, ensemble.detachment_tol)
    return ContractionReport.from_check(scenario.name, scenario.seed, subharmonicity_report(result, kernel, detachment), detachment)


def run_pflow_scenario(ensemble, scenario, which):
    kernel = scenario.kernel
    extension = PFlowExtension(kernel, ensemble.proximal)
    timegrid = ensemble.timegrid
    result = vertical_max(extension, scenario.f, timegrid)
    trace = extension.trace

    def order():
        g = scenario.f + bumps(scenario.grid, scenario.rng).values * 0.5
        return _wrap(scenario, check_order_preservation(scenario.f, g, timegrid, kernel, ensemble.proximal))

    def finite_speed():
        support = RegionMask(scenario.grid, scenario.f.values > 0)
        return _wrap(scenario, check_finite_speed(trace, support, FINITE_SPEED_THRESHOLD))

    def contraction():
        ledger = trace.check_energy_estimates()
        return contraction_report(result, kernel, scenario.name, scenario.seed, ensemble.detachment_tol, ensemble.rel_tol, (ledger,))

    checks = {
        "contraction": contraction,
        "energy-ledger": lambda: _wrap(scenario, trace.check_energy_estimates()),
        "positivity": lambda: _wrap(scenario, check_positivity(trace)),
        "order": order,
        "finite-speed": finite_speed,
        "subharmonicity": lambda: _subharmonicity(scenario, result, kernel, ensemble),
        "hajlasz": lambda: _wrap(scenario, hajlasz_bound(result, ensemble.t_min)),
    }
    return _run_checks(scenario, which, checks)


def run_semigroup_scenario(ensemble, scenario, which):
    grid = scenario.grid
    operator = assemble(grid, scenario.coefficients, ensemble.spectral_cap)
    extension = HeatExtension(operator) if scenario.source == HEAT else PoissonExtension(operator)
    timegrid = ensemble.timegrid
    result = vertical_max(extension, scenario.f, timegrid)
    kernel = scenario.kernel

    def contraction():
        chain = energy_chain(result, scenario.coefficients, ensemble.rel_tol)
        return contraction_report(result, kernel, scenario.name, scenario.seed, ensemble.detachment_tol, ensemble.rel_tol, (chain,))

    def trend():
        ratios = refinement_ratios(ensemble.ratio)
        return _wrap(scenario, subharmonicity_trend(extension, scenario.f, kernel, ratios, ensemble.t_min, ensemble.t_max, ensemble.detachment_tol))

    def operator_bounds():
        reports = [operator.operator_bound_check(scenario.f, t) for t in BOUND_TIMES]
        worst = min(reports, key=lambda _: _.value)
        return _wrap(scenario, CheckReport("operator-bounds", all(_.passed for _ in reports), worst.value, worst.details))

    def kernel_certificate():
        times = np.geomspace(grid.h**2, 1.0, 4)
        nodes = sorted({grid.size // 2 + (grid.shape[-1] // 2 if grid.dim == 2 else 0), *(int(_) for _ in scenario.rng.integers(0, grid.size, 2))})
        _, report = operator.gaussian_certificate(times, nodes)
        return _wrap(scenario, report)

    checks = {
        "contraction": contraction,
        "subharmonicity": lambda: _subharmonicity(scenario, result, kernel, ensemble),
        "subharmonicity-trend": trend,
        "hajlasz": lambda: _wrap(scenario, hajlasz_bound(result, ensemble.t_min)),
        "dissipation": lambda: _wrap(scenario, operator.dissipation_check(scenario.f, timegrid)),
        "operator-bounds": operator_bounds,
        "kernel-certificate": kernel_certificate,
    }
    return _run_checks(scenario, which, checks)


def applicable_checks(ensemble, which):
    """ Requested checks that make sense for at least one ensemble source, in a fixed order """

    unknown = set(which) - set(CHECKS)

    if unknown:
        raise ValueError(f"Unknown checks {sorted(unknown)}, expected a subset of {sorted(CHECKS)}")

    return [_ for _ in CHECKS if _ in which and set(ensemble.source_list) & set(CHECKS[_])]


def scenario_checks(scenario, which):
    """ Checks of which that apply to this scenario

    Comparison based checks need a monotone discrete operator, the all-pairs Hajlasz bound a grid
    under the all-pairs cap. Dropped checks are logged, not reported.
    """

    selected = [_ for _ in which if scenario.source in CHECKS[_]]
    kernel = scenario.kernel

    if not kernel.monotone_on(scenario.grid):
        dropped = [_ for _ in selected if _ in COMPARISON_CHECKS]
        if dropped:
            logger.info(f"Skipping {', '.join(dropped)}, {kernel!r} has no discrete comparison principle on {scenario.grid!r}")
        selected = [_ for _ in selected if _ not in COMPARISON_CHECKS]

    if scenario.grid.size > ALL_PAIRS_CAP and "hajlasz" in selected:
        logger.info(f"Skipping hajlasz, {scenario.grid.size} nodes exceed the all-pairs cap {ALL_PAIRS_CAP}")
        selected.remove("hajlasz")

    return selected


def run_scenario(ensemble, index, which):
    """ All applicable checks of one scenario, solver errors become FAIL rows """

    scenario = make_scenario(ensemble, index)
    which = scenario_checks(scenario, which)

    with logger.contextualize(scenario=scenario.name):
        if not which:
            return []

        logger.info(f"Running {', '.join(which)}")

        try:
            if scenario.source == PFLOW:
                return run_pflow_scenario(ensemble, scenario, which)
            return run_semigroup_scenario(ensemble, scenario, which)

        except GradflowError as error:
            return [ContractionReport.failure(scenario.name, scenario.seed, _, error) for _ in which]


def worker_count():
    """ GRADFLOW_THREADS environment variable, CPU count by default """

    try:
        return max(1, int(os.environ.get("GRADFLOW_THREADS", os.cpu_count() or 1)))

    except ValueError:
        logger.warning(f"Ignoring malformed GRADFLOW_THREADS={os.environ['GRADFLOW_THREADS']!r}")
        return os.cpu_count() or 1


async def _run_all(ensemble, which, threads):
    semaphore = asyncio.Semaphore(threads)

    async def run_one(index):
        async with semaphore:
            return await asyncio.to_thread(run_scenario, ensemble, index, which)

    tasks = [asyncio.create_task(run_one(_)) for _ in range(ensemble.count)]
    return [report for reports in await asyncio.gather(*tasks) for report in reports]


def run_ensemble(ensemble, which=("contraction",), threads=None):
    """ Run every scenario of the ensemble concurrently, rows sorted by (seed, check) """

    which = applicable_checks(ensemble, which)

    if ensemble.count == 0 or not which:
        return []

    threads = threads or worker_count()
    logger.info(f"Running {ensemble.count} scenarios on {threads} workers, checks {', '.join(which)}")

    reports = asyncio.run(_run_all(ensemble, which, threads))
    return sorted(reports, key=lambda _: (_.seed, _.check))


def summarize(reports, wall_time):
    """ JSON summary {total, pass, fail, secondary_fail, worst_margin, wall_time_s}

    secondary_fail counts rows with at least one failed secondary check, such rows are FAIL rows too.
    """

    margins = [_.margin for _ in reports if np.isfinite(_.margin)]
    passed = sum(1 for _ in reports if _.passed)

    return {
        "total": len(reports),
        "pass": passed,
        "fail": len(reports) - passed,
        "secondary_fail": sum(1 for _ in reports if any(not check.passed for check in _.secondary)),
        "worst_margin": min(margins) if margins else None,
        "wall_time_s": round(float(wall_time), 3),
    }
