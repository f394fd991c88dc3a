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



from dataclasses import dataclass

import loguru
import numpy as np

from gf_energy import PPowerKernel, QuadraticKernel, energy
from gf_errors import EmptyInterior, GradflowError, NonMonotoneStencil
from gf_grid import GridFunction, gradient_norm
from gf_maximal import (
    DETACHMENT_TOL,
    SUBHARMONIC_TOL,
    HeatExtension,
    PFlowExtension,
    PoissonExtension,
    check_complement_identity,
    detachment_set,
    subharmonicity_residual,
    vertical_max,
)
from gf_operator import assemble
from gf_report import CheckReport
from gf_timegrid import T_MAX, T_MIN, TimeGrid

logger = loguru.logger.bind(stage="verify")

REL_TOL = 1e-6
ENERGY_FLOOR = 1e-14

REPORT_FIELDS = [
    "seed",
    "scenario",
    "check",
    "passed",
    "margin",
    "energy_before",
    "energy_after",
    "detachment_nodes",
    "detachment_interior",
    "touches_boundary",
    "secondary",
    "cause",
]


@dataclass(frozen=True)
class ContractionReport:
    """ One verification row, energies of f and of its maximal function plus detachment diagnostics """

    scenario: str
    check: str
    passed: bool
    margin: float
    seed: int = 0
    energy_before: float = float("nan")
    energy_after: float = float("nan")
    detachment_nodes: int = 0
    detachment_interior: int = 0
    touches_boundary: bool = False
    secondary: tuple = ()
    cause: str = ""

    def row(self):
        row = {_: getattr(self, _) for _ in REPORT_FIELDS}
        row["secondary"] = ";".join(f"{_.name}:{'pass' if _.passed else 'fail'}" for _ in self.secondary)
        return row

    @classmethod
    def from_check(cls, scenario, seed, report, detachment=None):
        """ Wrap a plain CheckReport into a report row, with the detachment statistics when given """

        if detachment is None:
            return cls(scenario, report.name, report.passed, report.value, seed, cause=report.cause)

        return cls(
            scenario,
            report.name,
            report.passed,
            report.value,
            seed,
            detachment_nodes=detachment.count(),
            detachment_interior=detachment.region.interior().count(),
            touches_boundary=detachment.touches_boundary,
            cause=report.cause,
        )

    @classmethod
    def failure(cls, scenario, seed, check, error):
        logger.warning(f"{check} failed on {scenario}: {error}")
        return cls(scenario, check, False, float("nan"), seed, cause=f"{type(error).__name__}: {error}")


def relative_margin(before, after):
    return (before - after) / max(before, ENERGY_FLOOR)


def subharmonicity_report(result, kernel, detachment):
    """ Subharmonicity as a secondary report

    An interior-free detachment set, or a kernel without a discrete comparison principle on the grid,
    is recorded as skipped, not failed.
    """

    try:
        return subharmonicity_residual(result, kernel, detachment)

    except (EmptyInterior, NonMonotoneStencil) as error:
        return CheckReport("subharmonicity", True, float("nan"), {"skipped": True}, f"{type(error).__name__}: {error}")


def contraction_report(result, kernel, scenario="", seed=0, detachment_tol=DETACHMENT_TOL, rel_tol=REL_TOL, secondary=()):
    """ Compare F(m) against F(f) for an already computed maximal function

    The row passes only when the energy margin holds and every secondary check passed, the failed
    secondaries are named in the cause.
    """

    before = energy(result.f, kernel)
    after = energy(result.m, kernel)
    margin = relative_margin(before, after)
    detachment = detachment_set(result, detachment_tol)

    secondary = tuple(secondary) + (subharmonicity_report(result, kernel, detachment), check_complement_identity(result, detachment))
    failed = [_.name for _ in secondary if not _.passed]

    if failed:
        logger.warning(f"Secondary checks failed on {scenario or result.source}: {', '.join(failed)}")

    logger.info(f"Contraction {result.source} F(f)={before:.6g} F(m)={after:.6g} margin {margin:.3e}")
    return ContractionReport(
        scenario,
        "contraction",
        margin >= -rel_tol and not failed,
        margin,
        seed,
        before,
        after,
        detachment.count(),
        detachment.region.interior().count(),
        detachment.touches_boundary,
        secondary,
        f"secondary failed: {', '.join(failed)}" if failed else "",
    )


def verify_pflow_contraction(f, p, grid, timegrid, config=None, detachment_tol=DETACHMENT_TOL, rel_tol=REL_TOL, scenario="", seed=0):
    """ Energy contraction of the p-flow maximal function, |grad S*f|_p^p <= |grad f|_p^p """

    if f.grid != grid:
        raise ValueError(f"Data lives on {f.grid!r}, expected {grid!r}")

    try:
        kernel = PPowerKernel(p)
        extension = PFlowExtension(kernel, config)
        result = vertical_max(extension, f, timegrid)
        return contraction_report(result, kernel, scenario, seed, detachment_tol, rel_tol, (extension.trace.check_energy_estimates(),))

    except GradflowError as error:
        return ContractionReport.failure(scenario, seed, "contraction", error)


def energy_chain(result, coefficients, rel_tol=REL_TOL):
    """ lambda^-1 |grad m_eps|^2 <= 2 F(m_eps) <= 2 F(H_eps f) <= 2 F(f) <= lambda |grad f|^2

    m_eps is the maximal function over the knots t >= eps with eps the first positive knot.
    """

    kernel = QuadraticKernel(coefficients)
    ellipticity = coefficients.ellipticity
    epsilon = result.timegrid.knots[1] if len(result.timegrid) > 1 else 0.0
    states = result.smoothed(epsilon)
    smoothed = GridFunction(result.grid, np.max([_.values for _ in states], axis=0))

    chain = [
        gradient_norm(smoothed, 2.0) / ellipticity,
        2 * energy(smoothed, kernel),
        2 * energy(states[0], kernel),
        2 * energy(result.f, kernel),
        ellipticity * gradient_norm(result.f, 2.0),
    ]
    scale = max(chain[-1], ENERGY_FLOOR)
    margin = min((high - low) / scale for low, high in zip(chain, chain[1:]))
    return CheckReport("energy-chain", margin >= -rel_tol, margin, {"chain": chain})


def verify_semigroup_contraction(
    f, coefficients, grid, timegrid, source="heat", method=None, detachment_tol=DETACHMENT_TOL, rel_tol=REL_TOL, scenario="", seed=0, spectral_cap=None
):
    """ Energy contraction of the heat or Poisson maximal function in the A weighted energy """

    if f.grid != grid:
        raise ValueError(f"Data lives on {f.grid!r}, expected {grid!r}")

    if source not in {"heat", "poisson"}:
        raise ValueError(f"Unknown semigroup source {source!r}")

    try:
        operator = assemble(grid, coefficients) if spectral_cap is None else assemble(grid, coefficients, spectral_cap)
        extension = HeatExtension(operator) if source == "heat" else PoissonExtension(operator, method)
        result = vertical_max(extension, f, timegrid)
        kernel = QuadraticKernel(coefficients)
        return contraction_report(result, kernel, scenario, seed, detachment_tol, rel_tol, (energy_chain(result, coefficients, rel_tol),))

    except GradflowError as error:
        return ContractionReport.failure(scenario, seed, "contraction", error)


def truncation_trend(result, kernel, t_max_values, rel_tol=REL_TOL):
    """ Truncated maximal functions grow pointwise with t_max and every truncation still contracts energy

    The energies themselves are reported, they need not be monotone in t_max.
    """

    before = energy(result.f, kernel)
    energies = []
    margins = []
    growth = np.inf
    previous = None

    for t_max in sorted(t_max_values):
        truncated = result.truncated(t_max)
        energies.append(energy(truncated.m, kernel))
        margins.append(relative_margin(before, energies[-1]))

        if previous is not None:
            growth = min(growth, float((truncated.m.values - previous.values).min()))
        previous = truncated.m

    passed = growth >= 0 and min(margins) >= -rel_tol
    return CheckReport("truncation-trend", bool(passed), min(margins), {"t_max": sorted(t_max_values), "energies": energies, "growth": growth})


def refinement_ratios(ratio, levels=3, factor=5.0):
    """ Knot ratios 1 + (r - 1) / factor^k, the default 1.25 gives 1.25, 1.05, 1.01 """

    return tuple(1 + (ratio - 1) / factor**_ for _ in range(levels))


def subharmonicity_trend(extension, f, kernel, ratios, t_min=T_MIN, t_max=T_MAX, detachment_tol=DETACHMENT_TOL, tol=SUBHARMONIC_TOL):
    """ Raw subsolution deficit of m under time grid refinement

    The deficit max(0, -raw margin) is the part of the residual covered by the touching state slack.
    PASS when every level passes the touching test and the deficit does not grow as the ratio
    approaches 1.
    """

    ratios = sorted(ratios, reverse=True)
    deficits = []
    slacks = []
    passed = True

    for ratio in ratios:
        result = vertical_max(extension, f, TimeGrid.geometric(t_min, ratio, t_max))

        try:
            report = subharmonicity_residual(result, kernel, detachment_set(result, detachment_tol), tol)

        except EmptyInterior:
            deficits.append(0.0)
            slacks.append(0.0)
            continue

        passed = passed and report.passed
        deficits.append(max(0.0, -report.details.get("raw_margin", 0.0)))
        slacks.append(report.details.get("slack", 0.0))
        logger.debug(f"Knot ratio {ratio:g}: raw deficit {deficits[-1]:.3e}, slack {slacks[-1]:.3e}")

    shrinking = all(finer <= coarser + tol for coarser, finer in zip(deficits, deficits[1:]))
    return CheckReport("subharmonicity-trend", bool(passed and shrinking), -deficits[-1], {"ratios": ratios, "deficits": deficits, "slacks": slacks})


def equality_scenarios(grid, rng):
    """ Data left invariant by every flow, contraction holds with equality """

    yield "zero", GridFunction.zeros(grid)

    if grid.periodic:
        yield "constant", GridFunction.constant(grid, rng.uniform(0.5, 2.0))
