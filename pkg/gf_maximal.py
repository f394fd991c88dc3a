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



import loguru
import numpy as np

from gf_energy import RegionMask, flux_field, subsolution_residual
from gf_errors import EmptyInterior, NonMonotoneStencil
from gf_grid import GridFunction, hardy_littlewood_max, node_gradient_magnitude
from gf_pflow import ProximalConfig, solve_flow
from gf_report import CheckReport

logger = loguru.logger.bind(stage="maximal")

PFLOW = "pflow"
HEAT = "heat"
POISSON = "poisson"

DETACHMENT_TOL = 1e-8
SUBHARMONIC_TOL = 1e-6
HAJLASZ_TOL = 1e-6
ALL_PAIRS_CAP = 4096

MAXIMAL_FIELDS = ["node_index", "f", "m", "argmax_t", "in_detachment"]


class PFlowExtension:
    """ Extension of f by the implicit p-flow (or any variational kernel flow) """

    source = PFLOW

    def __init__(self, kernel, config=None):
        """ Class constructor """

        self.kernel = kernel
        self.config = config or ProximalConfig()
        self.trace = None

    def __repr__(self):
        return f"PFlowExtension({self.kernel!r})"

    def states(self, f, timegrid):
        self.trace = solve_flow(f, timegrid, self.kernel, self.config)
        return self.trace.states


class HeatExtension:
    """ Extension of f by the heat semigroup of an EllipticOperator """

    source = HEAT

    def __init__(self, operator):
        """ Class constructor """

        self.operator = operator

    def __repr__(self):
        return f"HeatExtension({self.operator!r})"

    def states(self, f, timegrid):
        return [self.operator.heat_apply(f, t) for t in timegrid]


class PoissonExtension:
    """ Extension of f by the Poisson semigroup of an EllipticOperator """

    source = POISSON

    def __init__(self, operator, method=None):
        """ Class constructor """

        self.operator = operator
        self.method = method or ("spectral" if operator.spectral else "subordination")

    def __repr__(self):
        return f"PoissonExtension({self.operator!r}, method={self.method!r})"

    def states(self, f, timegrid):
        return [self.operator.poisson_apply(f, t, self.method) for t in timegrid]


class MaximalResult:
    """ Vertical maximal function over the knots of a time grid, the knot states kept alongside """

    def __init__(self, f, states, timegrid, source):
        """ Class constructor """

        stack = np.stack([_.values for _ in states])

        self.f = f
        self.states = tuple(states)
        self.timegrid = timegrid
        self.source = source
        self.m = GridFunction(f.grid, stack.max(axis=0))

        # np.argmax returns the first maximum, the smallest knot on ties
        self.argmax = stack.argmax(axis=0)
        self.argmax.setflags(write=False)

    def __repr__(self):
        return f"MaximalResult(source={self.source!r}, {self.timegrid!r})"

    @property
    def grid(self):
        return self.f.grid

    def argmax_t(self):
        return self.timegrid.knots[self.argmax]

    def truncated(self, t_max):
        """ Maximal function over the knots t <= t_max only """

        timegrid = self.timegrid.truncated(t_max)
        return MaximalResult(self.f, self.states[: len(timegrid)], timegrid, self.source)

    def smoothed(self, epsilon):
        """ m_eps = max over knots t >= epsilon together with the states it uses """

        keep = [index for index, t in enumerate(self.timegrid) if t >= epsilon]

        if not keep:
            raise ValueError(f"No knot at or beyond epsilon={epsilon:g} in {self.timegrid!r}")

        return [self.states[_] for _ in keep]

    def rows(self, detachment=None):
        """ One CSV row per node: node_index, f, m, argmax_t, in_detachment """

        mask = detachment.region.mask.ravel() if detachment is not None else np.zeros(self.grid.size, dtype=bool)
        times = self.argmax_t().ravel()

        for index, (f, m) in enumerate(zip(self.f.flat(), self.m.flat())):
            yield {"node_index": index, "f": float(f), "m": float(m), "argmax_t": float(times[index]), "in_detachment": bool(mask[index])}


def vertical_max(source, f, timegrid):
    """ m(x) = max over all knots (t = 0 included) of the extension of f at x """

    if f.min() < 0:
        raise ValueError("Vertical maximal function needs nonnegative data")

    states = source.states(f, timegrid)
    result = MaximalResult(f, states, timegrid, source.source)
    logger.debug(f"Vertical maximal function of {source!r} over {len(timegrid)} knots")
    return result


class DetachmentSet:
    """ E = {m > f + tol} """

    def __init__(self, region, tol):
        """ Class constructor """

        self.region = region
        self.tol = tol

    def __repr__(self):
        return f"DetachmentSet(nodes={self.region.count()}, tol={self.tol:g}, touches_boundary={self.touches_boundary})"

    @property
    def touches_boundary(self):
        return self.region.touches_boundary()

    def count(self):
        return self.region.count()


def detachment_set(result, tol=DETACHMENT_TOL):
    return DetachmentSet(RegionMask(result.grid, result.m.values > result.f.values + tol), tol)


def subharmonicity_residual(result, kernel, detachment, tol=SUBHARMONIC_TOL):
    """ Discrete subsolution test of m on the full-stencil interior of the detachment set

    At a node x of E with argmax knot k the state u_k touches m from below, so a monotone stencil
    gives div A(grad m)(x) >= div A(grad u_k)(x). A knot is not a critical time of the extension,
    so u_k may still decrease at x. That negative residual of u_k is the time discretization slack,
    it vanishes as the knot ratio goes to 1. PASS requires residual(m) >= min(0, residual(u_k)) - tol * scale
    on the interior. The raw minimum and the largest slack are reported next to it.

    Vacuous PASS on an empty set. Raises EmptyInterior when E is nonempty but has no node whose
    whole stencil lies in E, NonMonotoneStencil when the kernel has no comparison principle on the grid.
    """

    if not detachment.region.any():
        return CheckReport("subharmonicity", True, 0.0, {"vacuous": True})

    if not kernel.monotone_on(result.grid):
        raise NonMonotoneStencil(f"{kernel!r} has no discrete comparison principle on {result.grid!r}")

    interior = detachment.region.interior()

    if not interior.any():
        raise EmptyInterior(f"Detachment set of {detachment.count()} nodes has no full-stencil node")

    residual = subsolution_residual(result.m, kernel).values[interior.mask]
    knots = result.argmax[interior.mask]
    touching = np.zeros_like(residual)

    for knot in np.unique(knots):
        selected = knots == knot
        touching[selected] = subsolution_residual(result.states[knot], kernel).values[interior.mask][selected]

    slack = np.maximum(0.0, -touching)
    scale = float(np.abs(flux_field(result.m, kernel).values).max()) / result.grid.h
    scale = scale if scale > 0 else 1.0
    minimum = float(residual.min())
    margin = float((residual + slack).min()) / scale

    details = {
        "minimum": minimum,
        "raw_margin": minimum / scale,
        "slack": float(slack.max()) / scale,
        "scale": scale,
        "interior_nodes": interior.count(),
        "touching_knots": int(np.unique(knots).size),
    }
    logger.info(f"Subharmonicity residual min {minimum:.3e} on {interior.count()} interior nodes, slack {details['slack']:.3e}, scale {scale:.3e}")
    return CheckReport("subharmonicity", margin >= -tol, margin, details)


def hajlasz_bound(result, epsilon):
    """ Pointwise gradient bound |m(x) - m(y)| <= d(x, y) (Mg(x) + Mg(y)) over all node pairs

    Both m and g = max |grad u(t)| are taken over the knots t >= epsilon.
    """

    grid = result.grid

    if grid.size > ALL_PAIRS_CAP:
        raise ValueError(f"All-pairs evaluation is capped at {ALL_PAIRS_CAP} nodes, grid has {grid.size}")

    states = result.smoothed(epsilon)
    smoothed = np.max([_.values for _ in states], axis=0).ravel()
    g = GridFunction(grid, np.max([node_gradient_magnitude(_).values for _ in states], axis=0))
    maximal = hardy_littlewood_max(g).flat()

    jump = np.abs(smoothed[:, None] - smoothed[None, :])
    bound = grid.node_distance() * (maximal[:, None] + maximal[None, :])

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bound > 0, jump / bound, np.where(jump > 1e-14, np.inf, 0.0))

    ratio = float(ratios.max())
    return CheckReport("hajlasz", ratio <= 1 + HAJLASZ_TOL, 1 - ratio, {"max_ratio": ratio})


def check_complement_identity(result, detachment):
    """ Off the detachment set m = f up to tol, so grad m = grad f on edges with both ends outside of E """

    grid = result.grid
    outside = ~detachment.region.mask
    difference = result.m.values - result.f.values
    gap = float(np.abs(difference[outside]).max()) if outside.any() else 0.0

    edges = np.abs(grid.difference_matrix @ difference.ravel()).reshape((grid.dim,) + grid.cell_shape)
    both = _edges_outside(grid, outside)
    jump = float(edges[both].max()) if both.any() else 0.0

    passed = gap <= detachment.tol + 1e-12 and jump <= 2 * (detachment.tol + 1e-12) / grid.h
    return CheckReport("complement-identity", bool(passed), detachment.tol - gap, {"value_gap": gap, "gradient_gap": jump})


def _edges_outside(grid, outside):
    """ Edge slots with both endpoints in outside, ghost nodes count as outside """

    if grid.periodic:
        return np.stack([outside & np.roll(outside, -1, axis=axis) for axis in range(grid.dim)])

    padded = np.pad(outside, 1, constant_values=True)
    both = []

    for axis in range(grid.dim):
        low = (slice(0, -1),) * grid.dim
        high = tuple(slice(1, None) if _ == axis else slice(0, -1) for _ in range(grid.dim))
        both.append(padded[low] & padded[high])

    return np.stack(both)
