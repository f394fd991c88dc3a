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
import scipy.ndimage

from gf_energy import RegionMask
from gf_errors import DomainTooSmall
from gf_grid import l2_norm
from gf_pflow import ProximalConfig, solve_flow
from gf_report import CheckReport
from gf_timegrid import TimeGrid

logger = loguru.logger.bind(stage="pflow-checks")

# Observed order required from the tau halving experiment
MIN_ORDER = 0.9


def check_order_preservation(f, g, timegrid, kernel, config=None):
    """ Parabolic comparison: f <= g implies u_f(t) <= u_g(t) at every knot

    Guaranteed only for kernels whose discrete operator is monotone on the grid, see monotone_on().
    """

    config = config or ProximalConfig()

    if np.any(f.values > g.values):
        raise ValueError("Order preservation check needs f <= g pointwise")

    monotone = kernel.monotone_on(f.grid)

    if not monotone:
        logger.warning(f"{kernel!r} has no discrete comparison principle on {f.grid!r}, order may fail")

    lower = solve_flow(f, timegrid, kernel, config)
    upper = solve_flow(g, timegrid, kernel, config)

    margin = min(float((high.values - low.values).min()) for low, high in zip(lower.states, upper.states))
    logger.info(f"Order preservation margin {margin:.3e}")
    return CheckReport("order", margin >= -config.margin, margin, {"monotone": monotone})


def _support_distance(grid, initial_support):
    """ Distance of every node to initial_support, wrapping around on periodic grids """

    if not initial_support.any():
        return np.full(grid.shape, np.inf)

    if not grid.periodic:
        return scipy.ndimage.distance_transform_edt(~initial_support.mask, sampling=grid.h)

    tiled = np.tile(~initial_support.mask, (3,) * grid.dim)
    distance = scipy.ndimage.distance_transform_edt(tiled, sampling=grid.h)
    return distance[tuple(slice(n, 2 * n) for n in grid.shape)]


def support_radii(trace, initial_support, threshold):
    """ Per knot distance by which initial_support must be inflated to hold {|u| >= threshold} """

    distance = _support_distance(trace.grid, initial_support)
    radii = []

    for state in trace.states:
        above = np.abs(state.values) >= threshold
        radii.append(float(distance[above].max()) if above.any() else 0.0)

    return np.array(radii)


def _boundary_distance(grid):
    """ Distance of every node to the zero ghost layer of a Dirichlet box """

    distance = np.full(grid.shape, np.inf)

    for axis, n in enumerate(grid.shape):
        index = np.arange(n)
        layer = grid.h * np.minimum(index + 1, n - index).astype(float)
        distance = np.minimum(distance, np.expand_dims(layer, tuple(_ for _ in range(grid.dim) if _ != axis)))

    return distance


def check_finite_speed(trace, initial_support, threshold=1e-8):
    """ Finite speed of propagation, the solution above threshold stays in a bounded inflation of the data support

    On a Dirichlet box the margin is the smallest distance between the above-threshold set and the ghost
    layer at the last knot. On a periodic grid the inflation radius must stay below the distance of the
    farthest node from the support, where the front meets its own periodic image, and the margin is
    the distance still left.
    """

    if trace.kernel.name != "ppower" or not trace.kernel.p > 2:
        logger.warning(f"Finite speed is expected only for degenerate flows, checking {trace.kernel!r} anyway")

    grid = trace.grid
    radii = support_radii(trace, initial_support, threshold)
    reach = float(_support_distance(grid, initial_support).max()) if grid.periodic else np.inf

    for index, state in enumerate(trace.states):
        if grid.periodic and radii[index] >= reach:
            raise DomainTooSmall(f"Support radius {radii[index]:.4g} reached the farthest node {reach:.4g} of the period at knot {index}", index, radii[index])

        above = RegionMask(state.grid, np.abs(state.values) >= threshold)
        if above.touches_boundary():
            raise DomainTooSmall(f"Support above {threshold:g} reached the boundary at knot {index}, radius {radii[index]:.4g}", index, radii[index])

    final = np.abs(trace.states[-1].values) >= threshold

    if grid.periodic:
        margin = reach - float(radii[-1])
    else:
        margin = float(_boundary_distance(grid)[final].min()) if final.any() else float("inf")

    details = {"radii": radii.tolist(), "final_radius": float(radii[-1])}
    logger.info(f"Support radius grew from {radii[0]:.4g} to {radii[-1]:.4g}")
    return CheckReport("finite-speed", bool(np.isfinite(radii[-1])), margin, details)


def check_continuity(f, g, timegrid, kernel, config=None):
    """ Continuity in data: |u_f(t) - u_g(t)| <= |f - g| at every knot """

    config = config or ProximalConfig()
    first = solve_flow(f, timegrid, kernel, config)
    second = solve_flow(g, timegrid, kernel, config)

    initial = l2_norm(f - g)
    distances = [l2_norm(b - a) for a, b in zip(first.states, second.states)]
    margin = initial - max(distances)

    return CheckReport("continuity", margin >= -config.margin, margin, {"initial": initial, "worst": max(distances)})


def consistency_order(f, kernel, t_end, step, config=None, reference=None, levels=3):
    """ Observed convergence order of the implicit scheme under step halving

    Errors are taken against reference (the exact state at t_end) when given, otherwise
    between successive refinements.
    """

    config = config or ProximalConfig()
    finals = []

    for level in range(levels + (0 if reference is not None else 1)):
        trace = solve_flow(f, TimeGrid.uniform(step / 2**level, t_end), kernel, config)
        finals.append(trace.states[-1])

    if reference is not None:
        errors = [l2_norm(final - reference) / max(l2_norm(reference), 1e-300) for final in finals]
    else:
        errors = [l2_norm(fine - coarse) for coarse, fine in zip(finals, finals[1:])]

    orders = [float(np.log2(coarse / fine)) for coarse, fine in zip(errors, errors[1:]) if fine > 0]
    order = min(orders) if orders else float("inf")

    logger.info(f"Observed order {order:.3f} from errors {', '.join(f'{_:.3e}' for _ in errors)}")
    return CheckReport("consistency-order", order >= MIN_ORDER, order, {"errors": errors, "orders": orders})


def check_boundedness(trace):
    """ Uniform boundedness, sup |u(t)| <= sup |f| at every knot """

    bound = float(np.abs(trace.states[0].values).max())
    worst = max(float(np.abs(_.values).max()) for _ in trace.states)
    margin = bound - worst
    return CheckReport("boundedness", margin >= -trace.config.margin, margin, {"sup_initial": bound, "sup_worst": worst})


def check_positivity(trace):
    """ Nonnegative data stays nonnegative, every state >= -10 newton_tol """

    if trace.states[0].min() < 0:
        raise ValueError("Positivity check needs nonnegative initial data")

    margin = min(_.min() for _ in trace.states)
    return CheckReport("positivity", margin >= -trace.config.margin, margin)
