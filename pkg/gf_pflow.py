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
import scipy.sparse
import scipy.sparse.linalg

from gf_errors import NonConvergence
from gf_grid import GridFunction
from gf_report import CheckReport

logger = loguru.logger.bind(stage="pflow")

NEWTON_TOL = 1e-10
MAX_NEWTON_ITERS = 100
DAMPING = 0.5
DELTA = 1e-12

# Regularizer fallback after a failed line search
DELTA_GROWTH = 1e3
DELTA_MAX = 1e-3
LINE_SEARCH_STEPS = 40
ARMIJO = 1e-4


class ProximalConfig:
    """ Newton settings of the backward Euler / minimizing movement step """

    def __init__(self, newton_tol=NEWTON_TOL, max_newton_iters=MAX_NEWTON_ITERS, damping=DAMPING, delta=DELTA):
        """ Class constructor """

        if not newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {newton_tol}")

        if int(max_newton_iters) < 1:
            raise ValueError(f"max_newton_iters must be at least 1, got {max_newton_iters}")

        if not 0 < damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {damping}")

        if not delta >= 0:
            raise ValueError(f"delta must be nonnegative, got {delta}")

        self.newton_tol = float(newton_tol)
        self.max_newton_iters = int(max_newton_iters)
        self.damping = float(damping)
        self.delta = float(delta)

    def __repr__(self):
        return f"ProximalConfig(newton_tol={self.newton_tol:g}, max_newton_iters={self.max_newton_iters}, damping={self.damping:g}, delta={self.delta:g})"

    @property
    def margin(self):
        """ Slack used by every PASS criterion of the flow checks """

        return 10 * self.newton_tol


class _Step:
    """ Residual, objective and Jacobian of v -> v - tau div A(grad v) - u on flat arrays """

    def __init__(self, u, tau, kernel):
        """ Class constructor """

        self.grid = u.grid
        self.u = u.flat()
        self.tau = tau
        self.kernel = kernel
        self.matrix = u.grid.difference_matrix
        self.edge_shape = (u.grid.dim,) + u.grid.cell_shape

    def xi(self, v):
        return (self.matrix @ v).reshape(self.edge_shape)

    def weighted_norm(self, values):
        return float(np.sqrt(np.dot(values, values) * self.grid.cell_volume))

    def residual(self, v):
        return v - self.u + self.tau * (self.matrix.T @ self.kernel.flux(self.xi(v)).ravel())

    def objective(self, v):
        with np.errstate(over="ignore", invalid="ignore"):
            difference = v - self.u
            return float((np.dot(difference, difference) / (2 * self.tau) + self.kernel.density(self.xi(v)).sum()) * self.grid.cell_volume)

    def jacobian(self, v, delta):
        blocks = self.kernel.flux_jacobian(self.xi(v), delta)
        weights = scipy.sparse.bmat([[scipy.sparse.diags(np.ravel(column)) for column in row] for row in blocks])
        stiffness = self.matrix.T @ weights @ self.matrix
        return (scipy.sparse.identity(self.grid.size) + self.tau * stiffness).tocsc()


def proximal_step(u, tau, kernel, config=None):
    """ One backward Euler step v - tau div A(x, grad v) = u

    The solution is the unique minimizer of |v - u|^2 / (2 tau) + F(v). Damped Newton on the
    residual, the degeneracy regularizer delta enters the Jacobian only.
    """

    config = config or ProximalConfig()

    if not tau > 0:
        raise ValueError(f"Proximal step size must be positive, got {tau}")

    step = _Step(u, tau, kernel)
    v = step.u.copy()
    delta = config.delta

    residual = step.residual(v)
    norm = step.weighted_norm(residual)
    objective = step.objective(v)

    for iteration in range(1, config.max_newton_iters + 1):
        if norm <= config.newton_tol:
            logger.debug(f"Newton converged in {iteration - 1} iterations, residual {norm:.3e}")
            return GridFunction(u.grid, v)

        direction = scipy.sparse.linalg.spsolve(step.jacobian(v, delta), -residual)
        slope = np.dot(residual, direction) * step.grid.cell_volume / tau

        # Backtracking, accept on Armijo decrease of the objective or on a smaller residual
        length = 1.0
        for _ in range(LINE_SEARCH_STEPS):
            candidate = v + length * direction
            candidate_residual = step.residual(candidate)
            candidate_norm = step.weighted_norm(candidate_residual)
            candidate_objective = step.objective(candidate)

            if candidate_objective <= objective + ARMIJO * length * slope or candidate_norm <= (1 - ARMIJO * length) * norm:
                break

            length *= config.damping

        else:
            if delta * DELTA_GROWTH > DELTA_MAX or config.damping == 1.0:
                raise NonConvergence(f"Newton line search failed after {iteration} iterations, residual {norm:.3e}", iteration, norm)

            delta = max(delta, config.newton_tol) * DELTA_GROWTH
            logger.warning(f"Newton line search stalled, regularizer raised to {delta:.1e}")
            continue

        v, residual, norm, objective = candidate, candidate_residual, candidate_norm, candidate_objective

    if norm <= config.newton_tol:
        return GridFunction(u.grid, v)

    raise NonConvergence(f"Newton exceeded {config.max_newton_iters} iterations, residual {norm:.3e}", config.max_newton_iters, norm)


@dataclass(frozen=True)
class LedgerEntry:
    """ Per-knot bookkeeping of the discrete energy estimates """

    t: float
    l2_norm_sq: float
    energy: float
    dissipation: float
    l2_dissipation: float
    min_value: float


class FlowTrace:
    """ States of an implicit gradient flow at the knots of a time grid, with their ledger """

    def __init__(self, kernel, timegrid, states, ledger, config):
        """ Class constructor """

        self.kernel = kernel
        self.timegrid = timegrid
        self.states = tuple(states)
        self.ledger = tuple(ledger)
        self.config = config

    def __repr__(self):
        return f"FlowTrace({self.kernel!r}, {self.timegrid!r})"

    def __len__(self):
        return len(self.states)

    @property
    def grid(self):
        return self.states[0].grid

    def energies(self):
        return np.array([_.energy for _ in self.ledger])

    def l2_norms_sq(self):
        return np.array([_.l2_norm_sq for _ in self.ledger])

    def check_energy_estimates(self, slack=None):
        """ Nonincreasing energy and norm per step, plus both accumulated estimates

        Accumulated forms: |u_K|^2 + sum 2 tau p F(u_(k+1)) <= |f|^2 and
        sum tau |(u_(k+1) - u_k) / tau|^2 + F(u_K) <= F(f).
        """

        slack = self.config.margin if slack is None else slack
        energies = self.energies()
        norms = np.sqrt(self.l2_norms_sq())
        first, last = self.ledger[0], self.ledger[-1]
        steps = max(len(self.ledger) - 1, 1)

        energy_step = float(np.max(np.diff(energies), initial=-np.inf))
        norm_step = float(np.max(np.diff(norms), initial=-np.inf))
        l2_estimate = last.l2_norm_sq + last.l2_dissipation - first.l2_norm_sq
        energy_estimate = last.energy + last.dissipation - first.energy

        details = {"energy_step": energy_step, "norm_step": norm_step, "l2_estimate": l2_estimate, "energy_estimate": energy_estimate}
        passed = energy_step <= slack and norm_step <= slack and l2_estimate <= slack * steps and energy_estimate <= slack * steps
        worst = max(energy_step, norm_step, l2_estimate / steps, energy_estimate / steps)
        return CheckReport("energy-ledger", bool(passed), -worst, details)

    def rows(self, support_radii=None):
        """ One CSV row per knot: t, l2_norm_sq, energy, min_value, support_radius """

        for index, entry in enumerate(self.ledger):
            yield {
                "t": entry.t,
                "l2_norm_sq": entry.l2_norm_sq,
                "energy": entry.energy,
                "min_value": entry.min_value,
                "support_radius": None if support_radii is None else float(support_radii[index]),
            }


TRACE_FIELDS = ["t", "l2_norm_sq", "energy", "min_value", "support_radius"]


def _ledger_entry(t, state, kernel, dissipation, l2_dissipation):
    from gf_energy import energy
    from gf_grid import l2_norm_sq

    return LedgerEntry(float(t), l2_norm_sq(state), energy(state, kernel), dissipation, l2_dissipation, state.min())


def solve_flow(f, timegrid, kernel, config=None):
    """ Minimizing movement scheme for u' = div A(x, grad u), states[0] = f """

    config = config or ProximalConfig()
    states = [f]
    ledger = [_ledger_entry(0.0, f, kernel, 0.0, 0.0)]

    logger.debug(f"Solving {kernel!r} flow over {timegrid!r}")

    for index, tau in enumerate(timegrid.steps):
        try:
            state = proximal_step(states[-1], tau, kernel, config)

        except NonConvergence as error:
            raise error.at_knot(index + 1) from error

        change = state.flat() - states[-1].flat()
        previous = ledger[-1]
        entry = _ledger_entry(timegrid.knots[index + 1], state, kernel, 0.0, 0.0)

        states.append(state)
        ledger.append(
            LedgerEntry(
                entry.t,
                entry.l2_norm_sq,
                entry.energy,
                previous.dissipation + float(np.dot(change, change) * f.grid.cell_volume / tau),
                previous.l2_dissipation + 2 * tau * kernel.p * entry.energy,
                entry.min_value,
            )
        )

    return FlowTrace(kernel, timegrid, states, ledger, config)
