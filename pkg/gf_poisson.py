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

from gf_errors import QuadratureUnderflow
from gf_grid import GridFunction, l2_norm

logger = loguru.logger.bind(stage="poisson")

SPECTRAL = "spectral"
SUBORDINATION = "subordination"

# Trapezoid rule in y for s = (t^2 / 4) e^y
Y_MIN = -6.0
Y_MAX = 46.0
Y_STEP = 0.05

# Relative change below which the heat flow counts as settled
EQUILIBRIUM = 1e-12


class SubordinationQuadrature:
    """ Nodes s_i and weights w_i with P_t = sum w_i H_(s_i)

    Substituting s = (t^2 / 4) e^y in the subordination integral leaves the t independent
    density exp(-y / 2 - e^-y) / sqrt(pi) in y, integrated by the trapezoid rule.
    """

    def __init__(self, t, y_min=Y_MIN, y_max=Y_MAX, y_step=Y_STEP):
        """ Class constructor """

        if not t > 0:
            raise ValueError(f"Subordination quadrature needs t > 0, got {t}")

        y = np.arange(y_min, y_max + y_step / 2, y_step)
        density = np.exp(-y / 2 - np.exp(-y)) / np.sqrt(np.pi)
        keep = density > 0

        self.t = float(t)
        self.raw_mass = float(density.sum() * y_step)
        self.nodes = t**2 / 4 * np.exp(y[keep])
        self.weights = density[keep] / density[keep].sum()

    def __repr__(self):
        return f"SubordinationQuadrature(t={self.t:g}, nodes={self.nodes.size})"

    def __len__(self):
        return self.nodes.size

    def mass(self):
        return float(self.weights.sum())

    def multiplier(self, eigenvalues):
        """ sum_i w_i exp(-lambda s_i) for every eigenvalue """

        return np.exp(-np.outer(eigenvalues, self.nodes)) @ self.weights


def poisson_apply(self, f, t, method=SPECTRAL):
    """ Poisson semigroup P_t f = exp(-t (-L)^(1/2)) f

    The spectral method needs the grid under the spectral cap. Subordination averages heat
    applications over the quadrature nodes, through the eigenvalues under the cap and through
    a chained Crank-Nicolson sweep above it.
    """

    if t < 0:
        raise ValueError(f"Poisson semigroup needs t >= 0, got {t}")

    if method not in {SPECTRAL, SUBORDINATION}:
        raise ValueError(f"Unknown Poisson method {method!r}")

    if t == 0:
        return f

    if method == SPECTRAL:
        decomposition = self.decomposition
        return GridFunction(self.grid, decomposition.apply(np.exp(-t * np.sqrt(decomposition.eigenvalues)), f.flat()))

    quadrature = SubordinationQuadrature(t)

    try:
        if self.spectral:
            return _subordinate_spectral(self, f, quadrature)
        return _subordinate_chain(self, f, quadrature)

    except QuadratureUnderflow as error:
        logger.warning(f"{error}, returning the projection onto constants")
        return self.kernel_projection(f)


def _subordinate_spectral(self, f, quadrature):
    eigenvalues = self.decomposition.eigenvalues
    moving = eigenvalues > 1e-12 * max(float(eigenvalues.max()), 1.0)

    if moving.any() and not np.any(np.exp(-eigenvalues[moving] * quadrature.nodes[0]) > 0):
        raise QuadratureUnderflow(f"All {len(quadrature)} subordination nodes beyond the heat equilibrium at t={quadrature.t:g}")

    return GridFunction(self.grid, self.decomposition.apply(quadrature.multiplier(eigenvalues), f.flat()))


def _subordinate_chain(self, f, quadrature):
    """ Accumulate sum w_i H_(s_i) f over increasing s_i, each heat call continuing from the previous node """

    scale = max(l2_norm(f), 1e-300)
    projection = self.kernel_projection(f).flat()

    state = self.crank_nicolson(f.flat(), quadrature.nodes[0])

    if l2_norm(GridFunction(self.grid, state - projection)) <= EQUILIBRIUM * scale:
        raise QuadratureUnderflow(f"All {len(quadrature)} subordination nodes beyond the heat equilibrium at t={quadrature.t:g}")

    total = quadrature.weights[0] * state
    previous = quadrature.nodes[0]

    for index in range(1, len(quadrature)):
        settled = l2_norm(GridFunction(self.grid, state - projection)) <= EQUILIBRIUM * scale

        if settled:
            total += quadrature.weights[index:].sum() * state
            logger.debug(f"Heat flow settled after {index} of {len(quadrature)} subordination nodes")
            break

        state = self.crank_nicolson(state, quadrature.nodes[index] - previous)
        previous = quadrature.nodes[index]
        total += quadrature.weights[index] * state

    return GridFunction(self.grid, total)
