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



import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from gf_errors import CGNonConvergence
from gf_grid import GridFunction

# Crank-Nicolson local error target and inner solve tolerance
LOCAL_ERROR = 1e-8
CG_RTOL = 1e-12
CG_MAXITER = 10000


def heat_apply(self, f, t):
    """ Heat semigroup H_t f = e^(tL) f, spectral under the cap, Crank-Nicolson above it """

    if t < 0:
        raise ValueError(f"Heat semigroup needs t >= 0, got {t}")

    if t == 0:
        return f

    if self.spectral:
        return GridFunction(self.grid, self.decomposition.apply(np.exp(-self.decomposition.eigenvalues * t), f.flat()))

    return GridFunction(self.grid, self.crank_nicolson(f.flat(), t))


def crank_nicolson(self, values, t):
    """ Crank-Nicolson with substeps sized from the tau^3 |K^3 u| / 12 local error term

    The substep is re-estimated before every step, so smoothing solutions take growing steps.
    """

    identity = scipy.sparse.identity(self.grid.size, format="csr")
    remaining = float(t)
    count = 0

    while remaining > 0:
        cubed = self.matrix @ (self.matrix @ (self.matrix @ values))
        size = float(np.sqrt(np.dot(cubed, cubed) * self.grid.cell_volume))
        tau = remaining if size == 0 else min(remaining, (12 * LOCAL_ERROR / size) ** (1 / 3))

        # Last fragment is merged rather than left as a sliver
        if remaining - tau < 1e-12 * t:
            tau = remaining

        implicit = (identity + 0.5 * tau * self.matrix).tocsr()
        rhs = values - 0.5 * tau * (self.matrix @ values)
        values, info = scipy.sparse.linalg.cg(implicit, rhs, x0=values, rtol=CG_RTOL, atol=0.0, maxiter=CG_MAXITER)

        if info != 0:
            raise CGNonConvergence(f"Conjugate gradient stopped with code {info} after {count} substeps at t={t - remaining:g}")

        remaining -= tau
        count += 1

    self.logger.debug(f"Crank-Nicolson over t={t:g} took {count} substeps")
    return values


def kernel_projection(self, f):
    """ Orthogonal projection onto the null space of -L, the mean (Periodic) or zero (DirichletZero) """

    if self.grid.periodic:
        return GridFunction.constant(self.grid, f.values.mean())

    return GridFunction.zeros(self.grid)
