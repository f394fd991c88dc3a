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
import scipy.ndimage

from gf_grid import EdgeField, GridFunction, divergence, gradient, gradient_norm


class RegionMask:
    """ Boolean selection of nodes, houses the sets E and G of localized energies """

    def __init__(self, grid, mask):
        """ Class constructor """

        mask = np.array(mask, dtype=bool)

        if mask.size != grid.size:
            raise ValueError(f"RegionMask needs {grid.size} entries, got {mask.size}")

        self.grid = grid
        self.mask = mask.reshape(grid.shape)
        self.mask.setflags(write=False)

    def __repr__(self):
        return f"RegionMask({self.grid!r}, nodes={self.count()})"

    @classmethod
    def full(cls, grid):
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def empty(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    def __or__(self, other):
        return RegionMask(self.grid, self.mask | other.mask)

    def __and__(self, other):
        return RegionMask(self.grid, self.mask & other.mask)

    def __invert__(self):
        return RegionMask(self.grid, ~self.mask)

    def count(self):
        return int(self.mask.sum())

    def any(self):
        return bool(self.mask.any())

    def interior(self):
        """ Nodes whose whole 3^n neighbourhood lies in the region, ghosts count as outside """

        structure = np.ones((3,) * self.grid.dim, dtype=bool)

        if not self.grid.periodic:
            return RegionMask(self.grid, scipy.ndimage.binary_erosion(self.mask, structure=structure, border_value=0))

        padded = np.pad(self.mask, 1, mode="wrap")
        eroded = scipy.ndimage.binary_erosion(padded, structure=structure, border_value=1)
        return RegionMask(self.grid, eroded[(slice(1, -1),) * self.grid.dim])

    def touches_boundary(self):
        """ True when the region reaches the outermost node layer of a Dirichlet box """

        if self.grid.periodic:
            return False

        for axis in range(self.grid.dim):
            if np.take(self.mask, 0, axis=axis).any() or np.take(self.mask, -1, axis=axis).any():
                return True

        return False

    def cell_weights(self):
        """ Edge attribution: a cell belongs to the region when its anchor node does

        Ghost anchors of Dirichlet grids are attributed to the adjacent interior node.
        """

        if self.grid.periodic:
            return self.mask.astype(float)

        index = [np.clip(np.arange(n + 1) - 1, 0, n - 1) for n in self.grid.shape]
        return self.mask[np.ix_(*index)].astype(float)


class VariationalKernel:
    """ Integrand F(x, xi) of an energy, together with A(x, xi) = grad_xi F """

    name = "kernel"

    def __init__(self, p, ellipticity=1.0):
        """ Class constructor """

        self.p = float(p)
        self.ellipticity = float(ellipticity)

    def __repr__(self):
        return f"{type(self).__name__}(p={self.p:g}, ellipticity={self.ellipticity:g})"

    def density(self, xi):
        raise NotImplementedError

    def flux(self, xi):
        raise NotImplementedError

    def flux_jacobian(self, xi, delta=0.0):
        raise NotImplementedError

    def density_at(self, x, xi):
        raise NotImplementedError

    def flux_at(self, x, xi):
        raise NotImplementedError

    def monotone_on(self, grid):
        """ True when the discrete operator div A(x, grad u) on grid obeys the comparison principle

        One-dimensional stencils always do. In 2D the collocated anchored gradient couples
        diagonal neighbours and monotonicity depends on the kernel.
        """

        return grid.dim == 1


class PPowerKernel(VariationalKernel):
    """ F(xi) = |xi|^p / p, the p-energy """

    name = "ppower"

    def __init__(self, p):
        """ Class constructor """

        if not p >= 2.0:
            raise ValueError(f"PPower kernel needs p >= 2, got {p}")

        super().__init__(p, ellipticity=1.0)

    def density(self, xi):
        return np.sqrt((xi**2).sum(axis=0)) ** self.p / self.p

    def flux(self, xi):
        # 0 ** (p - 2) is 0 for p > 2 and 1 for p = 2, the continuous extension either way
        return np.sqrt((xi**2).sum(axis=0)) ** (self.p - 2) * xi

    def flux_jacobian(self, xi, delta=0.0):
        """ Per-cell blocks of |xi|^(p-2) (I + (p - 2) xi xi^T / |xi|^2), regularized by delta """

        dim = xi.shape[0]
        flat = xi.reshape(dim, -1)
        squared = (flat**2).sum(axis=0) + delta
        base = squared ** ((self.p - 2) / 2)
        scale = np.divide((self.p - 2) * base, squared, out=np.zeros_like(base), where=squared > 0)

        return tuple(tuple(base * (row == col) + scale * flat[row] * flat[col] for col in range(dim)) for row in range(dim))

    def density_at(self, x, xi):
        return self.density(_as_vector(xi))

    def flux_at(self, x, xi):
        return self.flux(_as_vector(xi))

    def monotone_on(self, grid):
        # For p > 2 the mixed term (p - 2) |xi|^(p-4) xi1 xi2 takes either sign in 2D
        return grid.dim == 1 or self.p == 2.0


class QuadraticKernel(VariationalKernel):
    """ F(x, xi) = A(x) xi . xi / 2 for a CoefficientField A """

    name = "quadratic"

    def __init__(self, coefficients):
        """ Class constructor """

        super().__init__(2.0, ellipticity=coefficients.ellipticity)
        self.coefficients = coefficients

    def density(self, xi):
        return 0.5 * (self.coefficients.apply(xi) * xi).sum(axis=0)

    def flux(self, xi):
        return self.coefficients.apply(xi)

    def flux_jacobian(self, xi, delta=0.0):
        return self.coefficients.blocks()

    def density_at(self, x, xi):
        xi = _as_vector(xi)
        return 0.5 * (self.flux_at(x, xi) * xi).sum(axis=0)

    def flux_at(self, x, xi):
        return np.einsum("ij,j...->i...", self.coefficients.matrix_at(x), _as_vector(xi))

    def monotone_on(self, grid):
        return self.coefficients.monotone()


def _as_vector(xi):
    xi = np.asarray(xi, dtype=float)
    return xi[None] if xi.ndim == 0 else xi


def kernel_gradient(kernel, x, xi):
    """ A(x, xi) = grad_xi F(x, xi) at a single location """

    return kernel.flux_at(x, xi)


def kernel_value(kernel, x, xi):
    return kernel.density_at(x, xi)


def energy(u, kernel, region=None):
    """ Localized energy F_E(u), the global energy when region is omitted or full """

    densities = kernel.density(gradient(u).values)

    if region is not None:
        densities = densities * region.cell_weights()

    return float(densities.sum() * u.grid.cell_volume)


def convexity_gap(kernel, x, xi1, xi2):
    """ F(x, xi1) - F(x, xi2) - A(x, xi2) . (xi1 - xi2), positive for xi1 != xi2 """

    xi1, xi2 = _as_vector(xi1), _as_vector(xi2)
    return kernel.density_at(x, xi1) - kernel.density_at(x, xi2) - (kernel.flux_at(x, xi2) * (xi1 - xi2)).sum(axis=0)


def monotonicity_gap(kernel, x, xi1, xi2):
    """ (A(x, xi1) - A(x, xi2)) . (xi1 - xi2), nonnegative """

    xi1, xi2 = _as_vector(xi1), _as_vector(xi2)
    return ((kernel.flux_at(x, xi1) - kernel.flux_at(x, xi2)) * (xi1 - xi2)).sum(axis=0)


def flux_field(u, kernel):
    return EdgeField(u.grid, kernel.flux(gradient(u).values))


def subsolution_residual(u, kernel, region=None):
    """ Node-wise div A(x, grad u), nonnegative on a region iff u is a discrete subsolution there

    With a region the residual is reported on its nodes only, zero elsewhere.
    """

    residual = divergence(flux_field(u, kernel))

    if region is None:
        return residual

    return GridFunction(u.grid, np.where(region.mask, residual.values, 0.0))


def gradient_bounds(u, kernel):
    """ Both sides of the lambda-ellipticity sandwich around p * F(u) """

    q = kernel.p
    norm = gradient_norm(u, q)
    return norm / kernel.ellipticity, q * energy(u, kernel), kernel.ellipticity * norm
