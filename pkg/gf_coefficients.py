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

from gf_errors import EllipticityViolation

# Relative slack on the [1/lambda, lambda] window, covers rounding in generated fields
ELLIPTICITY_SLACK = 1e-12


class CoefficientField:
    """ Symmetric positive definite conductivity A(x), one matrix per anchored cell

    1D fields store one scalar per cell. 2D fields store the three entries (a11, a12, a22)
    so symmetry holds exactly by construction.
    """

    def __init__(self, grid, entries, ellipticity=None):
        """ Class constructor """

        entries = np.array(entries, dtype=float)
        expected = (1 if grid.dim == 1 else 3) * int(np.prod(grid.cell_shape))

        if entries.size != expected:
            raise ValueError(f"CoefficientField on {grid!r} needs {expected} entries, got {entries.size}")

        if not np.all(np.isfinite(entries)):
            raise ValueError("CoefficientField entries must be finite")

        self.grid = grid
        self.entries = entries.reshape(grid.cell_shape if grid.dim == 1 else (3,) + grid.cell_shape)
        self.entries.setflags(write=False)

        low, high = self.eigenvalue_bounds()
        self.ellipticity = float(ellipticity) if ellipticity is not None else max(1.0, high, 1.0 / low if low > 0 else np.inf)

        self.check_ellipticity()

    def __repr__(self):
        return f"CoefficientField({self.grid!r}, ellipticity={self.ellipticity:.6g})"

    def eigenvalues(self):
        """ Per-cell eigenvalues (low, high) from the closed form of a symmetric 2x2 matrix """

        if self.grid.dim == 1:
            return self.entries, self.entries

        a11, a12, a22 = self.entries
        mean = (a11 + a22) / 2
        radius = np.hypot((a11 - a22) / 2, a12)
        return mean - radius, mean + radius

    def eigenvalue_bounds(self):
        low, high = self.eigenvalues()
        return float(np.min(low)), float(np.max(high))

    def check_ellipticity(self):
        """ Verify lambda^-1 |xi|^2 <= A xi . xi and |A xi| <= lambda |xi| in every cell """

        if self.ellipticity < 1.0:
            raise EllipticityViolation(f"Ellipticity constant must be at least 1, got {self.ellipticity}")

        low, high = self.eigenvalue_bounds()

        if not low > 0:
            raise EllipticityViolation(f"Coefficient field is not positive definite, smallest eigenvalue {low:.6g}")

        if low < (1.0 - ELLIPTICITY_SLACK) / self.ellipticity:
            raise EllipticityViolation(f"Smallest eigenvalue {low:.6g} below 1/lambda = {1.0 / self.ellipticity:.6g}")

        if high > (1.0 + ELLIPTICITY_SLACK) * self.ellipticity:
            raise EllipticityViolation(f"Largest eigenvalue {high:.6g} above lambda = {self.ellipticity:.6g}")

    def apply(self, xi):
        """ Multiply anchored gradient vectors (dim, *cell_shape) by A cell by cell """

        if self.grid.dim == 1:
            return self.entries[None] * xi

        a11, a12, a22 = self.entries
        return np.stack((a11 * xi[0] + a12 * xi[1], a12 * xi[0] + a22 * xi[1]))

    def blocks(self):
        """ Flat per-cell matrix entries ((a00, a01), (a10, a11)) used for sparse assembly """

        if self.grid.dim == 1:
            return ((self.entries.ravel(),),)

        a11, a12, a22 = (_.ravel() for _ in self.entries)
        return ((a11, a12), (a12, a22))

    @classmethod
    def constant(cls, grid, matrix, ellipticity=None):
        matrix = np.atleast_2d(np.array(matrix, dtype=float))

        if grid.dim == 1:
            return cls(grid, np.full(grid.cell_shape, matrix[0, 0]), ellipticity)

        if not np.array_equal(matrix, matrix.T):
            raise EllipticityViolation("Coefficient matrix must be symmetric")

        entries = [np.full(grid.cell_shape, matrix[0, 0]), np.full(grid.cell_shape, matrix[0, 1]), np.full(grid.cell_shape, matrix[1, 1])]
        return cls(grid, entries, ellipticity)

    @classmethod
    def identity(cls, grid):
        return cls.constant(grid, np.eye(grid.dim), ellipticity=1.0)

    @classmethod
    def checkerboard(cls, grid, ellipticity, block=1):
        """ Isotropic field alternating between lambda * I and I / lambda on square blocks """

        parity = sum(np.indices(grid.cell_shape) // block) % 2
        scalar = np.where(parity == 0, float(ellipticity), 1.0 / ellipticity)

        if grid.dim == 1:
            return cls(grid, scalar, ellipticity)

        return cls(grid, [scalar, np.zeros(grid.cell_shape), scalar], ellipticity)

    @classmethod
    def random_spd(cls, grid, ellipticity, rng, block=1):
        """ Piecewise constant random field with eigenvalues in [1/lambda, lambda]

        1D cells draw a log-uniform scalar. 2D cells draw log-uniform diagonals a11, a22 in
        [lambda^-1/2, lambda^1/2] and a nonpositive a12 = -s min(a11, a22), s in [0, 1 - lambda^-1/2].
        Such fields are diagonally dominant with a12 <= 0, so the assembled operator is an M-matrix
        and the discrete comparison principle holds.
        """

        coarse = tuple(-(-_ // block) for _ in grid.cell_shape)
        spread = np.log(ellipticity)

        def refine(array):
            for axis in range(grid.dim):
                array = np.repeat(array, block, axis=axis)
            return array[tuple(slice(0, _) for _ in grid.cell_shape)]

        if grid.dim == 1:
            return cls(grid, refine(np.exp(rng.uniform(-spread, spread, coarse))), ellipticity)

        a11 = np.exp(rng.uniform(-spread / 2, spread / 2, coarse))
        a22 = np.exp(rng.uniform(-spread / 2, spread / 2, coarse))
        a12 = -rng.uniform(0.0, 1.0 - ellipticity**-0.5, coarse) * np.minimum(a11, a22)

        return cls(grid, [refine(a11), refine(a12), refine(a22)], ellipticity)

    def monotone(self):
        """ Every cell has a12 <= 0 and a11, a22 >= |a12|, the per-cell condition for an M-matrix operator """

        if self.grid.dim == 1:
            return True

        a11, a12, a22 = self.entries
        slack = ELLIPTICITY_SLACK * np.maximum(a11, a22)
        return bool(np.all(a12 <= slack) and np.all(a11 + slack >= np.abs(a12)) and np.all(a22 + slack >= np.abs(a12)))

    def save(self, path):
        """ Write one row per cell: 'a' in 1D, 'a11 a12 a22' in 2D """

        rows = self.entries.reshape(-1, 1) if self.grid.dim == 1 else self.entries.reshape(3, -1).T
        np.savetxt(path, rows, fmt="%.17g")

    @classmethod
    def load(cls, grid, path, ellipticity=None):
        """ Read the format written by save() """

        rows = np.loadtxt(path, ndmin=2)
        columns = 1 if grid.dim == 1 else 3

        if rows.shape[1] != columns:
            raise ValueError(f"Coefficient file {path} has {rows.shape[1]} columns, expected {columns}")

        if rows.shape[0] != int(np.prod(grid.cell_shape)):
            raise ValueError(f"Coefficient file {path} has {rows.shape[0]} rows, expected one per cell ({int(np.prod(grid.cell_shape))})")

        return cls(grid, rows.ravel() if grid.dim == 1 else rows.T, ellipticity)

    def matrix_at(self, cell):
        """ Coefficient matrix of a single anchored cell """

        cell = tuple(np.atleast_1d(cell))

        if self.grid.dim == 1:
            return np.array([[self.entries[cell]]])

        a11, a12, a22 = (_[cell] for _ in self.entries)
        return np.array([[a11, a12], [a12, a22]])
