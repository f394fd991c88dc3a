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



import functools

import loguru
import numpy as np
import scipy.linalg
import scipy.sparse

from gf_errors import EllipticityViolation
from gf_grid import GridFunction

logger = loguru.logger.bind(stage="operator")

SPECTRAL_CAP = 4096

# Off-diagonal entries below this fraction of the largest diagonal entry count as zero
MONOTONE_SLACK = 1e-12


class SpectralDecomposition:
    """ Eigenpairs of -L, eigenvectors orthonormal in the plain (unweighted) dot product """

    def __init__(self, eigenvalues, eigenvectors):
        """ Class constructor """

        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    def __repr__(self):
        return f"SpectralDecomposition(modes={self.eigenvalues.size}, max={self.eigenvalues.max():.6g})"

    def apply(self, multiplier, values):
        """ phi(-L) applied to flat node values, multiplier is a vector over the eigenvalues """

        return self.eigenvectors @ (multiplier * (self.eigenvectors.T @ values))

    def eigenfunction(self, index, cell_volume):
        """ Mode normalized in the h^n weighted inner product """

        return self.eigenvectors[:, index] / np.sqrt(cell_volume)


class EllipticOperator:
    """ Symmetric divergence form operator L = div(A grad) assembled on a grid """

    from gf_heat import crank_nicolson, heat_apply, kernel_projection
    from gf_heat_kernel import gaussian_certificate, heat_kernel_column
    from gf_operator_bounds import (
        dissipation_check,
        hardy_littlewood_domination,
        l2_decay_ratio,
        operator_bound_check,
        semigroup_law_error,
    )
    from gf_poisson import poisson_apply

    def __init__(self, grid, coefficients, matrix, spectral_cap=SPECTRAL_CAP):
        """ Class constructor """

        self.grid = grid
        self.coefficients = coefficients
        self.matrix = matrix
        self.spectral_cap = int(spectral_cap)

        self.logger = logger

    def __repr__(self):
        return f"EllipticOperator({self.grid!r}, ellipticity={self.ellipticity:g})"

    @property
    def ellipticity(self):
        return self.coefficients.ellipticity

    @property
    def spectral(self):
        """ True when the dense eigendecomposition path is used """

        return self.grid.size <= self.spectral_cap

    @functools.cached_property
    def monotone(self):
        """ -L is an M-matrix, every off-diagonal entry nonpositive, so the discrete comparison principle holds """

        diagonal = self.matrix.diagonal()
        off_diagonal = self.matrix - scipy.sparse.diags(diagonal)
        return bool(off_diagonal.max() <= MONOTONE_SLACK * np.abs(diagonal).max())

    @functools.cached_property
    def decomposition(self):
        """ Dense eigendecomposition of -L, valid under the spectral cap only """

        if not self.spectral:
            raise ValueError(f"Grid with {self.grid.size} nodes exceeds the spectral cap {self.spectral_cap}")

        eigenvalues, eigenvectors = scipy.linalg.eigh(self.matrix.toarray())
        self.logger.debug(f"Spectral decomposition of {self.grid.size} modes, smallest {eigenvalues[0]:.3e}")

        # Null modes come out as tiny negative rounding noise
        return SpectralDecomposition(np.clip(eigenvalues, 0.0, None), eigenvectors)

    def apply(self, u):
        """ L u as a GridFunction """

        return GridFunction(self.grid, -(self.matrix @ u.flat()))

    def quadratic_form(self, u):
        """ <-L u, u> in the h^n weighted inner product """

        values = u.flat()
        return float(values @ (self.matrix @ values) * self.grid.cell_volume)


def assemble(grid, coefficients, spectral_cap=SPECTRAL_CAP):
    """ Assemble -L = D^T A D, symmetrized so that the stored matrix is exactly symmetric """

    if coefficients.grid != grid:
        raise ValueError(f"Coefficient field lives on {coefficients.grid!r}, expected {grid!r}")

    coefficients.check_ellipticity()

    difference = grid.difference_matrix
    weights = scipy.sparse.bmat([[scipy.sparse.diags(column) for column in row] for row in coefficients.blocks()])
    stiffness = difference.T @ weights @ difference
    stiffness = ((stiffness + stiffness.T) / 2).tocsr()

    if np.any(stiffness.diagonal() < 0):
        raise EllipticityViolation("Assembled operator has negative diagonal entries")

    logger.debug(f"Assembled operator with {stiffness.nnz} nonzeros on {grid!r}")
    return EllipticOperator(grid, coefficients, stiffness, spectral_cap)
