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

from gf_grid import GridFunction
from gf_report import CheckReport

# Continuum rate of the identity kernel is 1/4, half of it leaves room for lattice effects
CALIBRATION_RATE = 1 / 8
CALIBRATION_SLACK = 2.0

# Entries below this fraction of the diagonal value are lattice tails, not Gaussian
TAIL_FLOOR = 1e-10

MIN_VALUE = -1e-12
MASS_TOL = 1e-10
SYMMETRY_TOL = 1e-10

CERTIFICATE_FIELDS = ["t", "y_index", "min_value", "mass", "calibrated_C", "calibrated_c", "max_bound_ratio"]


def heat_kernel_column(self, y, t):
    """ K_t(., y) = H_t (delta_y / h^n), the heat kernel with the second argument frozen at node y """

    if not t > 0:
        raise ValueError(f"Heat kernel needs t > 0, got {t}")

    if not 0 <= int(y) < self.grid.size:
        raise ValueError(f"Node index {y} outside of {self.grid!r}")

    delta = np.zeros(self.grid.size)
    delta[int(y)] = 1.0 / self.grid.cell_volume
    return self.heat_apply(GridFunction(self.grid, delta), t)


def _ratios(grid, column, y, t, rate):
    """ K_t(x, y) t^(n/2) exp(rate d^2 / t) over the entries above the tail floor """

    values = column.values
    keep = values >= TAIL_FLOOR * values.flat[int(y)]
    distance = grid.distance_from(y)
    return values[keep] * t ** (grid.dim / 2) * np.exp(rate * distance[keep] ** 2 / t)


def _calibrate(self, times, nodes):
    """ Gaussian constants (C, c) observed on the identity operator of the same grid """

    from gf_coefficients import CoefficientField
    from gf_operator import assemble

    identity = assemble(self.grid, CoefficientField.identity(self.grid), self.spectral_cap)
    constant = max(float(_ratios(self.grid, identity.heat_kernel_column(y, t), y, t, CALIBRATION_RATE).max()) for t in times for y in nodes)
    return constant, CALIBRATION_RATE


def gaussian_certificate(self, times, nodes, calibration=None):
    """ Certify K_t(x, y) <= C t^(-n/2) exp(-c d(x, y)^2 / t) together with positivity, mass and symmetry

    Constants are calibrated on A = I and scaled to the ellipticity as (C lambda^(n/2) slack, c / lambda).
    Returns the certificate rows and the overall CheckReport.
    """

    identity_constant, identity_rate = calibration or _calibrate(self, times, nodes)
    constant = identity_constant * self.ellipticity ** (self.grid.dim / 2) * CALIBRATION_SLACK
    rate = identity_rate / self.ellipticity

    rows = []
    worst_ratio = 0.0
    worst_min = np.inf
    worst_mass = 0.0
    worst_symmetry = 0.0

    for t in times:
        columns = {int(y): self.heat_kernel_column(y, t) for y in nodes}

        for y, column in columns.items():
            mass = float(column.values.sum() * self.grid.cell_volume)
            ratio = float(_ratios(self.grid, column, y, t, rate).max()) / constant
            rows.append(
                {
                    "t": float(t),
                    "y_index": y,
                    "min_value": column.min(),
                    "mass": mass,
                    "calibrated_C": constant,
                    "calibrated_c": rate,
                    "max_bound_ratio": ratio,
                }
            )

            worst_ratio = max(worst_ratio, ratio)
            worst_min = min(worst_min, column.min())
            worst_mass = max(worst_mass, mass - 1.0 if not self.grid.periodic else abs(mass - 1.0))

        for y, column in columns.items():
            for x, other in columns.items():
                scale = max(1.0, column.max())
                worst_symmetry = max(worst_symmetry, abs(column.values.flat[x] - other.values.flat[y]) / scale)

    details = {"max_bound_ratio": worst_ratio, "min_value": worst_min, "mass_error": worst_mass, "asymmetry": worst_symmetry}
    passed = worst_ratio <= 1.0 and worst_min >= MIN_VALUE and worst_mass <= MASS_TOL and worst_symmetry <= SYMMETRY_TOL

    self.logger.info(f"Kernel certificate C={constant:.4g} c={rate:.4g}, worst bound ratio {worst_ratio:.4g}")
    return rows, CheckReport("kernel-certificate", bool(passed), 1.0 - worst_ratio, details)
