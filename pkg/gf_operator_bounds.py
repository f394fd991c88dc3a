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

from gf_energy import QuadraticKernel, energy
from gf_grid import gradient_norm, hardy_littlewood_max, l2_norm, l2_norm_sq
from gf_report import CheckReport

# sup of x exp(-2x) and of x^2 exp(-2x) over x >= 0
HEAT_CONSTANT = 1 / (2 * np.e)
POISSON_CONSTANT = 4 / np.e**2
POISSON_SHARP = np.exp(-2.0)

DISSIPATION_SLACK = 1e-10
DOMINATION_LIMIT = 50.0


def sup_grid_search(function, low, high, points=1001, rounds=8):
    """ Maximum of a unimodal scalar function by repeatedly refined grid search """

    for _ in range(rounds):
        grid = np.linspace(low, high, points)
        values = function(grid)
        best = int(np.argmax(values))
        step = grid[1] - grid[0]
        low, high = max(grid[0], grid[best] - step), min(grid[-1], grid[best] + step)

    return float(values[best]), float(grid[best])


def _semigroup(self, source):
    if source == "heat":
        return self.heat_apply
    if source == "poisson":
        return lambda f, t: self.poisson_apply(f, t, "spectral" if self.spectral else "subordination")
    raise ValueError(f"Unknown semigroup {source!r}")


def operator_bound_check(self, f, t):
    """ Gradient bounds t |grad H_t f|^2 <= lambda/(2e) |f|^2 and t^2 |grad P_t f|^2 <= 4 lambda/e^2 |f|^2 """

    norm_sq = l2_norm_sq(f)
    heat = t * gradient_norm(self.heat_apply(f, t), 2.0)
    poisson = t**2 * gradient_norm(_semigroup(self, "poisson")(f, t), 2.0)

    heat_bound = self.ellipticity * HEAT_CONSTANT * norm_sq
    poisson_bound = self.ellipticity * POISSON_CONSTANT * norm_sq
    scale = max(norm_sq, 1e-300)

    details = {
        "heat_ratio": heat / max(heat_bound, 1e-300),
        "poisson_ratio": poisson / max(poisson_bound, 1e-300),
        "poisson_sharp_ratio": poisson / max(self.ellipticity * POISSON_SHARP * norm_sq, 1e-300),
    }
    passed = heat <= heat_bound * (1 + 1e-12) and poisson <= poisson_bound * (1 + 1e-12)
    return CheckReport("operator-bounds", bool(passed), min(heat_bound - heat, poisson_bound - poisson) / scale, details)


def dissipation_check(self, f, timegrid):
    """ Energies F(H_t f) and F(P_t f) are nonincreasing along the knots """

    kernel = QuadraticKernel(self.coefficients)
    worst = -np.inf
    energies = {}

    for source in ("heat", "poisson"):
        apply = _semigroup(self, source)
        energies[source] = [energy(apply(f, t), kernel) for t in timegrid]
        worst = max(worst, float(np.max(np.diff(energies[source]), initial=-np.inf)))

    return CheckReport("dissipation", worst <= DISSIPATION_SLACK, -worst, {"heat": energies["heat"], "poisson": energies["poisson"]})


def hardy_littlewood_domination(self, f, timegrid, source="heat"):
    """ Certified constant of |S_t f| <= C M f, the largest observed ratio over knots and nodes """

    maximal = hardy_littlewood_max(f).values
    apply = _semigroup(self, source)
    ratio = 0.0

    for t in timegrid:
        values = np.abs(apply(f, t).values)
        ratio = max(ratio, float(np.max(np.divide(values, maximal, out=np.zeros_like(values), where=maximal > 0))))

    return CheckReport("hl-domination", ratio <= DOMINATION_LIMIT, DOMINATION_LIMIT - ratio, {"constant": ratio})


def semigroup_law_error(self, f, s, t, source="heat"):
    """ Relative l2 distance between S_s S_t f and S_(s+t) f """

    apply = _semigroup(self, source)
    return l2_norm(apply(apply(f, t), s) - apply(f, s + t)) / max(l2_norm(f), 1e-300)


def l2_decay_ratio(self, f, t):
    """ sup |H_t f| t^(n/4) / |f|, the constant of the l2 to sup smoothing estimate """

    return float(np.abs(self.heat_apply(f, t).values).max() * t ** (self.grid.dim / 4) / max(l2_norm(f), 1e-300))
