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

# Defaults of the geometric grid, t_min plays the role of the smoothing time
T_MIN = 1e-4
RATIO = 1.25
T_MAX = 10.0


class TimeGrid:
    """ Strictly increasing time knots starting at t = 0 """

    def __init__(self, knots, t_min=None, ratio=None, t_max=None):
        """ Class constructor """

        knots = np.array(knots, dtype=float)

        if knots.ndim != 1 or knots.size < 1 or knots[0] != 0.0:
            raise ValueError("TimeGrid knots must be a nonempty sequence starting at 0")

        if not np.all(np.isfinite(knots)) or np.any(np.diff(knots) <= 0):
            raise ValueError("TimeGrid knots must be finite and strictly increasing")

        self.knots = knots
        self.knots.setflags(write=False)
        self.t_min = t_min
        self.ratio = ratio
        self.t_max = t_max if t_max is not None else float(knots[-1])

    def __repr__(self):
        if self.ratio is not None:
            return f"TimeGrid(t_min={self.t_min:g}, ratio={self.ratio:g}, t_max={self.t_max:g}, knots={len(self)})"
        return f"TimeGrid(knots={len(self)}, t_end={self.knots[-1]:g})"

    def __len__(self):
        return self.knots.size

    def __iter__(self):
        return iter(self.knots)

    @property
    def steps(self):
        """ Step sizes tau_k = t_(k+1) - t_k """

        return np.diff(self.knots)

    @classmethod
    def geometric(cls, t_min=T_MIN, ratio=RATIO, t_max=T_MAX):
        """ Knots 0, t_min, t_min r, t_min r^2, ... up to t_max (t_max itself only when it is a knot) """

        if not t_min > 0:
            raise ValueError(f"TimeGrid t_min must be positive, got {t_min}")

        if not ratio > 1:
            raise ValueError(f"TimeGrid ratio must exceed 1, got {ratio}")

        if not t_max >= t_min:
            raise ValueError(f"TimeGrid t_max must be at least t_min, got {t_max} < {t_min}")

        count = int(np.floor(np.log(t_max / t_min) / np.log(ratio) * (1 + 1e-12))) + 1
        knots = t_min * ratio ** np.arange(count)
        return cls(np.concatenate(([0.0], knots[knots <= t_max * (1 + 1e-12)])), t_min=t_min, ratio=ratio, t_max=t_max)

    @classmethod
    def uniform(cls, step, t_end):
        """ Equidistant knots 0, step, 2 step, ... , t_end """

        count = int(round(t_end / step))

        if count < 1 or not np.isclose(count * step, t_end, rtol=1e-9):
            raise ValueError(f"TimeGrid t_end {t_end} is not a multiple of step {step}")

        return cls(np.linspace(0.0, t_end, count + 1))

    def truncated(self, t_max):
        """ Same grid restricted to knots <= t_max """

        return TimeGrid(self.knots[self.knots <= t_max * (1 + 1e-12)], t_min=self.t_min, ratio=self.ratio, t_max=t_max)
