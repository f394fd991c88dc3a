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


class GradflowError(Exception):
    """ Base class for all domain errors raised by the toolkit """


class NonConvergence(GradflowError):
    """ Newton iteration of a proximal step did not reach the requested tolerance """

    def __init__(self, message, iterations=0, residual=float("nan"), knot_index=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.knot_index = knot_index

    def at_knot(self, knot_index):
        """ Return copy of the error tagged with the failing time knot """

        return NonConvergence(f"{self.args[0]} at knot {knot_index}", self.iterations, self.residual, knot_index)


class DomainTooSmall(GradflowError):
    """ Solution above threshold reached the grid boundary, box must be enlarged """

    def __init__(self, message, knot_index=None, radius=float("nan")):
        super().__init__(message)
        self.knot_index = knot_index
        self.radius = radius


class EllipticityViolation(GradflowError):
    """ Coefficient matrix outside of the declared [1/lambda, lambda] window """


class CGNonConvergence(GradflowError):
    """ Conjugate gradient inner solve failed """


class QuadratureUnderflow(GradflowError):
    """ All subordination nodes are beyond the equilibrium horizon of the heat flow """


class EmptyInterior(GradflowError):
    """ Detachment set has no node whose full stencil lies inside it """


class NonMonotoneStencil(GradflowError):
    """ Discrete operator of the kernel breaks the comparison principle on this grid """


class ParseError(GradflowError):
    """ Malformed configuration file or flag """

    def __init__(self, message, context=""):
        super().__init__(f"{context}: {message}" if context else message)
        self.context = context


class ValidationError(GradflowError):
    """ Configuration value violating a documented invariant """
