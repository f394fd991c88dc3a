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

import numpy as np
import scipy.ndimage
import scipy.sparse

PERIODIC = "periodic"
DIRICHLET_ZERO = "dirichlet"

BOUNDARIES = {PERIODIC, DIRICHLET_ZERO}


class Grid:
    """ Uniform 1D / 2D lattice with spacing h and boundary convention

    Periodic grids wrap indices. DirichletZero grids carry an implicit zero ghost layer
    around the nodes; every axis then has n + 1 edge slots, the first one anchored at the
    low ghost node.
    """

    def __init__(self, shape, h=1.0, boundary=PERIODIC):
        """ Class constructor """

        shape = tuple(int(_) for _ in np.atleast_1d(shape))

        if len(shape) not in {1, 2}:
            raise ValueError(f"Grid dimension must be 1 or 2, got {len(shape)}")

        if boundary not in BOUNDARIES:
            raise ValueError(f"Unknown boundary {boundary!r}, expected one of {sorted(BOUNDARIES)}")

        # Single interior node is a valid Dirichlet box, periodic wrap needs two
        if min(shape) < (2 if boundary == PERIODIC else 1):
            raise ValueError(f"Grid shape {shape} too small for {boundary} boundary")

        if not (np.isfinite(h) and h > 0):
            raise ValueError(f"Grid spacing must be positive, got {h}")

        self.shape = shape
        self.dim = len(shape)
        self.h = float(h)
        self.boundary = boundary

    def __repr__(self):
        return f"Grid(shape={self.shape}, h={self.h}, boundary={self.boundary!r})"

    def __eq__(self, other):
        return isinstance(other, Grid) and (self.shape, self.h, self.boundary) == (other.shape, other.h, other.boundary)

    def __hash__(self):
        return hash((self.shape, self.h, self.boundary))

    @property
    def periodic(self):
        return self.boundary == PERIODIC

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def cell_shape(self):
        """ Shape of per-axis edge storage, one slot per anchor node """

        return self.shape if self.periodic else tuple(_ + 1 for _ in self.shape)

    @property
    def cell_volume(self):
        return self.h**self.dim

    @property
    def box_length(self):
        """ Per-axis extent of the box, ghost layer included for Dirichlet grids """

        return tuple(self.h * (_ if self.periodic else _ + 1) for _ in self.shape)

    def coordinates(self):
        """ Node coordinates as meshgrid arrays, centered on the middle of the box """

        axes = []
        for n, length in zip(self.shape, self.box_length):
            index = np.arange(n, dtype=float) + (0.0 if self.periodic else 1.0)
            axes.append(index * self.h - (length / 2 if not self.periodic else (n // 2) * self.h))
        return np.meshgrid(*axes, indexing="ij")

    def node_distance(self):
        """ Euclidean distance between all node pairs, wrapped on periodic grids """

        indices = np.indices(self.shape).reshape(self.dim, -1).T.astype(float)
        return self._distance(indices[:, None, :] - indices[None, :, :])

    def distance_from(self, index):
        """ Distance of every node to the node with flat index, as a node shaped array """

        indices = np.indices(self.shape).reshape(self.dim, -1).T.astype(float)
        origin = np.array(np.unravel_index(int(index), self.shape), dtype=float)
        return self._distance(indices - origin).reshape(self.shape)

    def _distance(self, delta):
        delta = np.abs(delta)
        if self.periodic:
            period = np.array(self.shape, dtype=float)
            delta = np.minimum(delta, period - delta)
        return self.h * np.sqrt((delta**2).sum(axis=-1))

    @functools.cached_property
    def difference_matrix(self):
        """ Sparse forward difference operator, nodes -> (axis, anchor) edge slots """

        differences = [_axis_difference(n, self.h, self.periodic) for n in self.shape]
        embeddings = [_axis_embedding(n, self.periodic) for n in self.shape]

        if self.dim == 1:
            return differences[0].tocsr()

        blocks = [
            scipy.sparse.kron(differences[0], embeddings[1]),
            scipy.sparse.kron(embeddings[0], differences[1]),
        ]
        return scipy.sparse.vstack(blocks).tocsr()


def _axis_difference(n, h, periodic):
    """ One dimensional forward difference, edge slot k spans anchor k (k - 1 on Dirichlet) to its successor """

    if periodic:
        index = np.arange(n)
        rows = np.concatenate((index, index))
        cols = np.concatenate((index, (index + 1) % n))
        data = np.concatenate((-np.ones(n), np.ones(n))) / h
        return scipy.sparse.coo_matrix((data, (rows, cols)), shape=(n, n))

    slots = np.arange(n + 1)
    upper = slots[slots < n]
    lower = slots[slots >= 1]
    rows = np.concatenate((upper, lower))
    cols = np.concatenate((upper, lower - 1))
    data = np.concatenate((np.ones(upper.size), -np.ones(lower.size))) / h
    return scipy.sparse.coo_matrix((data, (rows, cols)), shape=(n + 1, n))


def _axis_embedding(n, periodic):
    """ Map nodes onto anchor slots along a transverse axis (ghost anchor row stays empty) """

    if periodic:
        return scipy.sparse.identity(n, format="coo")

    slots = np.arange(1, n + 1)
    return scipy.sparse.coo_matrix((np.ones(n), (slots, slots - 1)), shape=(n + 1, n))


class GridFunction:
    """ One real value per node """

    def __init__(self, grid, values):
        """ Class constructor """

        values = np.array(values, dtype=float)

        if values.size != grid.size:
            raise ValueError(f"GridFunction needs {grid.size} values, got {values.size}")

        if not np.all(np.isfinite(values)):
            raise ValueError("GridFunction values must be finite")

        self.grid = grid
        self.values = values.reshape(grid.shape)
        self.values.setflags(write=False)

    def __repr__(self):
        return f"GridFunction({self.grid!r}, min={self.values.min():.6g}, max={self.values.max():.6g})"

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _raw(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _raw(other))

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def zeros(cls, grid):
        return cls.constant(grid, 0.0)

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())

    def flat(self):
        return self.values.ravel()


class EdgeField:
    """ One real value per directed edge per axis, stored as (dim, *cell_shape) """

    def __init__(self, grid, values):
        """ Class constructor """

        values = np.array(values, dtype=float)
        expected = grid.dim * int(np.prod(grid.cell_shape))

        if values.size != expected:
            raise ValueError(f"EdgeField needs {expected} values, got {values.size}")

        if not np.all(np.isfinite(values)):
            raise ValueError("EdgeField values must be finite")

        self.grid = grid
        self.values = values.reshape((grid.dim,) + grid.cell_shape)
        self.values.setflags(write=False)

    def __repr__(self):
        return f"EdgeField({self.grid!r}, max_abs={np.abs(self.values).max():.6g})"

    def magnitude(self):
        """ Euclidean length of the anchored gradient vector in every cell """

        return np.sqrt((self.values**2).sum(axis=0))

    def flat(self):
        return self.values.ravel()


def _raw(other):
    return other.values if isinstance(other, GridFunction) else other


def gradient(u):
    """ Forward differences with wrap (Periodic) or zero ghosts (DirichletZero) """

    return EdgeField(u.grid, u.grid.difference_matrix @ u.flat())


def divergence(g):
    """ Discrete divergence, exact negative adjoint of gradient """

    return GridFunction(g.grid, -(g.grid.difference_matrix.T @ g.flat()))


def inner(a, b):
    """ h^n weighted inner product of two node or two edge fields """

    if type(a) is not type(b):
        raise TypeError(f"Cannot pair {type(a).__name__} with {type(b).__name__}")

    return float(np.dot(a.flat(), b.flat()) * a.grid.cell_volume)


def l2_norm(u):
    return float(np.sqrt(inner(u, u)))


def l2_norm_sq(u):
    return inner(u, u)


def gradient_norm(u, q=2.0):
    """ h^n weighted sum of |grad u|^q over cells """

    return float((gradient(u).magnitude() ** q).sum() * u.grid.cell_volume)


def node_gradient_magnitude(u):
    """ Node value is the largest |edge difference| over the incident edges """

    grid = u.grid
    edges = np.abs(gradient(u).values)
    magnitude = np.zeros(grid.shape)

    for axis in range(grid.dim):
        if grid.periodic:
            outgoing = edges[axis]
            incoming = np.roll(edges[axis], 1, axis=axis)
        else:
            outgoing = edges[axis][(slice(1, None),) * grid.dim]
            incoming = edges[axis][tuple(slice(None, -1) if _ == axis else slice(1, None) for _ in range(grid.dim))]
        magnitude = np.maximum(magnitude, np.maximum(outgoing, incoming))

    return GridFunction(grid, magnitude)


def hardy_littlewood_max(u):
    """ Discrete Hardy-Littlewood maximal function of |u|

    1D uses every interval containing the node (non-centered), 2D uses centered square
    windows. On Dirichlet grids the data is extended by zero outside of the box.
    """

    values = np.abs(u.values)

    if u.grid.dim == 1:
        return GridFunction(u.grid, _interval_max(values, u.grid.periodic))

    return GridFunction(u.grid, _square_max(values, u.grid.periodic))


def _interval_max(values, periodic):
    n = values.size
    best = values.copy()

    if periodic:
        sums = np.concatenate(([0.0], np.cumsum(np.concatenate((values, values)))))
    else:
        sums = np.concatenate(([0.0], np.cumsum(values)))

    for length in range(2, n + 1):
        # means[a] is the average over nodes a .. a + length - 1
        if periodic:
            means = (sums[length : length + n] - sums[:n]) / length
            mode = "wrap"
        else:
            means = np.full(n, -np.inf)
            means[: n - length + 1] = (sums[length:] - sums[:-length]) / length
            mode = "constant"

        # Node x is covered by the windows starting at x - length + 1 .. x
        covering = scipy.ndimage.maximum_filter1d(means, size=length, mode=mode, cval=-np.inf, origin=(length - 1) - length // 2)
        best = np.maximum(best, covering)

    return best


def _square_max(values, periodic):
    best = values.copy()
    radius_max = (min(values.shape) - 1) // 2 if periodic else max(values.shape) - 1

    for radius in range(1, radius_max + 1):
        means = scipy.ndimage.uniform_filter(values, size=2 * radius + 1, mode="wrap" if periodic else "constant", cval=0.0)
        best = np.maximum(best, means)

    return best
