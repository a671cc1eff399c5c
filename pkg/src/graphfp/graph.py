"""Finite graphs representing discretized spatial domains.

A graph stores its edges as an explicit *directed* list containing both
orientations of every undirected edge, so that sums over ``(i, j) in E``
appearing in the flux, dissipation and inner-product formulas can be
evaluated as literal loops over one array without x2 bookkeeping.

Builders cover uniformly spaced 1-d paths (zero-flux boundary), 1-d cycles
(periodic boundary) and 2-d rectangular lattices (zero-flux or periodic),
which are the topologies used by the solvers and the experiment presets.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True)
class Graph:
    """Immutable finite graph with uniform spacing.

    Attributes
    ----------
    n : int
        Number of vertices, indexed 0..n-1.
    edges : ndarray (m, 2) int
        Directed edge list. Both orientations of every undirected edge are
        present, so m is twice the undirected edge count.
    dx : float
        Uniform spacing between adjacent vertices.
    coords : ndarray (n, d) float
        Vertex coordinates in R^d.
    directions : ndarray (m,) int or None
        Coordinate direction of each edge (0 = x, 1 = y) for lattice
        products; None for graphs without a direction partition.
    """

    n: int
    edges: np.ndarray
    dx: float
    coords: np.ndarray
    directions: np.ndarray | None = None

    def __post_init__(self):
        edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64))
        coords = np.atleast_2d(np.asarray(self.coords, dtype=np.float64))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "coords", coords)
        if self.directions is not None:
            dirs = np.ascontiguousarray(np.asarray(self.directions, dtype=np.int64))
            object.__setattr__(self, "directions", dirs)
        for arr in (self.edges, self.coords, self.directions):
            if arr is not None:
                arr.setflags(write=False)
        if self.n <= 0:
            raise ValueError("graph needs at least one vertex")
        if self.edges.ndim != 2 or self.edges.shape[1] != 2:
            raise ValueError("edges must be an (m, 2) array")
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.coords.shape[0] != self.n:
            raise ValueError("coords must have one row per vertex")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-loops are not allowed")
        if self.directions is not None and self.directions.shape[0] != self.edges.shape[0]:
            raise ValueError("directions must have one entry per directed edge")

    @property
    def src(self):
        """Source vertex of each directed edge."""
        return self.edges[:, 0]

    @property
    def dst(self):
        """Destination vertex of each directed edge."""
        return self.edges[:, 1]

    @property
    def m(self):
        """Number of directed edges (twice the undirected count)."""
        return self.edges.shape[0]

    @property
    def dim(self):
        """Spatial dimension of the vertex coordinates."""
        return self.coords.shape[1]

    @cached_property
    def degrees(self):
        """Vertex degrees, counting parallel edges with multiplicity."""
        return np.bincount(self.src, minlength=self.n)

    @cached_property
    def max_degree(self):
        """Maximal vertex degree, used by the explicit step-size rule."""
        return int(self.degrees.max())

    def neighbors(self, i):
        """Sorted, duplicate-free neighbor list of vertex i."""
        if not 0 <= i < self.n:
            raise ValueError(f"vertex index {i} out of range")
        return np.unique(self.dst[self.src == i])

    def directional_neighbors(self, i, v):
        """Sorted neighbors of vertex i along coordinate direction v."""
        if self.directions is None:
            raise ValueError("graph has no direction partition")
        if not 0 <= i < self.n:
            raise ValueError(f"vertex index {i} out of range")
        if not 0 <= v < self.dim:
            raise ValueError(f"direction {v} out of range")
        mask = (self.src == i) & (self.directions == v)
        return np.unique(self.dst[mask])

    def is_connected(self):
        if self.n == 1:
            return True
        if self.m == 0:
            return False
        adj = coo_matrix(
            (np.ones(self.m), (self.src, self.dst)), shape=(self.n, self.n)
        )
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1


def _both_orientations(und):
    """Stack an undirected edge array with its reversal."""
    und = np.asarray(und, dtype=np.int64).reshape(-1, 2)
    return np.vstack([und, und[:, ::-1]])


def build_path_lattice_1d(a, b, n):
    """Uniform 1-d lattice on [a, b] with n vertices and zero-flux ends.

    Vertices sit at a + i*dx with dx = (b - a)/(n - 1); consecutive
    vertices are joined, so interior degrees are 2 and the endpoints have
    degree 1.
    """
    if n < 2:
        raise ValueError("path lattice needs n >= 2")
    if not a < b:
        raise ValueError("need a < b")
    dx = (b - a) / (n - 1)
    coords = (a + dx * np.arange(n))[:, None]
    und = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    edges = _both_orientations(und)
    directions = np.zeros(edges.shape[0], dtype=np.int64)
    return Graph(n=n, edges=edges, dx=dx, coords=coords, directions=directions)


def build_cycle_1d(a, b, n):
    """Uniform cycle on [a, b]: the path lattice plus the wrap edge.

    The spacing dx = (b - a)/(n - 1) is shared by all edges including the
    wrap edge, matching the normalization under which the closed-form
    spectral rates for cycles are stated; the geometric wrap distance is
    not used.
    """
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    if not a < b:
        raise ValueError("need a < b")
    dx = (b - a) / (n - 1)
    coords = (a + dx * np.arange(n))[:, None]
    und = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    edges = _both_orientations(und)
    directions = np.zeros(edges.shape[0], dtype=np.int64)
    return Graph(n=n, edges=edges, dx=dx, coords=coords, directions=directions)


def _axis_points(lo, hi, dx):
    span = hi - lo
    steps = span / dx
    rounded = round(steps)
    if rounded < 1 or abs(steps - rounded) > 1e-9 * max(1.0, abs(steps)):
        raise ValueError(
            f"interval [{lo}, {hi}] is not an integer multiple of dx={dx}"
        )
    return int(rounded) + 1


def build_lattice_2d(xlo, xhi, ylo, yhi, dx, boundary="neumann"):
    """Cartesian product of two 1-d lattices on [xlo,xhi] x [ylo,yhi].

    Vertex k = iy*nx + ix sits at (xlo + ix*dx, ylo + iy*dx), i.e. the
    ordering is row-major with x varying fastest, which fixes the CSV
    output order. Edges carry a direction tag (0 = x, 1 = y). With
    boundary="periodic" wrap edges are added in both directions; a
    2-point periodic axis then contributes a parallel edge, kept with
    multiplicity.
    """
    if boundary not in ("neumann", "periodic"):
        raise ValueError("boundary must be 'neumann' or 'periodic'")
    if dx <= 0:
        raise ValueError("dx must be positive")
    if not (xlo < xhi and ylo < yhi):
        raise ValueError("need xlo < xhi and ylo < yhi")
    nx = _axis_points(xlo, xhi, dx)
    ny = _axis_points(ylo, yhi, dx)
    n = nx * ny
    ix = np.arange(n) % nx
    iy = np.arange(n) // nx
    coords = np.column_stack([xlo + dx * ix, ylo + dx * iy])

    und = []
    dirs = []
    # x-direction edges within each row
    left = iy * nx + ix
    keep = ix < nx - 1
    und.append(np.column_stack([left[keep], left[keep] + 1]))
    dirs.append(np.zeros(keep.sum(), dtype=np.int64))
    # y-direction edges within each column
    keep = iy < ny - 1
    und.append(np.column_stack([left[keep], left[keep] + nx]))
    dirs.append(np.ones(keep.sum(), dtype=np.int64))
    if boundary == "periodic":
        rows = np.arange(ny)
        und.append(np.column_stack([rows * nx + (nx - 1), rows * nx]))
        dirs.append(np.zeros(ny, dtype=np.int64))
        cols = np.arange(nx)
        und.append(np.column_stack([(ny - 1) * nx + cols, cols]))
        dirs.append(np.ones(nx, dtype=np.int64))
    und = np.vstack(und)
    dirs = np.concatenate(dirs)
    edges = _both_orientations(und)
    directions = np.concatenate([dirs, dirs])
    return Graph(n=n, edges=edges, dx=dx, coords=coords, directions=directions)


def subgraph(g, vertices):
    """Induced subgraph on the given vertex subset, with relabeled indices.

    Keeps dx, coordinates and direction tags. The result may be
    disconnected; callers that need connectivity should restrict to a
    connected component first (see largest_component_mask).
    """
    vertices = np.unique(np.asarray(vertices, dtype=np.int64))
    if vertices.size == 0:
        raise ValueError("vertex subset is empty")
    if vertices.min() < 0 or vertices.max() >= g.n:
        raise ValueError("vertex subset out of range")
    new_index = -np.ones(g.n, dtype=np.int64)
    new_index[vertices] = np.arange(vertices.size)
    keep = (new_index[g.src] >= 0) & (new_index[g.dst] >= 0)
    edges = np.column_stack([new_index[g.src[keep]], new_index[g.dst[keep]]])
    directions = None if g.directions is None else g.directions[keep]
    return Graph(
        n=vertices.size,
        edges=edges,
        dx=g.dx,
        coords=g.coords[vertices],
        directions=directions,
    )


def largest_component_mask(g, seed_vertex=None):
    """Boolean mask of a connected component of g.

    Returns the component containing seed_vertex when given, otherwise the
    largest component.
    """
    adj = coo_matrix(
        (np.ones(max(g.m, 1)), (g.src, g.dst) if g.m else ([0], [0])),
        shape=(g.n, g.n),
    )
    _, labels = connected_components(adj, directed=False)
    if seed_vertex is not None:
        target = labels[seed_vertex]
    else:
        target = np.argmax(np.bincount(labels))
    return labels == target
