"""Graph construction and combinatorics."""

import numpy as np
import pytest

from graphfp import (
    Graph,
    build_cycle_1d,
    build_lattice_2d,
    build_path_lattice_1d,
    largest_component_mask,
    subgraph,
)


def edge_set(g):
    return {(int(a), int(b)) for a, b in g.edges}


def test_path_1d_structure():
    g = build_path_lattice_1d(0.0, 1.0, 5)
    assert g.n == 5
    assert g.m == 8
    assert g.dx == 0.25
    want = {(0, 1), (1, 2), (2, 3), (3, 4)}
    assert edge_set(g) == want | {(b, a) for a, b in want}
    assert np.allclose(g.coords[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.all(g.directions == 0)
    assert list(g.degrees) == [1, 2, 2, 2, 1]
    assert g.max_degree == 2
    assert g.is_connected()


def test_path_needs_two_vertices():
    with pytest.raises(ValueError):
        build_path_lattice_1d(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        build_path_lattice_1d(1.0, 0.0, 5)


def test_cycle_1d_structure():
    g = build_cycle_1d(0.0, 1.0, 5)
    assert g.n == 5
    assert g.m == 10
    assert g.dx == 0.25  # same spacing rule as the path; wrap edge included
    assert (4, 0) in edge_set(g) and (0, 4) in edge_set(g)
    assert list(g.degrees) == [2] * 5
    with pytest.raises(ValueError):
        build_cycle_1d(0.0, 1.0, 2)


def test_neighbors_sorted_unique():
    g = build_cycle_1d(0.0, 1.0, 6)
    assert list(g.neighbors(0)) == [1, 5]
    assert list(g.neighbors(3)) == [2, 4]


def test_lattice_2d_row_major_layout():
    g = build_lattice_2d(0.0, 1.0, 0.0, 1.0, 0.5)
    assert g.n == 9
    # x varies fastest: vertex k sits at (x[k % 3], y[k // 3])
    xs = np.array([0.0, 0.5, 1.0])
    assert np.allclose(g.coords[:, 0], np.tile(xs, 3))
    assert np.allclose(g.coords[:, 1], np.repeat(xs, 3))
    assert g.m == 24
    assert sorted(np.unique(g.degrees)) == [2, 3, 4]
    assert g.is_connected()


def test_lattice_2d_direction_tags():
    g = build_lattice_2d(0.0, 1.0, 0.0, 1.0, 0.5)
    dx_coord = g.coords[g.dst] - g.coords[g.src]
    horizontal = np.abs(dx_coord[:, 0]) > 0
    assert np.all(g.directions[horizontal] == 0)
    assert np.all(g.directions[~horizontal] == 1)
    # center vertex 4 has one neighbor on each side in each direction
    assert list(g.directional_neighbors(4, 0)) == [3, 5]
    assert list(g.directional_neighbors(4, 1)) == [1, 7]


def test_lattice_2d_periodic_wraps():
    # both endpoints kept (same convention as build_cycle_1d), wrap edges added
    g = build_lattice_2d(0.0, 1.5, 0.0, 1.5, 0.5, boundary="periodic")
    assert g.n == 16
    assert np.all(g.degrees == 4)
    assert g.is_connected()
    assert (3, 0) in edge_set(g) and (12, 0) in edge_set(g)


def test_lattice_2d_rejects_incommensurate_spacing():
    with pytest.raises(ValueError):
        build_lattice_2d(0.0, 1.0, 0.0, 1.0, 0.3)


def test_lattice_2d_rejects_unknown_boundary():
    with pytest.raises(ValueError):
        build_lattice_2d(0.0, 1.0, 0.0, 1.0, 0.5, boundary="absorbing")


def test_graph_validates_edges():
    coords = np.zeros((3, 1))
    with pytest.raises(ValueError):
        Graph(n=3, edges=np.array([[0, 0]]), dx=1.0, coords=coords)
    with pytest.raises(ValueError):
        Graph(n=3, edges=np.array([[0, 5]]), dx=1.0, coords=coords)
    with pytest.raises(ValueError):
        Graph(n=3, edges=np.array([[0, 1]]), dx=-1.0, coords=coords)


def test_graph_arrays_read_only():
    g = build_path_lattice_1d(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        g.edges[0, 0] = 2
    with pytest.raises(ValueError):
        g.coords[0, 0] = 9.0


def test_subgraph_relabels_and_keeps_geometry():
    g = build_path_lattice_1d(0.0, 1.0, 5)
    sub = subgraph(g, [1, 2, 3])
    assert sub.n == 3
    assert edge_set(sub) == {(0, 1), (1, 0), (1, 2), (2, 1)}
    assert sub.dx == g.dx
    assert np.allclose(sub.coords[:, 0], [0.25, 0.5, 0.75])


def test_largest_component_mask():
    edges = np.array([[0, 1], [1, 0], [2, 3], [3, 2], [3, 4], [4, 3]])
    g = Graph(n=5, edges=edges, dx=1.0, coords=np.zeros((5, 1)))
    assert not g.is_connected()
    mask = largest_component_mask(g)
    assert list(np.flatnonzero(mask)) == [2, 3, 4]
    mask0 = largest_component_mask(g, seed_vertex=0)
    assert list(np.flatnonzero(mask0)) == [0, 1]
