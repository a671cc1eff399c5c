"""Free energy, its derivatives, and Gibbs equilibria."""

import math

import numpy as np
import pytest

from graphfp import (
    ConvergenceError,
    FreeEnergySpec,
    build_interaction_matrix,
    build_lattice_2d,
    build_path_lattice_1d,
    build_potential_vector,
    check_density,
    energy_gradient,
    energy_hessian,
    free_energy,
    gibbs_fixed_point,
    gibbs_map,
    gibbs_residual,
)


def two_node():
    return build_path_lattice_1d(0.0, 1.0, 2)


def test_potential_catalog_values():
    g = build_lattice_2d(0.0, 4.0, 0.0, 4.0, 1.0)
    quad = build_potential_vector(g, "quadratic")
    i = int(np.flatnonzero((g.coords[:, 0] == 3) & (g.coords[:, 1] == 4))[0])
    assert quad[i] == pytest.approx(12.5, abs=1e-15)
    dw = build_potential_vector(build_path_lattice_1d(0.0, 2.0, 3), "double_well")
    assert dw[1] == pytest.approx(-0.25, abs=1e-15)  # x = 1 is the well floor
    zero = build_potential_vector(g, "zero")
    assert np.all(zero == 0.0)


def test_potential_accepts_callable():
    g = build_path_lattice_1d(0.0, 1.0, 3)
    v = build_potential_vector(g, lambda xy: 7.0 * xy[:, 0])
    assert np.allclose(v, [0.0, 3.5, 7.0])
    with pytest.raises(ValueError):
        build_potential_vector(g, "no_such_potential")


def test_interaction_catalog():
    g = build_path_lattice_1d(0.0, 2.0, 3)
    assert build_interaction_matrix(g, "zero") is None
    w = build_interaction_matrix(g, "cubic_distance")
    assert w.shape == (3, 3)
    assert w[0, 2] == pytest.approx(8.0 / 3.0, rel=1e-15)  # distance 2
    assert np.allclose(w, w.T)
    assert np.all(np.diag(w) == 0.0)


def test_free_energy_entropy_only():
    spec = FreeEnergySpec(v=np.zeros(2), w=None, beta=1.0)
    rho = np.array([0.5, 0.5])
    assert free_energy(spec, rho) == pytest.approx(-math.log(2.0), abs=1e-15)


def test_free_energy_with_potential_and_interaction():
    c = 8.0 / 3.0
    w = np.array([[0.0, c], [c, 0.0]])
    spec = FreeEnergySpec(v=np.array([1.0, 2.0]), w=w, beta=1.0)
    rho = np.array([0.5, 0.5])
    want = 1.5 + c / 4.0 - math.log(2.0)
    assert free_energy(spec, rho) == pytest.approx(want, rel=1e-14)


def test_energy_gradient_frozen_value():
    spec = FreeEnergySpec(v=np.array([1.0, 2.0]), w=None, beta=1.0)
    grad = energy_gradient(spec, np.array([0.5, 0.5]))
    assert grad == pytest.approx([2.0 + math.log(0.5), 3.0 + math.log(0.5)], abs=1e-14)


def test_energy_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    n = 6
    w = rng.normal(size=(n, n))
    w = 0.5 * (w + w.T)
    spec = FreeEnergySpec(v=rng.normal(size=n), w=w, beta=0.7)
    rho = rng.random(n) + 0.2
    rho /= rho.sum()
    grad = energy_gradient(spec, rho)
    h = 1e-7
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (free_energy(spec, rho + e, check=False)
              - free_energy(spec, rho - e, check=False)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-6)


def test_energy_hessian_frozen_and_fd():
    spec = FreeEnergySpec(v=np.zeros(2), w=None, beta=1.0)
    rho = np.array([0.25, 0.75])
    hess = energy_hessian(spec, rho)
    assert np.allclose(hess, np.diag([4.0, 4.0 / 3.0]), atol=1e-14)

    rng = np.random.default_rng(4)
    n = 5
    w = rng.normal(size=(n, n))
    w = 0.5 * (w + w.T)
    spec = FreeEnergySpec(v=rng.normal(size=n), w=w, beta=0.5)
    rho = rng.random(n) + 0.3
    rho /= rho.sum()
    hess = energy_hessian(spec, rho)
    h = 1e-6
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (energy_gradient(spec, rho + e, check=False)
              - energy_gradient(spec, rho - e, check=False)) / (2 * h)
        assert np.allclose(hess[:, i], fd, rtol=1e-4, atol=1e-6)


def test_gibbs_two_state_closed_form():
    spec = FreeEnergySpec(v=np.array([0.0, math.log(2.0)]), w=None, beta=1.0)
    rho = gibbs_fixed_point(spec)
    assert rho == pytest.approx([2.0 / 3.0, 1.0 / 3.0], abs=1e-15)
    assert gibbs_residual(spec, rho) <= 1e-15


def test_gibbs_map_is_softmax():
    spec = FreeEnergySpec(v=np.array([0.0, 1.0, 2.0]), w=None, beta=2.0)
    out = gibbs_map(spec, np.full(3, 1.0 / 3.0))
    z = np.exp(-spec.v / 2.0)
    assert np.allclose(out, z / z.sum(), rtol=1e-15)


def test_gibbs_minimizes_free_energy():
    rng = np.random.default_rng(5)
    spec = FreeEnergySpec(v=rng.normal(size=8), w=None, beta=0.8)
    rho = gibbs_fixed_point(spec)
    f_star = free_energy(spec, rho)
    for _ in range(20):
        other = rng.random(8) + 0.05
        other /= other.sum()
        assert free_energy(spec, other) >= f_star - 1e-12


def test_gibbs_damping_independence_with_interaction():
    """With a weak interaction the damped iteration converges for any
    damping weight, to the same fixed point."""
    g = build_path_lattice_1d(0.0, 1.0, 6)
    w = build_interaction_matrix(g, "cubic_distance")
    spec = FreeEnergySpec(v=build_potential_vector(g, "quadratic"), w=w, beta=0.5)
    states = [
        gibbs_fixed_point(spec, tol=1e-13, theta=theta)
        for theta in (0.3, 0.5, 1.0)
    ]
    for rho in states:
        assert gibbs_residual(spec, rho) <= 1e-13
        assert np.allclose(rho, states[0], atol=1e-10)


def flip_flop_spec():
    """Strong self-repulsion makes the fixed-point map flip-flop between
    near-disjoint supports, so the damped iteration stagnates while the
    free energy itself stays convex."""
    g = build_path_lattice_1d(0.0, 1.0, 4)
    w = 40.0 * np.eye(4)
    spec = FreeEnergySpec(v=np.array([0.0, 0.1, 0.2, 0.3]), w=w, beta=1.0)
    return g, spec


def test_gibbs_flow_fallback_when_iteration_cycles():
    g, spec = flip_flop_spec()
    rho = gibbs_fixed_point(spec, tol=1e-10, graph=g)
    assert gibbs_residual(spec, rho) <= 1e-10
    assert math.fsum(rho) == pytest.approx(1.0, abs=1e-9)


def test_gibbs_raises_without_graph_when_stuck():
    _, spec = flip_flop_spec()
    with pytest.raises(ConvergenceError) as info:
        gibbs_fixed_point(spec, tol=1e-10)
    assert info.value.residual > 0


def test_gibbs_max_iter_exhaustion():
    # budget far too small for the flip-flopping map, and the iterate is
    # still so far out that the polish cannot rescue it either
    _, spec = flip_flop_spec()
    with pytest.raises(ConvergenceError) as info:
        gibbs_fixed_point(spec, tol=1e-10, max_iter=3)
    assert info.value.residual > 0


def test_check_density_rejections():
    with pytest.raises(ValueError):
        check_density(np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError):
        check_density(np.array([0.5, 0.5]), n=3)
    with pytest.raises(ValueError):
        check_density(np.array([0.5, np.nan]))
    with pytest.raises(ValueError):
        check_density(np.array([1.2, -0.2]))
    with pytest.raises(ValueError):
        check_density(np.array([0.4, 0.4]))
    with pytest.raises(ValueError):
        check_density(np.array([1.0, 0.0]))
    # denormal but positive entries are legitimate flow states
    out = check_density(np.array([1.0 - 1e-320, 1e-320]))
    assert out.dtype == np.float64


def test_hessian_rejects_subfloor_entries():
    # 1/rho overflows below ~1e-300, so the Hessian refuses what the
    # energy and gradient still accept
    spec = FreeEnergySpec(v=np.zeros(2), w=None, beta=1.0)
    rho = np.array([1.0 - 1e-320, 1e-320])
    assert np.isfinite(free_energy(spec, rho))
    assert np.all(np.isfinite(energy_gradient(spec, rho)))
    with pytest.raises(ValueError):
        energy_hessian(spec, rho)


def test_spec_validation():
    with pytest.raises(ValueError):
        FreeEnergySpec(v=np.zeros(3), w=np.zeros((2, 2)), beta=1.0)
    with pytest.raises(ValueError):
        FreeEnergySpec(v=np.zeros(2), w=np.array([[0.0, 1.0], [0.5, 0.0]]), beta=1.0)
    with pytest.raises(ValueError):
        FreeEnergySpec(v=np.zeros(2), w=None, beta=0.0)
