"""Discrete free energy, its derivatives, and Gibbs equilibria.

The free energy of a probability vector rho on n vertices is

    F(rho) = sum_i v_i rho_i + 1/2 sum_ij w_ij rho_i rho_j
             + beta sum_i rho_i log rho_i

with a linear potential v, a symmetric interaction matrix w and a
diffusion constant beta > 0. Its gradient F_i = v_i + (w rho)_i
+ beta log rho_i + beta drives the upwind flux scheme, and its Hessian
w + beta diag(1/rho) enters the convergence-rate functional.

Equilibria are Gibbs measures rho ~ exp(-(v + w rho)/beta), computed here
by a damped fixed-point iteration with an optional gradient-flow fallback
for interaction kernels on which the iteration is not a contraction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph

# Entries at or below this value make 1/rho terms overflow, so the
# Hessian refuses them; log() stays finite all the way down to the
# smallest denormal, so energies and gradients accept any positive
# state (long relaxation runs legitimately reach ~1e-320 far fields).
POSITIVITY_FLOOR = 1e-300


class ConvergenceError(RuntimeError):
    """Fixed-point iteration failed to reach tolerance; carries .residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def check_density(rho, n=None, mass_tol=None):
    """Validate a probability vector: shape, strict positivity, unit mass."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim != 1:
        raise ValueError("density must be a 1-d vector")
    if n is not None and rho.size != n:
        raise ValueError(f"density has {rho.size} entries, expected {n}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density has non-finite entries")
    if not rho.min(initial=np.inf) > 0.0:
        raise ValueError("density must be strictly positive")
    tol = 1e-10 * rho.size if mass_tol is None else mass_tol
    mass = math.fsum(rho)
    if abs(mass - 1.0) > tol:
        raise ValueError(f"density mass {mass!r} deviates from 1 beyond {tol}")
    return rho


@dataclass(frozen=True)
class FreeEnergySpec:
    """Parameters (v, w, beta) of the discrete free energy.

    w may be None for interaction-free problems; this enables cheaper
    evaluation paths and a closed-form Gibbs measure.
    """

    v: np.ndarray
    w: np.ndarray | None
    beta: float

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.v, dtype=np.float64))
        object.__setattr__(self, "v", v)
        v.setflags(write=False)
        if self.w is not None:
            w = np.ascontiguousarray(np.asarray(self.w, dtype=np.float64))
            if w.shape != (v.size, v.size):
                raise ValueError("w must be n x n")
            if not np.array_equal(w, w.T):
                raise ValueError("interaction matrix must be symmetric")
            object.__setattr__(self, "w", w)
            w.setflags(write=False)
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def n(self):
        return self.v.size

    def interaction_field(self, rho):
        """(w rho)_i, or zeros when no interaction kernel is set.

        Entries below 1e-100 are dropped from the product: they change
        the field by less than n*max|w|*1e-100, immeasurable against
        its O(1) entries, while keeping subnormal values out of the
        dense matvec -- long relaxation runs push far-field densities
        into the subnormal range, where every BLAS lane pays a
        microcode-assist penalty (measured ~15x per step).
        """
        if self.w is None:
            return np.zeros_like(rho)
        if rho.min(initial=np.inf) < 1e-100:
            rho = np.where(rho > 1e-100, rho, 0.0)
        return self.w @ rho


# ---------------------------------------------------------------------------
# potential / interaction catalogs (closed forms evaluated on coordinates)

def _potential_zero(x):
    return np.zeros(x.shape[0])


def _potential_quadratic(x):
    return 0.5 * np.sum(x * x, axis=1)


def _potential_double_well(x):
    r2 = np.sum(x * x, axis=1)
    return 0.25 * r2 * r2 - 0.5 * r2


POTENTIALS = {
    "zero": _potential_zero,
    "quadratic": _potential_quadratic,
    "double_well": _potential_double_well,
}


def _interaction_cubic_distance(x, y):
    diff = x[:, None, :] - y[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return dist**3 / 3.0


INTERACTIONS = {
    "zero": None,
    "cubic_distance": _interaction_cubic_distance,
}


def build_potential_vector(g: Graph, potential):
    """Evaluate a catalog potential (by name or callable) on the vertices."""
    if isinstance(potential, str):
        if potential not in POTENTIALS:
            raise ValueError(f"unknown potential {potential!r}")
        fn = POTENTIALS[potential]
    else:
        fn = potential
    v = np.asarray(fn(g.coords), dtype=np.float64)
    if v.shape != (g.n,):
        raise ValueError("potential must produce one value per vertex")
    return v


def build_interaction_matrix(g: Graph, kernel):
    """Evaluate a catalog interaction kernel on all vertex pairs.

    Returns None for the zero kernel so FreeEnergySpec can take its fast
    path; symmetry of the result is enforced exactly.
    """
    if isinstance(kernel, str):
        if kernel not in INTERACTIONS:
            raise ValueError(f"unknown interaction kernel {kernel!r}")
        fn = INTERACTIONS[kernel]
    else:
        fn = kernel
    if fn is None:
        return None
    w = np.asarray(fn(g.coords, g.coords), dtype=np.float64)
    if w.shape != (g.n, g.n):
        raise ValueError("interaction kernel must produce an n x n matrix")
    # symmetrize to kill last-ulp asymmetry from floating-point evaluation
    return 0.5 * (w + w.T)


# ---------------------------------------------------------------------------
# energy and derivatives

def free_energy(spec: FreeEnergySpec, rho, check=True):
    """F(rho) with a compensated sum for the entropy term."""
    rho = check_density(rho, spec.n) if check else np.asarray(rho)
    value = float(np.dot(spec.v, rho))
    if spec.w is not None:
        value += 0.5 * float(np.dot(rho, spec.w @ rho))
    entropy = math.fsum((r * math.log(r) for r in rho))
    return value + spec.beta * entropy


def energy_gradient(spec: FreeEnergySpec, rho, check=True):
    """F_i = v_i + (w rho)_i + beta log rho_i + beta."""
    rho = check_density(rho, spec.n) if check else np.asarray(rho)
    return spec.v + spec.interaction_field(rho) + spec.beta * np.log(rho) + spec.beta


def energy_hessian(spec: FreeEnergySpec, rho, check=True):
    """Dense Hessian w + beta diag(1/rho)."""
    rho = check_density(rho, spec.n) if check else np.asarray(rho)
    if rho.min(initial=np.inf) <= POSITIVITY_FLOOR:
        raise ValueError(
            f"density entries at or below {POSITIVITY_FLOOR} overflow 1/rho"
        )
    h = np.zeros((spec.n, spec.n)) if spec.w is None else spec.w.copy()
    h[np.diag_indices_from(h)] += spec.beta / rho
    return h


# ---------------------------------------------------------------------------
# Gibbs measures

def _lift_above_floor(rho):
    """Clip exp-underflowed zeros up to a representable positive mass.

    At small beta the softmax weight of far-field vertices drops below
    the smallest float, so the mathematically positive Gibbs measure
    rounds to exact zeros. Lifting those entries to 1e-299 (and
    renormalizing) keeps the result a valid strictly positive density at
    a total distortion of at most n * 1e-299.
    """
    if rho.min() >= 1e-299:
        return rho
    out = np.clip(rho, 1e-299, None)
    return out / out.sum()


def gibbs_map(spec: FreeEnergySpec, rho):
    """One fixed-point map application: softmax of -(v + w rho)/beta."""
    z = -(spec.v + spec.interaction_field(rho)) / spec.beta
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def gibbs_residual(spec: FreeEnergySpec, rho):
    """Max-norm fixed-point residual max_i |rho_i - gibbs_map(rho)_i|."""
    return float(np.max(np.abs(rho - gibbs_map(spec, rho))))


def _newton_polish(spec: FreeEnergySpec, rho, sweeps=8):
    """Refine a near-fixed-point iterate by Newton steps on rho - Phi(rho).

    The damped map's contraction factor approaches 1 in the flat valleys
    that small beta with interactions produces, so a small map residual
    can hide a much larger error in the density itself (and hence in the
    equilibrium free energy). Starting inside the quadratic basin, a few
    steps with the exact Jacobian I + (diag(s) - s s^T) w / beta push the
    iterate to the limit of float64. Returns the best iterate seen; any
    step that leaves the simplex or stops improving ends the polish.
    """
    best = rho
    best_res = gibbs_residual(spec, rho)
    eye = np.eye(spec.n)
    x = rho
    for _ in range(sweeps):
        s = gibbs_map(spec, x)
        jac = eye + ((np.diag(s) - np.outer(s, s)) @ spec.w) / spec.beta
        try:
            step = np.linalg.solve(jac, x - s)
        except np.linalg.LinAlgError:
            break
        x = x - step
        low = x <= 0.0
        if np.any(low):
            # zeroing an exp-underflowed far-field entry is the correct
            # limit; a core entry driven negative means the step is bad
            if float(x.min()) < -1e-10:
                break
            x = np.where(low, 1e-299, x)
        x = x / x.sum()
        res = gibbs_residual(spec, x)
        if res >= best_res:
            break
        best, best_res = x, res
    return best


def gibbs_fixed_point(
    spec: FreeEnergySpec,
    tol=1e-12,
    theta=0.5,
    max_iter=200_000,
    graph: Graph | None = None,
    x0=None,
):
    """Solve rho = softmax(-(v + w rho)/beta) to the given residual.

    Damped iteration rho <- (1-theta) rho + theta gibbs_map(rho) from the
    uniform vector, followed by a Newton polish that removes the
    flat-valley error the damped map cannot see (its contraction factor
    approaches 1 there, so a residual at tol may still sit ~1e-5 from
    the fixed point in density). Without an interaction kernel the map
    is constant and the exact softmax is returned after a single
    application. If the residual stagnates (strong local interactions
    make the map expansive) and a graph is supplied, the energy gradient
    flow is integrated on it instead; the flow's equilibrium is the same
    Gibbs measure and its stability does not depend on the map being a
    contraction.

    Raises ConvergenceError (carrying the last residual) when neither
    route reaches tol.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    n = spec.n
    rho = np.full(n, 1.0 / n) if x0 is None else check_density(x0, n)
    if spec.w is None:
        return _lift_above_floor(gibbs_map(spec, rho))

    best = np.inf
    stalled = 0
    for _ in range(max_iter):
        target = gibbs_map(spec, rho)
        residual = float(np.max(np.abs(rho - target)))
        if residual <= tol:
            return _lift_above_floor(_newton_polish(spec, rho))
        if residual < 0.5 * best:
            best = residual
            stalled = 0
        else:
            stalled += 1
        if stalled > 200 or not np.isfinite(residual):
            break
        rho = (1.0 - theta) * rho + theta * target
        # guard: damping keeps rho a convex combination of densities, but
        # exp underflow in the map can zero out far-field entries
        np.clip(rho, 1e-290, None, out=rho)
        rho /= rho.sum()

    if np.all(np.isfinite(rho)):
        polished = _newton_polish(spec, rho)
        if gibbs_residual(spec, polished) <= tol:
            return _lift_above_floor(polished)

    if graph is not None:
        return _gibbs_by_flow(spec, graph, tol, max_iter, x0=x0)
    raise ConvergenceError(
        f"Gibbs fixed point stagnated at residual {best:.3e} (tol {tol:.1e})",
        residual=best,
    )


def _gibbs_by_flow(spec, graph, tol, max_iter, x0=None):
    """Fallback: drive the gradient flow until the Gibbs residual meets tol."""
    from .dynamics import _GradientKernel, _advance_to_residual

    if graph.n != spec.n:
        raise ValueError("graph size does not match spec")
    rho = np.full(spec.n, 1.0 / spec.n) if x0 is None else check_density(x0, spec.n)
    kernel = _GradientKernel(graph, spec)
    rho, residual = _advance_to_residual(
        kernel, spec, rho, tol=tol, max_steps=50 * max_iter
    )
    if residual > tol:
        raise ConvergenceError(
            f"gradient-flow fallback stalled at residual {residual:.3e}",
            residual=residual,
        )
    return _lift_above_floor(_newton_polish(spec, rho))
