"""Discrete Wasserstein-type metric machinery on graphs.

A potential field Phi (defined modulo additive constants) generates the
edge gradient (Phi_i - Phi_j)/dx, an upwind density weight g_ij on every
edge, and through the weighted divergence a zero-sum tangent vector

    tau(Phi)_i = (1/dx^2) sum_{j ~ i} (Phi_i - Phi_j) g_ij(rho).

On a connected graph tau is a bijection between potentials-mod-constants
and zero-sum vectors; inverting it (solve_potential) is what turns pairs
of tangent vectors into inner products, giving positive densities on the
graph a Riemannian-style transport metric.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .graph import Graph

# dense solves are faster below this size, sparse Cholesky-style wins above
_DENSE_SOLVE_LIMIT = 400


class SingularSystemError(RuntimeError):
    """The weighted-Laplacian system has no unique solution (disconnected)."""


def graph_gradient(g: Graph, phi):
    """Edge field (Phi_src - Phi_dst)/dx; antisymmetric under reversal."""
    phi = np.asarray(phi, dtype=np.float64)
    return (phi[g.src] - phi[g.dst]) / g.dx


def upwind_weights(g: Graph, rho, F):
    """Per-edge weight g_ij: rho_i where F_i > F_j, rho_j where F_i < F_j,
    and the average on exact ties.

    The tie case uses exact floating-point equality on purpose: off
    symmetric data ties essentially never occur, while on symmetric data
    the averaged weight is exactly what keeps the scheme well defined.
    """
    rho = np.asarray(rho, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    fs, fd = F[g.src], F[g.dst]
    return np.where(fs > fd, rho[g.src], np.where(fs < fd, rho[g.dst], 0.5 * (rho[g.src] + rho[g.dst])))


def weighted_divergence(g: Graph, rho, phi, F):
    """Apply tau: sigma_i = (1/dx^2) sum_{j ~ i} (Phi_i - Phi_j) g_ij(rho).

    The output sums to zero up to rounding; it is the negative of the
    graph divergence of the weighted edge flux rho grad Phi.
    """
    phi = np.asarray(phi, dtype=np.float64)
    gw = upwind_weights(g, rho, F)
    flux = (phi[g.src] - phi[g.dst]) * gw
    return np.bincount(g.src, weights=flux, minlength=g.n) / g.dx**2


def tau_matrix(g: Graph, rho, F):
    """Dense matrix of tau for fixed weights: a weighted graph Laplacian.

    Symmetric because g_ij = g_ji; positive semidefinite with kernel
    spanned by the constant vector exactly when the graph is connected.
    """
    gw = upwind_weights(g, rho, F) / g.dx**2
    L = np.zeros((g.n, g.n))
    np.add.at(L, (g.src, g.dst), -gw)
    np.add.at(L, (g.src, g.src), gw)
    return L


def _tau_sparse(g: Graph, rho, F):
    gw = upwind_weights(g, rho, F) / g.dx**2
    off = sp.coo_matrix((-gw, (g.src, g.dst)), shape=(g.n, g.n))
    diag = sp.coo_matrix((gw, (g.src, g.src)), shape=(g.n, g.n))
    return (off + diag).tocsr()


def solve_potential(g: Graph, rho, F, sigma):
    """Invert tau: find Phi with tau(Phi) = sigma and Phi_0 = 0.

    sigma must sum to zero. The rank-(n-1) system is grounded by deleting
    the row and column of vertex 0; the solution is checked back against
    sigma and a SingularSystemError is raised when the residual indicates
    a structurally singular (disconnected) operator.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (g.n,):
        raise ValueError("sigma must have one entry per vertex")
    scale = float(np.max(np.abs(sigma)))
    if abs(float(np.sum(sigma))) > 1e-10 * max(1.0, scale) * g.n:
        raise ValueError("sigma must sum to zero (tangent vector)")
    if g.n == 1:
        return np.zeros(1)

    phi = np.zeros(g.n)
    if g.n <= _DENSE_SOLVE_LIMIT:
        L = tau_matrix(g, rho, F)
        try:
            phi[1:] = np.linalg.solve(L[1:, 1:], sigma[1:])
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from exc
        residual = np.max(np.abs(L @ phi - sigma))
    else:
        L = _tau_sparse(g, rho, F)
        reduced = L[1:, 1:].tocsc()
        with np.errstate(all="ignore"):
            phi[1:] = spsolve(reduced, sigma[1:])
        if not np.all(np.isfinite(phi)):
            raise SingularSystemError("sparse solve produced non-finite values")
        residual = np.max(np.abs(L @ phi - sigma))
    if not residual <= 1e-10 * max(1.0, scale) * g.n:
        raise SingularSystemError(
            f"potential solve residual {residual:.3e}; graph disconnected?"
        )
    return phi


def metric_inner_product(g: Graph, rho, F, sigma1, sigma2):
    """Inner product of two tangent vectors at rho.

    Computed by lifting both vectors to potentials and contracting over
    edges: (1/(2 dx^2)) sum_E g_ij (Phi1_i - Phi1_j)(Phi2_i - Phi2_j).
    Equals sum_i sigma1_i Phi2_i = sum_i sigma2_i Phi1_i.
    """
    phi1 = solve_potential(g, rho, F, sigma1)
    phi2 = solve_potential(g, rho, F, sigma2)
    gw = upwind_weights(g, rho, F)
    d1 = phi1[g.src] - phi1[g.dst]
    d2 = phi2[g.src] - phi2[g.dst]
    return float(np.dot(gw * d1, d2)) / (2.0 * g.dx**2)
