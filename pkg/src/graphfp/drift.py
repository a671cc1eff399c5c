"""Drift specifications for non-gradient flows.

The upwind scheme needs, per coordinate direction v, a scalar field

    u_v(i, rho) = U_v(x(i)) + beta_v * log rho_i

whose differences between direction-v neighbors drive the edge fluxes:
mass moves from high u to low u. To realize an SDE drift b(x) this way,
U_v must be the *negative* antiderivative of the drift component along
its own coordinate, -d U_v / d x_v = b_v, so that descending u transports
mass along +b while the beta_v log rho term supplies diffusion in
direction v. Additive constants (and any additive function of the other
coordinates) cancel between same-direction neighbors and are fixed to
zero here.
"""

from dataclasses import dataclass

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class DriftSpec:
    """Per-direction antiderivative fields plus per-direction diffusion.

    potentials: one callable per direction mapping coords (n, d) to (n,).
    diffusion: per-direction nonnegative coefficient of log rho.
    """

    dim: int
    potentials: tuple
    diffusion: tuple

    def __post_init__(self):
        object.__setattr__(self, "potentials", tuple(self.potentials))
        object.__setattr__(self, "diffusion", tuple(float(b) for b in self.diffusion))
        if len(self.potentials) != self.dim or len(self.diffusion) != self.dim:
            raise ValueError("need one potential and one diffusion entry per direction")
        if any(b < 0 for b in self.diffusion):
            raise ValueError("diffusion coefficients must be nonnegative")


def drift_eval(spec: DriftSpec, g: Graph, rho, v, i):
    """u_v(i, rho) = U_v(x(i)) + beta_v * log rho_i for a single vertex."""
    if not 0 <= v < spec.dim:
        raise ValueError(f"direction {v} out of range")
    if not 0 <= i < g.n:
        raise ValueError(f"vertex {i} out of range")
    value = float(np.asarray(spec.potentials[v](g.coords))[i])
    beta_v = spec.diffusion[v]
    if beta_v > 0:
        r = float(np.asarray(rho)[i])
        if r <= 0:
            raise ValueError("nonpositive density with positive diffusion")
        value += beta_v * np.log(r)
    return value


def van_der_pol_drift(beta):
    """Stochastic van der Pol oscillator, diffusion acting on the velocity.

    Drift b(x) = (x2, (1 - x1^2) x2 - x1); phase points orbit a limit
    cycle, so the stationary density concentrates along it with peaks on
    the slow segments. Negative antiderivatives along each coordinate:

        U_1 = -x1 x2,   U_2 = -(1 - x1^2) x2^2 / 2 + x1 x2.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")

    def u1(x):
        return -x[:, 0] * x[:, 1]

    def u2(x):
        return -(1.0 - x[:, 0] ** 2) * x[:, 1] ** 2 / 2.0 + x[:, 0] * x[:, 1]

    return DriftSpec(dim=2, potentials=(u1, u2), diffusion=(0.0, float(beta)))


def duffing_drift(xi, omega, r, beta):
    """Stochastic Duffing oscillator with drift
    b(x) = (x2, -2 xi omega x2 + omega x1 - omega^2 r x1^3).

    The two stable foci at x1 = +-1/sqrt(omega r), x2 = 0 give the
    stationary density its two peaks. Negative antiderivatives:

        U_1 = -x1 x2,
        U_2 = xi omega x2^2 - omega x1 x2 + omega^2 r x1^3 x2.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    xi, omega, r = float(xi), float(omega), float(r)

    def u1(x):
        return -x[:, 0] * x[:, 1]

    def u2(x):
        x1, x2 = x[:, 0], x[:, 1]
        return xi * omega * x2**2 - omega * x1 * x2 + omega**2 * r * x1**3 * x2

    return DriftSpec(dim=2, potentials=(u1, u2), diffusion=(0.0, float(beta)))
