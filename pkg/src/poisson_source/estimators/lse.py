"""Least-squares multilateration from estimated arrival times.

With ``z_j = nu^2 tau_j^2`` and ``r_j^2 = x_j^2 + y_j^2`` the squared range
equation is linear in ``gamma = (x0, y0, x0^2 + y0^2)``:

    z_j - r_j^2 = -2 x_j gamma_1 - 2 y_j gamma_2 + gamma_3.
"""

from __future__ import annotations

import numpy as np

from ..geometry import SensorNetwork
from .results import ArrivalEstimates, LseResult, SingularDesignError, UnknownStartResult

MAX_COND = 1e10


def normal_matrix(positions: np.ndarray) -> np.ndarray:
    x, y = positions[:, 0], positions[:, 1]
    k = len(x)
    return np.array(
        [
            [-2 * x.sum(), -2 * y.sum(), k],
            [-2 * (x * x).sum(), -2 * (x * y).sum(), x.sum()],
            [-2 * (x * y).sum(), -2 * (y * y).sum(), y.sum()],
        ],
        dtype=float,
    )


def noise_loading(positions: np.ndarray, nu: float, taus, sigmas) -> np.ndarray:
    """k x 3 matrix mapping standardized arrival errors to the right-hand side."""
    x, y = positions[:, 0], positions[:, 1]
    base = 2 * nu**2 * np.asarray(taus) * np.asarray(sigmas)
    return np.column_stack([base, x * base, y * base])


def lse_covariance(positions: np.ndarray, nu: float, taus, sigma2) -> np.ndarray:
    """Asymptotic covariance of sqrt(n) (gamma* - gamma)."""
    A = normal_matrix(positions)
    Cm = noise_loading(positions, nu, taus, np.sqrt(sigma2))
    Ainv = np.linalg.inv(A)
    # A is not symmetric, so the right factor is A^{-T}
    return Ainv @ Cm.T @ Cm @ Ainv.T


def lse_estimate(net: SensorNetwork, arrivals: ArrivalEstimates, n: float = np.inf) -> LseResult:
    P = net.positions
    A = normal_matrix(P)
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > MAX_COND:
        raise SingularDesignError(f"normal matrix is singular (cond={cond:.3g}); are the sensors collinear?")
    x, y = P[:, 0], P[:, 1]
    rhs = net.nu**2 * arrivals.tau_hat**2 - (x * x + y * y)
    Z = np.array([rhs.sum(), (x * rhs).sum(), (y * rhs).sum()])
    gamma = np.linalg.solve(A, Z)
    D = lse_covariance(P, net.nu, arrivals.tau_hat, arrivals.sigma2)
    s_n = abs(gamma[2] - gamma[0] ** 2 - gamma[1] ** 2)
    return LseResult(gamma=gamma, A=A, D=D, s_n=float(s_n), cond_A=cond, n=n)


def lse_estimate_unknown_start(net: SensorNetwork, arrivals: ArrivalEstimates) -> UnknownStartResult:
    """Position and emission time from arrival times when the start is unknown.

    Solves ``-2 x_j g1 - 2 y_j g2 + 2 nu^2 tau_j g3 + g4 = nu^2 tau_j^2 - r_j^2``
    in the least-squares sense through the normal equations.
    """
    if net.k < 4:
        raise SingularDesignError("an unknown emission time needs at least 4 sensors")
    P = net.positions
    x, y = P[:, 0], P[:, 1]
    tau = arrivals.tau_hat
    nu2 = net.nu**2
    G = np.column_stack([-2 * x, -2 * y, 2 * nu2 * tau, np.ones_like(x)])
    b = nu2 * tau**2 - (x * x + y * y)
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > MAX_COND:
        raise SingularDesignError(f"design matrix is singular (cond={cond:.3g})")
    gamma = np.linalg.solve(G.T @ G, G.T @ b)
    consistency = abs(gamma[3] - gamma[0] ** 2 - gamma[1] ** 2 + nu2 * gamma[2] ** 2)
    return UnknownStartResult(gamma=gamma, consistency=float(consistency), cond=cond)
