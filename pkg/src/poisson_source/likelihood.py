"""Log-likelihood, normalized score and the LAN decomposition.

For paths observed at scale n, with ``tau_j = tau_j(theta)``,

    ln L(theta) = sum_j [ sum_{t_i > tau_j} log(1 + lambda_j(t_i - tau_j) / lambda0)
                          - n * int_{tau_j}^T lambda_j(t - tau_j) dt ].

Events exactly at ``tau_j`` are excluded from the sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SensorNetwork, travel_time_gradients, travel_times
from .pp_sim import ObservationSet
from .profile import DetectorProfile
from .signal_model import IntensityModel, NonSmoothModelError, fisher_matrix, shape_of

REGION_MARGIN = 0.01  # fraction of diam(Theta) an evaluation may stray outside


class OutOfRegionError(ValueError):
    pass


def check_region(net: SensorNetwork, theta, margin: float = REGION_MARGIN) -> None:
    reg = net.theta_region
    if not reg.contains(theta, margin * reg.diameter):
        raise OutOfRegionError(f"theta={tuple(theta)} is outside the parameter region {reg}")


def detector_profiles(net: SensorNetwork, model: IntensityModel, obs: ObservationSet) -> list:
    if obs.k != net.k:
        raise ValueError(f"observation has {obs.k} paths for {net.k} sensors")
    return [DetectorProfile(obs.events[j], shape_of(model, j), net.lambda0, obs.n, net.T) for j in range(net.k)]


def log_likelihood(net: SensorNetwork, model: IntensityModel, theta, obs: ObservationSet, check: bool = True) -> float:
    if check:
        check_region(net, theta)
    taus = travel_times(net, theta)
    return float(sum(p(t) for p, t in zip(detector_profiles(net, model, obs), taus)))


def _score_integrals(net, model, theta, obs, t_end=None, weight=1.0):
    """Per-detector ``int_{tau_j}^{t_end} l_j d(X_j - compensator)`` with l_j = lambda'/(lambda+lambda0).

    ``weight`` scales the compensator intensity (``1 - p`` for a thinned path).
    """
    t_end = net.T if t_end is None else t_end
    taus = travel_times(net, theta)
    out = np.zeros(net.k)
    for j in range(net.k):
        shape = shape_of(model, j)
        if not shape.smooth:
            raise NonSmoothModelError(f"score undefined for {shape}")
        tau = taus[j]
        if tau >= t_end:
            continue
        e = obs.events[j]
        i0 = np.searchsorted(e, tau, side="right")
        i1 = np.searchsorted(e, t_end, side="right")
        s = e[i0:i1] - tau
        ev = float(np.sum(shape.deriv(s) / (shape.value(s) + net.lambda0))) if s.size else 0.0
        # int l_j (lambda_j + lambda0) dt = int lambda_j' dt = lambda_j(t_end - tau) since lambda_j(0+) = 0
        comp = weight * obs.n * float(shape.value(np.array([t_end - tau]))[0])
        out[j] = ev - comp
    return out


def score(net: SensorNetwork, model: IntensityModel, theta, obs: ObservationSet) -> np.ndarray:
    """Normalized score n^{-1/2} grad ln L(theta)."""
    grads = travel_time_gradients(net, theta)
    integrals = _score_integrals(net, model, theta, obs)
    return -(grads.T @ integrals) / math.sqrt(obs.n)


@dataclass(frozen=True)
class LanDecomposition:
    u: np.ndarray
    linear_term: float
    quadratic_term: float
    log_zn: float

    @property
    def remainder(self) -> float:
        return self.log_zn - self.linear_term + self.quadratic_term


def lan_decompose(net: SensorNetwork, model: IntensityModel, theta0, u, obs: ObservationSet, fisher=None) -> LanDecomposition:
    """Exact log Z_n(u) next to its quadratic approximation at theta0."""
    u = np.asarray(u, dtype=float)
    theta0 = np.asarray(tuple(theta0), dtype=float)
    theta_u = theta0 + u / math.sqrt(obs.n)
    if not net.theta_region.contains(theta_u):
        raise OutOfRegionError(f"theta0 + u/sqrt(n) = {theta_u} leaves the parameter region")
    if np.all(u == 0):
        log_zn = 0.0
    else:
        profs = detector_profiles(net, model, obs)
        tu, t0 = travel_times(net, theta_u), travel_times(net, theta0)
        # per-detector differences keep cancellation local
        log_zn = float(sum(p(a) - p(b) for p, a, b in zip(profs, tu, t0)))
    delta = score(net, model, theta0, obs)
    info = fisher if fisher is not None else fisher_matrix(net, model, theta0).matrix
    return LanDecomposition(
        u=u,
        linear_term=float(u @ delta),
        quadratic_term=float(0.5 * u @ info @ u),
        log_zn=log_zn,
    )
