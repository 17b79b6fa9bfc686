"""One-step MLE-process built on a thinned sample.

A preliminary estimate ``theta_pre`` computed from the thinned part Y is
corrected with one scoring step using the independent complement X~:

    theta_t = theta_pre + I_t(theta_pre)^{-1} * S_t / (n (1 - p)),

where ``S_t`` is the gradient in theta of the log-likelihood of X~ restricted
to [0, t], evaluated at ``theta_pre``:

    S_t = -sum_j grad tau_j * int_{tau_j}^{t} l_j(s) [dX~_j(s) - (1 - p) n (lambda_j + lambda0) ds],
    l_j = lambda_j' / (lambda_j + lambda0).
"""

from __future__ import annotations

import numpy as np

from ..geometry import Point2, SensorNetwork, travel_time_gradients, travel_times
from ..pp_sim import ObservationSet
from ..signal_model import IntensityModel, fisher_matrix, shape_of
from .results import DegenerateInformationError, EstimationResult

DET_REL_TOL = 1e-10


def _cumulative_scores(net, model, theta, x_tilde: ObservationSet, p: float, t_grid: np.ndarray) -> np.ndarray:
    """(len(t_grid), k) values of the compensated stochastic integrals up to each t."""
    taus = travel_times(net, theta)
    out = np.zeros((t_grid.size, net.k))
    for j in range(net.k):
        shape = shape_of(model, j)
        e = x_tilde.events[j]
        e = e[np.searchsorted(e, taus[j], side="right"):]
        s = e - taus[j]
        csum = np.concatenate([[0.0], np.cumsum(shape.deriv(s) / (shape.value(s) + net.lambda0))])
        upto = np.searchsorted(e, t_grid, side="right")
        comp = (1.0 - p) * x_tilde.n * shape.value(np.maximum(t_grid - taus[j], 0.0))
        out[:, j] = csum[upto] - comp
    return out


def _process(net, model, theta_pre, x_tilde, p, t_grid):
    theta_pre = Point2.of(theta_pre)
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if not 0.0 < p < 1.0:
        raise ValueError("thinning probability must lie in (0, 1)")
    taus = travel_times(net, theta_pre)
    first, second = np.sort(taus)[:2]
    grads = travel_time_gradients(net, theta_pre)
    integrals = _cumulative_scores(net, model, theta_pre, x_tilde, p, t_grid)
    scale = x_tilde.n * (1.0 - p)
    results = []
    for t, integ in zip(t_grid, integrals):
        diag = {"t": float(t), "tau_order": (float(first), float(second))}
        if t <= first:
            results.append(EstimationResult(f"OneStepProcess({t:g})", theta_pre, None, diag, status="pre-arrival"))
            continue
        info = fisher_matrix(net, model, theta_pre, t_end=t)
        m = info.matrix
        det, tr = float(np.linalg.det(m)), float(np.trace(m))
        diag["det_info"] = det
        if t <= second or det <= DET_REL_TOL * tr * tr:
            results.append(EstimationResult(f"OneStepProcess({t:g})", None, None, diag, status="degenerate"))
            continue
        score_vec = -(grads.T @ integ)
        inv = np.linalg.inv(m)
        step = inv @ score_vec / scale
        theta = Point2(theta_pre.x + float(step[0]), theta_pre.y + float(step[1]))
        diag["step"] = step
        results.append(EstimationResult(f"OneStepProcess({t:g})", theta, inv, diag))
    return results


def one_step(
    net: SensorNetwork,
    model: IntensityModel,
    theta_pre,
    x_tilde: ObservationSet,
    p: float,
    t: float = None,
) -> EstimationResult:
    """Corrected estimate at time t (default: the horizon T).

    Before the first predicted arrival the preliminary estimate is returned
    unchanged; while fewer than two detectors are active the truncated
    information is singular and DegenerateInformationError is raised.
    """
    t = net.T if t is None else t
    res = _process(net, model, theta_pre, x_tilde, p, [t])[0]
    if res.status == "degenerate":
        raise DegenerateInformationError(
            f"truncated Fisher matrix at t={t:g} is singular (det={res.diagnostics.get('det_info', 0.0):.3g})"
        )
    if t >= net.T:
        res.label = "OneStep"
    return res


def one_step_process(
    net: SensorNetwork,
    model: IntensityModel,
    theta_pre,
    x_tilde: ObservationSet,
    p: float,
    t_grid,
) -> list:
    """One-step estimates along a sorted grid of times; each entry carries its own status."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size and (np.any(np.diff(t_grid) < 0) or t_grid[0] <= 0 or t_grid[-1] > net.T):
        raise ValueError("t_grid must be sorted within (0, T]")
    return _process(net, model, theta_pre, x_tilde, p, t_grid)
