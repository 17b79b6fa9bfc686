"""Per-detector arrival-time MLEs."""

from __future__ import annotations

import math

import numpy as np

from ..geometry import SensorNetwork, domain_bounds
from ..likelihood import detector_profiles
from ..pp_sim import ObservationSet
from ..profile import DetectorProfile
from ..signal_model import IntensityModel, ZeroInformationError, information_integral, shape_of
from .results import ArrivalEstimates

GRID_STEPS = 2000
GOLDEN_REL_TOL = 1e-8
FINE_POINTS = 121
CANDIDATE_GAP = 1.0  # log-likelihood units; binned maxima this close to the best are refined too

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal f on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _candidates(taus, vals, h, gap):
    order = np.argsort(vals)[::-1]
    best = vals[order[0]]
    picked = []
    for i in order:
        if vals[i] < best - gap:
            break
        if all(abs(taus[i] - taus[p]) > 6 * h for p in picked):
            picked.append(i)
        if len(picked) >= 5:
            break
    return picked


def maximize_profile(prof: DetectorProfile, lo: float, hi: float, grid_steps: int = GRID_STEPS):
    """Dense binned grid, exact fine grid around the best nodes, golden-section finish.

    Returns ``(tau_hat, value, flat)``; a flat profile yields the window midpoint.
    """
    width = hi - lo
    h = width / grid_steps
    table = prof.binned(lo, hi, h)
    keep = table.taus <= hi + 1e-12 * width
    taus, vals = table.taus[keep], table.values[keep]
    span = float(np.max(vals) - np.min(vals))
    if span <= 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        mid = 0.5 * (lo + hi)
        return mid, prof(mid), True
    best = (None, -math.inf)
    for i in _candidates(taus, vals, h, CANDIDATE_GAP):
        b_lo, b_hi = max(lo, taus[i] - 3 * h), min(hi, taus[i] + 3 * h)
        local = prof.local(b_lo, b_hi)
        fine = np.linspace(b_lo, b_hi, FINE_POINTS)
        fv = local(fine)
        m = int(np.argmax(fv))
        g_lo, g_hi = fine[max(m - 1, 0)], fine[min(m + 1, FINE_POINTS - 1)]
        x, fx = golden_max(local, g_lo, g_hi, GOLDEN_REL_TOL * width)
        if fv[m] > fx:
            x, fx = float(fine[m]), float(fv[m])
        if fx > best[1]:
            best = (x, fx)
    return best[0], best[1], False


def arrival_mle(net: SensorNetwork, model: IntensityModel, j: int, obs: ObservationSet, profile=None):
    """MLE of the arrival time at detector j over [alpha_j, beta_j] and its asymptotic variance.

    Returns ``(tau_hat, sigma2, info)`` where ``info`` carries the search
    window and the flat-likelihood flag.
    """
    prof = profile if profile is not None else detector_profiles(net, model, obs)[j]
    alpha, beta = domain_bounds(net, j)
    tau_hat, value, flat = maximize_profile(prof, alpha, beta)
    shape = shape_of(model, j)
    fisher = information_integral(shape, net.lambda0, net.T - tau_hat)
    if fisher <= 0:
        if not flat:
            raise ZeroInformationError(f"detector {j}: no arrival-time information")
        sigma2 = math.inf
    else:
        sigma2 = 1.0 / fisher
    return tau_hat, sigma2, {"window": (alpha, beta), "flat": flat, "loglik": value}


def arrival_estimates(net: SensorNetwork, model: IntensityModel, obs: ObservationSet, profiles=None) -> ArrivalEstimates:
    profiles = profiles if profiles is not None else detector_profiles(net, model, obs)
    taus, sig, win, flat = [], [], [], []
    for j in range(net.k):
        t, s2, info = arrival_mle(net, model, j, obs, profile=profiles[j])
        taus.append(t)
        sig.append(s2)
        win.append(info["window"])
        flat.append(info["flat"])
    return ArrivalEstimates(tau_hat=taus, sigma2=sig, window=win, flat=np.array(flat))
