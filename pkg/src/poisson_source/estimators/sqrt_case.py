"""Arrival time of a square-root onset ``a * sqrt(t - tau)`` at a single detector.

The Fisher information for tau is infinite here; the MLE converges at the
rate ``(n ln n)^{-1/2}`` instead of ``n^{-1/2}``.
"""

from __future__ import annotations

import math

import numpy as np

from ..profile import DetectorProfile
from ..signal_model import PowerLaw
from .arrival import maximize_profile


class WrongExponentError(ValueError):
    pass


def sqrt_case_gamma2(a: float, lambda0: float, remaining: float) -> float:
    """Limit curvature constant of the normalized log-likelihood ratio,
    ``a^2 / (8 (a sqrt(T - tau) + lambda0))``."""
    return a * a / (8.0 * (a * math.sqrt(remaining) + lambda0))


def estimate_delay_sqrt_case(model: PowerLaw, lambda0: float, T: float, events, n: float, window=None):
    """Return ``(tau_hat, predicted_var)`` with ``predicted_var = 1 / (gamma^2 n ln n)``.

    ``window`` bounds the search (default ``(0, T)``); gamma^2 is evaluated at tau_hat.
    """
    if not isinstance(model, PowerLaw) or model.kappa != 0.5:
        raise WrongExponentError(f"square-root onset required, got {model}")
    lo, hi = window if window is not None else (0.0, T)
    prof = DetectorProfile(np.asarray(events, dtype=float), model, lambda0, n, T)
    tau_hat, _, _ = maximize_profile(prof, lo, hi)
    g2 = sqrt_case_gamma2(model.a, lambda0, T - tau_hat)
    return tau_hat, 1.0 / (g2 * n * math.log(n))
