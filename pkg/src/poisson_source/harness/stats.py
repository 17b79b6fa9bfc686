"""Aggregate statistics for Monte Carlo runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

MIN_NORMALITY_SAMPLES = 100


class InsufficientScalesError(ValueError):
    pass


class SingularTargetError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    stderr: float
    scales: tuple

    def predict(self, n) -> np.ndarray:
        return np.exp(self.intercept + self.slope * np.log(n))


def rate_regression(scales, mse) -> RateFit:
    """OLS fit of ``log mse = c + slope * log n``."""
    n = np.asarray(scales, dtype=float)
    m = np.asarray(mse, dtype=float)
    if n.size != m.size:
        raise ValueError("scales and mse differ in length")
    if np.unique(n).size < 3:
        raise InsufficientScalesError(f"need at least 3 distinct scales, got {np.unique(n).size}")
    if np.any(m <= 0) or np.any(~np.isfinite(m)):
        raise ValueError("mse values must be positive and finite")
    fit = stats.linregress(np.log(n), np.log(m))
    return RateFit(float(fit.slope), float(fit.intercept), float(fit.stderr), tuple(n.tolist()))


def sample_covariance(x) -> np.ndarray:
    """Two-pass unbiased covariance of the rows of x."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        return np.full((x.shape[1], x.shape[1]), np.nan)
    d = x - x.mean(axis=0)
    c = d.T @ d / (x.shape[0] - 1)
    return 0.5 * (c + c.T)


def relative_frobenius(emp, target) -> float:
    target = np.asarray(target, dtype=float)
    return float(np.linalg.norm(np.asarray(emp) - target) / np.linalg.norm(target))


def relative_to_trace(emp, target) -> float:
    """Largest entrywise deviation divided by the trace of the target."""
    target = np.asarray(target, dtype=float)
    return float(np.max(np.abs(np.asarray(emp) - target)) / np.trace(target))


def mahalanobis2(samples, target) -> np.ndarray:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    ev = np.linalg.eigvalsh(0.5 * (target + target.T))
    if not np.all(np.isfinite(ev)) or ev[0] <= 1e-14 * max(ev[-1], 0.0):
        raise SingularTargetError("target covariance is singular")
    try:
        chol = np.linalg.cholesky(target)
    except np.linalg.LinAlgError as exc:
        raise SingularTargetError("target covariance is not positive definite") from exc
    z = np.linalg.solve(chol, samples.T)
    return np.sum(z * z, axis=0)


def ellipse_coverage(samples, target, level: float = 0.95) -> float:
    d2 = mahalanobis2(samples, target)
    return float(np.mean(d2 <= stats.chi2.ppf(level, np.atleast_2d(target).shape[0])))


@dataclass(frozen=True)
class NormalityDiagnostics:
    ks_statistic: float
    ks_pvalue: float
    coverage: float
    count: int

    def coverage_se(self) -> float:
        return float(np.sqrt(0.95 * 0.05 / self.count))


def normality_diagnostics(samples, target, level: float = 0.95) -> NormalityDiagnostics:
    """Compare sqrt(n)-scaled errors with N(0, target).

    Squared Mahalanobis distances are tested against chi-square(d) with a
    one-sample Kolmogorov-Smirnov test; ``coverage`` is the fraction inside
    the ``level`` ellipse.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < MIN_NORMALITY_SAMPLES:
        raise ValueError(f"need at least {MIN_NORMALITY_SAMPLES} samples, got {samples.shape[0]}")
    target = np.atleast_2d(np.asarray(target, dtype=float))
    d = target.shape[0]
    d2 = mahalanobis2(samples, target)
    ks = stats.kstest(d2, stats.chi2(d).cdf)
    cov = float(np.mean(d2 <= stats.chi2.ppf(level, d)))
    return NormalityDiagnostics(float(ks.statistic), float(ks.pvalue), cov, int(samples.shape[0]))
