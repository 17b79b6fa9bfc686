"""Single-detector delay study for the square-root onset ``a * sqrt(t - tau)``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..estimators.sqrt_case import estimate_delay_sqrt_case, sqrt_case_gamma2
from ..pp_sim import sample_detector_superposition, stream
from ..signal_model import PowerLaw
from . import stats
from .experiment import scale_seed


@dataclass
class DelayConfig:
    a: float = 1.0
    lambda0: float = 0.5
    tau0: float = 1.0
    T: float = 2.0
    scales: list = field(default_factory=lambda: [1e3, 1e4, 1e5])
    replications: int = 2000
    seed: int = 0
    half_window: float = 0.5  # search over [tau0 - w, tau0 + w]

    @property
    def model(self) -> PowerLaw:
        return PowerLaw(self.a, 0.5)

    @property
    def window(self) -> tuple:
        return (max(0.0, self.tau0 - self.half_window), min(self.T, self.tau0 + self.half_window))


@dataclass
class DelayReport:
    config: dict
    results: list
    estimates: dict  # n -> array of tau_hat

    def rate(self) -> stats.RateFit:
        return stats.rate_regression([e["n"] for e in self.results], [e["mse"] for e in self.results])

    def get(self, n: float) -> dict:
        return next(e for e in self.results if e["n"] == float(n))


def delay_replication(cfg: DelayConfig, scale_index: int, rep: int) -> float:
    n = float(cfg.scales[scale_index])
    rng = stream(scale_seed(cfg.seed, scale_index), rep, 0, "paths")
    events = sample_detector_superposition(rng, cfg.model, cfg.tau0, cfg.lambda0, n, cfg.T)
    tau_hat, _ = estimate_delay_sqrt_case(cfg.model, cfg.lambda0, cfg.T, events, n, window=cfg.window)
    return tau_hat


def run_delay_experiment(cfg: DelayConfig) -> DelayReport:
    """Empirical ``Var(tau_hat) * n ln n`` per scale next to the closed-form constant."""
    g2 = sqrt_case_gamma2(cfg.a, cfg.lambda0, cfg.T - cfg.tau0)
    results, estimates = [], {}
    for s, n in enumerate(cfg.scales):
        n = float(n)
        est = np.array([delay_replication(cfg, s, r) for r in range(int(cfg.replications))])
        estimates[n] = est
        err = est - cfg.tau0
        var = float(np.var(est, ddof=1)) if est.size > 1 else math.nan
        results.append({
            "n": n,
            "mean": float(est.mean()),
            "bias": float(err.mean()),
            "var": var,
            "mse": float(np.mean(err**2)),
            "var_n_log_n": var * n * math.log(n),
            "predicted": 1.0 / g2,
        })
    return DelayReport(config=asdict(cfg), results=results, estimates=estimates)
