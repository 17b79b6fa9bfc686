from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..geometry import Point2


class OptimizerFailure(RuntimeError):
    pass


class DegenerateInformationError(ValueError):
    """The (truncated) Fisher matrix cannot be inverted."""


class SingularDesignError(np.linalg.LinAlgError):
    pass


def inverse_or_none(info) -> Optional[np.ndarray]:
    """I^{-1} for a FisherInfo, or None when the matrix is numerically singular."""
    m = info.matrix
    tr = float(np.trace(m))
    if tr <= 0 or np.linalg.det(m) <= 1e-10 * tr * tr:
        return None
    return np.linalg.inv(m)


@dataclass
class EstimationResult:
    label: str
    theta: Optional[Point2]
    normalized_cov: Optional[np.ndarray]
    diagnostics: dict = field(default_factory=dict)
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.theta is not None

    def as_array(self) -> np.ndarray:
        return self.theta.as_array() if self.theta is not None else np.full(2, np.nan)


@dataclass
class ArrivalEstimates:
    tau_hat: np.ndarray
    sigma2: np.ndarray
    window: np.ndarray  # (k, 2)
    flat: np.ndarray = None

    def __post_init__(self):
        self.tau_hat = np.asarray(self.tau_hat, dtype=float)
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        self.window = np.asarray(self.window, dtype=float)
        if self.flat is None:
            self.flat = np.zeros(self.tau_hat.size, dtype=bool)


@dataclass
class LseResult:
    gamma: np.ndarray
    A: np.ndarray
    D: np.ndarray
    s_n: float
    cond_A: float
    n: float

    @property
    def theta_star(self) -> Point2:
        return Point2(float(self.gamma[0]), float(self.gamma[1]))

    @property
    def M(self) -> np.ndarray:
        return self.D[:2, :2]

    @property
    def s_n_ok(self) -> bool:
        return self.s_n < self.n ** (-0.25)


@dataclass
class UnknownStartResult:
    gamma: np.ndarray  # x0, y0, emission time, x0^2 + y0^2 - nu^2 tau*^2
    consistency: float
    cond: float

    @property
    def theta(self) -> Point2:
        return Point2(float(self.gamma[0]), float(self.gamma[1]))

    @property
    def emission_time(self) -> float:
        return float(self.gamma[2])
