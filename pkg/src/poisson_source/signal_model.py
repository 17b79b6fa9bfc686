"""Intensity functions and the Fisher information built from them.

A detector j observes a Poisson process with intensity
``n * (lambda_j(t - tau_j) + lambda0)``; everything here is stated at unit
scale ``n = 1``.  A *shape* is the signal part ``lambda_j(s)``, which vanishes
for ``s <= 0``.  Two kinds are provided: :class:`PowerLaw` and
:class:`Tabulated` (user supplied callables).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .geometry import DegenerateGeometryError, SensorNetwork, travel_time

QUAD_EPSABS = 1e-9
QUAD_EPSREL = 1e-11
QUAD_LIMIT = 2000


class NonSmoothModelError(ValueError):
    """Derivative-based quantity requested for a shape outside the smooth regime."""


class ZeroInformationError(ValueError):
    """Fisher information for an arrival time vanishes."""


@dataclass(frozen=True)
class PowerLaw:
    """``lambda(s) = a * s**kappa`` for ``s > 0`` (``s >= 0`` when kappa == 0)."""

    a: float
    kappa: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("amplitude a must be nonnegative")
        if self.kappa <= -0.5:
            raise ValueError("kappa must exceed -1/2")

    @property
    def smooth(self) -> bool:
        return self.kappa > 0.5

    def value(self, s):
        s = np.asarray(s, dtype=float)
        pos = s > 0 if self.kappa != 0 else s >= 0
        out = np.zeros_like(s)
        out[pos] = self.a * s[pos] ** self.kappa
        return out

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        if self.kappa != 0:
            out[pos] = self.a * self.kappa * s[pos] ** (self.kappa - 1.0)
        return out

    def integral(self, s):
        """``int_0^s lambda``, zero for ``s <= 0``."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = self.a * s[pos] ** (self.kappa + 1.0) / (self.kappa + 1.0)
        return out

    def sup(self, s_max: float) -> float:
        if s_max <= 0:
            return 0.0
        if self.kappa < 0:
            return math.inf
        if self.kappa == 0:
            return self.a
        return self.a * s_max**self.kappa

    def log_ratio(self, s, lambda0: float):
        """``log(1 + lambda(s) / lambda0)`` evaluated for ``s > 0`` only."""
        s = np.asarray(s, dtype=float)
        return np.log1p((self.a / lambda0) * s**self.kappa)


@dataclass(frozen=True)
class Tabulated:
    """Arbitrary shape given by vectorized callables on ``s > 0``.

    ``shape`` and ``derivative`` are required; ``integral`` (the antiderivative
    vanishing at 0) is optional and falls back to quadrature.  The callables
    are only ever evaluated at positive arguments.
    """

    shape: Callable
    derivative: Callable
    integral_fn: Optional[Callable] = None
    smooth: bool = True

    def value(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        if np.any(pos):
            out[pos] = self.shape(s[pos])
        return out

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        if np.any(pos):
            out[pos] = self.derivative(s[pos])
        return out

    def integral(self, s):
        s = np.asarray(s, dtype=float)
        if self.integral_fn is not None:
            out = np.zeros_like(s)
            pos = s > 0
            if np.any(pos):
                out[pos] = self.integral_fn(s[pos])
            return out
        flat = [
            integrate.quad(lambda u: float(self.shape(np.array([u]))[0]), 0.0, v,
                           epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)[0]
            if v > 0 else 0.0
            for v in s.ravel()
        ]
        return np.array(flat).reshape(s.shape)

    def sup(self, s_max: float, grid: int = 4001) -> float:
        """Grid maximum refined by a bounded scalar search around the best node."""
        if s_max <= 0:
            return 0.0
        s = np.linspace(s_max / grid, s_max, grid)
        vals = self.shape(s)
        if not np.all(np.isfinite(vals)):
            return math.inf
        i = int(np.argmax(vals))
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, grid - 1)]
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(lambda u: -float(self.shape(np.array([u]))[0]),
                              bounds=(lo, hi), method="bounded")
        return float(max(vals[i], -res.fun))

    def log_ratio(self, s, lambda0: float):
        return np.log1p(self.shape(np.asarray(s, dtype=float)) / lambda0)


Shape = Union[PowerLaw, Tabulated]
IntensityModel = Union[Shape, Sequence[Shape]]


def shape_of(model: IntensityModel, j: int) -> Shape:
    """The shape used by detector j (a single shape is shared by all detectors)."""
    if isinstance(model, (PowerLaw, Tabulated)):
        return model
    return model[j]


def is_smooth(model: IntensityModel, k: int) -> bool:
    return all(shape_of(model, j).smooth for j in range(k))


@dataclass(frozen=True)
class FisherInfo:
    matrix: np.ndarray
    t_end: Optional[float] = None  # None for the full horizon

    @property
    def kind(self) -> str:
        return "full" if self.t_end is None else "truncated"

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


@dataclass(frozen=True)
class ArrivalFisher:
    diag: np.ndarray

    @property
    def sigma2(self) -> np.ndarray:
        return 1.0 / np.asarray(self.diag)


def intensity_at(model: IntensityModel, j: int, tau_j: float, t: float, lambda0: float) -> float:
    return float(shape_of(model, j).value(np.array([t - tau_j]))[0]) + lambda0


def intensity_derivative_at(model: IntensityModel, j: int, tau_j: float, t: float) -> float:
    shape = shape_of(model, j)
    s = t - tau_j
    if s <= 0:
        return 0.0
    if not shape.smooth:
        raise NonSmoothModelError(f"derivative undefined in the non-smooth regime ({shape})")
    return float(shape.deriv(np.array([s]))[0])


def information_integral(shape: Shape, lambda0: float, s_end: float) -> float:
    """``int_0^{s_end} lambda'(s)^2 / (lambda(s) + lambda0) ds``."""
    if s_end <= 0:
        return 0.0
    if not shape.smooth:
        raise NonSmoothModelError(f"Fisher information diverges for {shape}")

    def integrand(s):
        arr = np.array([s])
        return float(shape.deriv(arr)[0] ** 2 / (shape.value(arr)[0] + lambda0))

    # split off [0, s_end/2] so an integrable singularity at 0 stays at an endpoint
    mid = 0.5 * s_end
    a = integrate.quad(integrand, 0.0, mid, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)[0]
    b = integrate.quad(integrand, mid, s_end, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)[0]
    return a + b


def fisher_weight(net: SensorNetwork, model: IntensityModel, j: int, theta, t_end: Optional[float] = None) -> float:
    """Weight J_j(theta), or its truncated version J_{j,t} when ``t_end < T``.

    The squared distance is used in the prefactor for both versions.
    """
    t_end = net.T if t_end is None else t_end
    s = net.sensors[j]
    x, y = theta
    d = math.hypot(s.x - x, s.y - y)
    if d == 0.0:
        raise DegenerateGeometryError(f"theta coincides with sensor {j}")
    tau = d / net.nu
    if t_end <= tau:
        return 0.0
    return information_integral(shape_of(model, j), net.lambda0, t_end - tau) / (net.nu**2 * d**2)


def fisher_matrix(net: SensorNetwork, model: IntensityModel, theta, t_end: Optional[float] = None) -> FisherInfo:
    x, y = theta
    m = np.zeros((2, 2))
    for j, s in enumerate(net.sensors):
        w = fisher_weight(net, model, j, theta, t_end)
        if w == 0.0:
            continue
        v = np.array([s.x - x, s.y - y])
        m += w * np.outer(v, v)
    return FisherInfo(matrix=m, t_end=t_end)


def arrival_fisher(net: SensorNetwork, model: IntensityModel, theta) -> ArrivalFisher:
    taus = [travel_time(net, j, theta) for j in range(net.k)]
    return arrival_fisher_at(net, model, taus)


def arrival_fisher_at(net: SensorNetwork, model: IntensityModel, taus: Sequence[float]) -> ArrivalFisher:
    """Diagonal arrival-time information evaluated at given arrival times."""
    diag = np.array(
        [information_integral(shape_of(model, j), net.lambda0, net.T - tau) for j, tau in enumerate(taus)]
    )
    if np.any(diag <= 0):
        bad = [j for j in range(len(diag)) if diag[j] <= 0]
        raise ZeroInformationError(f"no arrival-time information for detectors {bad}")
    return ArrivalFisher(diag=diag)
