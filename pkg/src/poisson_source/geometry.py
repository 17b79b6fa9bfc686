"""Planar geometry of the source and the detectors.

Travel times tau_j(theta) = |sensor_j - theta| / nu, their gradients, the range
[alpha_j, beta_j] of each travel time over the parameter rectangle, and the
configuration checks needed before any estimation is attempted.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DegenerateGeometryError(ValueError):
    """Raised when a quantity is undefined because theta sits on a sensor."""


class ConfigurationError(ValueError):
    """Raised for a sensor network that violates its invariants."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @classmethod
    def of(cls, p) -> "Point2":
        if isinstance(p, Point2):
            return p
        x, y = p
        return cls(float(x), float(y))

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle used as the parameter set."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"empty rectangle {self}")

    @property
    def diameter(self) -> float:
        return math.hypot(self.x_max - self.x_min, self.y_max - self.y_min)

    @property
    def centroid(self) -> Point2:
        return Point2(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def corners(self) -> np.ndarray:
        return np.array(
            [
                [self.x_min, self.y_min],
                [self.x_max, self.y_min],
                [self.x_max, self.y_max],
                [self.x_min, self.y_max],
            ]
        )

    def contains(self, p, margin: float = 0.0) -> bool:
        x, y = p
        return (
            self.x_min - margin <= x <= self.x_max + margin
            and self.y_min - margin <= y <= self.y_max + margin
        )

    def clamp(self, p) -> np.ndarray:
        x, y = p
        return np.array(
            [min(max(x, self.x_min), self.x_max), min(max(y, self.y_min), self.y_max)]
        )

    def translated(self, dx: float, dy: float) -> "Region":
        return Region(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)


@dataclass(frozen=True)
class SensorNetwork:
    sensors: tuple
    nu: float
    T: float
    lambda0: float
    theta_region: Region
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(Point2.of(s) for s in self.sensors))
        if self.validate:
            self.check()

    def check(self) -> None:
        if self.k < 3:
            raise ConfigurationError(f"need at least 3 sensors, got {self.k}")
        if not self.nu > 0:
            raise ConfigurationError("propagation speed nu must be positive")
        if not self.T > 0:
            raise ConfigurationError("horizon T must be positive")
        if not self.lambda0 > 0:
            raise ConfigurationError("noise level lambda0 must be positive")
        for j in range(self.k):
            _, beta = domain_bounds(self, j)
            if not beta < self.T:
                raise ConfigurationError(
                    f"sensor {j}: latest arrival beta_j={beta:.6g} is not below T={self.T}"
                )
        if not collinearity_check(self.sensors):
            raise ConfigurationError("all sensors lie on one line; source is not identifiable")

    @property
    def k(self) -> int:
        return len(self.sensors)

    @property
    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.sensors], dtype=float)

    def translated(self, dx: float, dy: float) -> "SensorNetwork":
        return SensorNetwork(
            sensors=tuple(Point2(s.x + dx, s.y + dy) for s in self.sensors),
            nu=self.nu,
            T=self.T,
            lambda0=self.lambda0,
            theta_region=self.theta_region.translated(dx, dy),
            validate=self.validate,
        )

    def permuted(self, order: Sequence[int]) -> "SensorNetwork":
        return SensorNetwork(
            sensors=tuple(self.sensors[i] for i in order),
            nu=self.nu,
            T=self.T,
            lambda0=self.lambda0,
            theta_region=self.theta_region,
            validate=self.validate,
        )


def travel_time(net: SensorNetwork, j: int, theta) -> float:
    s = net.sensors[j]
    x, y = theta
    return math.hypot(s.x - x, s.y - y) / net.nu


def travel_times(net: SensorNetwork, theta) -> np.ndarray:
    """All k travel times at once."""
    d = net.positions - np.asarray(tuple(theta), dtype=float)
    return np.hypot(d[:, 0], d[:, 1]) / net.nu


def travel_time_gradient(net: SensorNetwork, j: int, theta) -> np.ndarray:
    s = net.sensors[j]
    x, y = theta
    dx, dy = s.x - x, s.y - y
    d = math.hypot(dx, dy)
    if d == 0.0:
        raise DegenerateGeometryError(f"theta coincides with sensor {j}")
    return np.array([-dx / (net.nu * d), -dy / (net.nu * d)])


def travel_time_gradients(net: SensorNetwork, theta) -> np.ndarray:
    """(k, 2) array whose row j is the gradient of tau_j at theta."""
    diff = net.positions - np.asarray(tuple(theta), dtype=float)
    d = np.hypot(diff[:, 0], diff[:, 1])
    if np.any(d == 0.0):
        raise DegenerateGeometryError(f"theta coincides with sensor {int(np.argmin(d))}")
    return -diff / (net.nu * d[:, None])


def domain_bounds(net: SensorNetwork, j: int) -> tuple[float, float]:
    """(alpha_j, beta_j): smallest and largest travel time to sensor j over the rectangle."""
    s = net.sensors[j]
    reg = net.theta_region
    near = reg.clamp((s.x, s.y))
    alpha = math.hypot(s.x - near[0], s.y - near[1]) / net.nu
    far = reg.corners() - np.array([s.x, s.y])
    beta = float(np.max(np.hypot(far[:, 0], far[:, 1]))) / net.nu
    return alpha, beta


def network_diameter(points: Sequence) -> float:
    pts = np.array([tuple(p) for p in points], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))


def collinearity_check(sensors: Sequence, rel_tol: float = 1e-9) -> bool:
    """True iff some triple of sensors spans a triangle of non-negligible area.

    The area threshold is ``rel_tol * diameter**2`` so the test does not depend
    on the length unit.
    """
    pts = [tuple(p) for p in sensors]
    if len(pts) < 3:
        raise ValueError("collinearity check needs at least 3 points")
    eps_area = rel_tol * network_diameter(pts) ** 2
    for (x1, y1), (x2, y2), (x3, y3) in itertools.combinations(pts, 3):
        area = 0.5 * abs((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))
        if area > eps_area:
            return True
    return False
