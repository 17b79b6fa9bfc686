"""Experiment configuration, read from TOML or JSON.

The file mirrors :class:`ExperimentConfig`::

    seed = 7
    replications = 2000
    scales = [10000]
    methods = ["mle", "lse"]
    theta0 = [0.3, 0.4]
    thinning_b = 0.4
    t_grid = [2.0, 4.0, 6.0]
    prelim_detectors = "all"

    [network]
    sensors = [[-1, -1], [2, -1], [2, 2], [-1, 2]]
    nu = 1.0
    T = 6.0
    lambda0 = 1.0
    region = [0.0, 1.0, 0.0, 1.0]   # x_min, x_max, y_min, y_max

    [intensity]
    kind = "power_law"
    a = 3.0
    kappa = 2.0
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

from ..geometry import ConfigurationError, Point2, Region, SensorNetwork
from ..signal_model import PowerLaw

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METHODS = ("score", "mle", "be", "lse", "arrivals", "onestep", "process", "lse4")


@dataclass
class NetworkSpec:
    sensors: list
    nu: float = 1.0
    T: float = 6.0
    lambda0: float = 1.0
    region: list = field(default_factory=lambda: [0.0, 1.0, 0.0, 1.0])

    def build(self) -> SensorNetwork:
        if len(self.region) != 4:
            raise ConfigurationError("region must be [x_min, x_max, y_min, y_max]")
        return SensorNetwork(
            sensors=tuple(Point2.of(s) for s in self.sensors),
            nu=float(self.nu),
            T=float(self.T),
            lambda0=float(self.lambda0),
            theta_region=Region(*map(float, self.region)),
        )


@dataclass
class IntensitySpec:
    kind: str = "power_law"
    a: float = 3.0
    kappa: float = 2.0

    def build(self) -> PowerLaw:
        if self.kind != "power_law":
            raise ConfigurationError(f"unknown intensity kind {self.kind!r} (config files support 'power_law')")
        return PowerLaw(float(self.a), float(self.kappa))


@dataclass
class ExperimentConfig:
    network: NetworkSpec
    intensity: IntensitySpec
    theta0: list
    scales: list
    replications: int = 100
    seed: int = 0
    methods: list = field(default_factory=lambda: ["mle"])
    thinning_b: float = 0.4
    t_grid: list = field(default_factory=list)
    prelim_detectors: Union[str, int] = "all"

    def __post_init__(self):
        if isinstance(self.network, dict):
            self.network = NetworkSpec(**self.network)
        if isinstance(self.intensity, dict):
            self.intensity = IntensitySpec(**self.intensity)
        self.theta0 = [float(v) for v in self.theta0]
        self.scales = [float(n) for n in self.scales]
        self.methods = list(self.methods)
        self.t_grid = [float(t) for t in self.t_grid]
        self.validate()

    def validate(self) -> None:
        net = self.build_network()  # checks beta_j < T and the sensor layout
        self.build_model()
        if len(self.theta0) != 2 or not net.theta_region.contains(self.theta0):
            raise ConfigurationError(f"theta0={self.theta0} is not inside the parameter region")
        if int(self.replications) < 1:
            raise ConfigurationError("replications must be >= 1")
        if not self.scales or min(self.scales) < 1:
            raise ConfigurationError("scales must be a nonempty list of n >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigurationError(f"unknown methods {bad}; choose from {list(METHODS)}")
        if not 0.0 < self.thinning_b < 0.5:
            raise ConfigurationError("thinning_b must lie in (0, 1/2)")
        if any(not 0.0 < t <= net.T for t in self.t_grid) or self.t_grid != sorted(self.t_grid):
            raise ConfigurationError("t_grid must be sorted within (0, T]")
        if self.prelim_detectors not in ("all", 3):
            raise ConfigurationError("prelim_detectors must be 'all' or 3")

    def build_network(self) -> SensorNetwork:
        return self.network.build()

    def build_model(self) -> PowerLaw:
        return self.intensity.build()

    @property
    def theta0_point(self) -> Point2:
        return Point2(*self.theta0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
        return cls.from_dict(data)


def reference_config(**overrides) -> ExperimentConfig:
    """The desk-scale reference setup used by the acceptance runs."""
    base = dict(
        network=NetworkSpec(sensors=[[-1, -1], [2, -1], [2, 2], [-1, 2]], nu=1.0, T=6.0, lambda0=1.0,
                            region=[0.0, 1.0, 0.0, 1.0]),
        intensity=IntensitySpec("power_law", 3.0, 2.0),
        theta0=[0.3, 0.4],
        scales=[1e4],
        replications=100,
        seed=20240601,
        methods=["mle"],
    )
    base.update(overrides)
    return ExperimentConfig(**base)
