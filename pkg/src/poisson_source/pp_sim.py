"""Exact simulation of the k detector paths and the thinning split.

Random streams are keyed by ``(seed, replication, detector, purpose)`` through
:class:`numpy.random.SeedSequence` spawn keys and drive a counter-based Philox
generator, so a replication produces the same events no matter which worker
process runs it or in which order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import SensorNetwork, travel_times
from .signal_model import IntensityModel, PowerLaw, shape_of

PURPOSE = {"paths": 0, "thin": 1, "aux": 2}


class UnboundedIntensityError(ValueError):
    pass


def stream(seed: int, rep: int, detector: int, purpose: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(rep), int(detector), PURPOSE[purpose]))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ObservationSet:
    n: float
    T: float
    events: tuple  # k sorted float arrays

    def __post_init__(self):
        evs = tuple(np.asarray(e, dtype=float) for e in self.events)
        for e in evs:
            if e.ndim != 1:
                raise ValueError("event lists must be one-dimensional")
            if e.size and (e[0] < 0 or e[-1] > self.T):
                raise ValueError("event times outside [0, T]")
            if e.size > 1 and np.any(np.diff(e) < 0):
                raise ValueError("event times must be sorted")
        object.__setattr__(self, "events", evs)

    @property
    def k(self) -> int:
        return len(self.events)

    def counts(self) -> np.ndarray:
        return np.array([e.size for e in self.events])

    def subset(self, detectors: Sequence[int]) -> "ObservationSet":
        return ObservationSet(self.n, self.T, tuple(self.events[j] for j in detectors))

    def shifted(self, dt: float = 0.0) -> "ObservationSet":
        return ObservationSet(self.n, self.T, tuple(e + dt for e in self.events))

    def to_json(self) -> dict:
        n = int(self.n) if float(self.n).is_integer() else float(self.n)
        return {"n": n, "T": float(self.T), "events": [e.tolist() for e in self.events]}

    @classmethod
    def from_json(cls, data: dict) -> "ObservationSet":
        return cls(n=data["n"], T=float(data["T"]), events=tuple(np.asarray(e, dtype=float) for e in data["events"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "ObservationSet":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ThinnedPair:
    y: ObservationSet
    x_tilde: ObservationSet
    p: float


def _sorted_uniforms(rng: np.random.Generator, count: int, lo: float, hi: float) -> np.ndarray:
    # order statistics of `count` uniforms from normalized exponential spacings
    if count == 0:
        return np.empty(0)
    g = np.cumsum(rng.standard_exponential(count + 1))
    return lo + (hi - lo) * (g[:-1] / g[-1])


def _merge_sorted(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if b.size > a.size:
        a, b = b, a
    out = np.empty(a.size + b.size)
    pos = np.searchsorted(a, b, side="right") + np.arange(b.size)
    mask = np.ones(out.size, dtype=bool)
    mask[pos] = False
    out[pos] = b
    out[mask] = a
    return out


def dominating_rate(shape, lambda0: float, s_max: float) -> float:
    sup = shape.sup(s_max)
    if not math.isfinite(sup):
        raise UnboundedIntensityError(f"signal intensity of {shape} is unbounded on [0, {s_max}]")
    # small safety factor covers the grid+refine error for tabulated shapes
    factor = 1.0 if isinstance(shape, PowerLaw) else 1.001
    return factor * sup + lambda0


def sample_detector_thinning(rng, shape, tau: float, lambda0: float, n: float, T: float) -> np.ndarray:
    """Lewis-Shedler: homogeneous candidates at a dominating rate, accepted with prob lambda/bound."""
    bound = dominating_rate(shape, lambda0, T - tau)
    count = rng.poisson(n * bound * T)
    cand = _sorted_uniforms(rng, count, 0.0, T)
    accept = rng.uniform(size=count) * bound < shape.value(cand - tau) + lambda0
    return cand[accept]


def sample_detector_superposition(rng, shape: PowerLaw, tau: float, lambda0: float, n: float, T: float) -> np.ndarray:
    """Noise and signal drawn as two independent processes and merged.

    The power-law signal on ``[tau, T]`` has cumulative intensity proportional
    to ``(t - tau)**(kappa + 1)``, so its points are
    ``tau + (T - tau) * U**(1 / (kappa + 1))`` for sorted uniforms ``U``.
    """
    noise = _sorted_uniforms(rng, rng.poisson(n * lambda0 * T), 0.0, T)
    if tau >= T or shape.a == 0:
        return noise
    mass = float(shape.integral(np.array([T - tau]))[0])
    u = _sorted_uniforms(rng, rng.poisson(n * mass), 0.0, 1.0)
    if shape.kappa == 2.0:
        signal = tau + (T - tau) * np.cbrt(u)
    else:
        signal = tau + (T - tau) * u ** (1.0 / (shape.kappa + 1.0))
    return _merge_sorted(noise, signal)


def sample_paths(
    net: SensorNetwork,
    model: IntensityModel,
    theta0,
    n: float,
    seed: int,
    rep: int = 0,
    method: str = "auto",
) -> ObservationSet:
    """Draw the k independent paths with intensity ``n * (lambda_j(t - tau_j) + lambda0)``.

    ``method`` is ``"thinning"`` (any shape), ``"superposition"`` (power laws
    only) or ``"auto"``, which picks superposition for power laws.
    """
    if n < 1:
        raise ValueError("scale n must be >= 1")
    taus = travel_times(net, theta0)
    events = []
    for j in range(net.k):
        shape = shape_of(model, j)
        rng = stream(seed, rep, j, "paths")
        use_sup = method == "superposition" or (method == "auto" and isinstance(shape, PowerLaw))
        if use_sup:
            if not isinstance(shape, PowerLaw):
                raise ValueError("superposition sampling needs a PowerLaw shape")
            events.append(sample_detector_superposition(rng, shape, taus[j], net.lambda0, n, net.T))
        else:
            events.append(sample_detector_thinning(rng, shape, taus[j], net.lambda0, n, net.T))
    return ObservationSet(n=n, T=net.T, events=tuple(events))


def thin(obs: ObservationSet, p: float, seed: int, rep: int = 0) -> ThinnedPair:
    """Send each event to ``y`` with probability p and to ``x_tilde`` otherwise."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"thinning probability must lie in (0, 1), got {p}")
    ys, xs = [], []
    for j, e in enumerate(obs.events):
        keep = stream(seed, rep, j, "thin").uniform(size=e.size) < p
        ys.append(e[keep])
        xs.append(e[~keep])
    return ThinnedPair(
        y=ObservationSet(obs.n, obs.T, tuple(ys)),
        x_tilde=ObservationSet(obs.n, obs.T, tuple(xs)),
        p=p,
    )


def thinning_probability(n: float, b: float) -> float:
    if n < 2:
        raise ValueError("thinning needs n >= 2")
    if not 0.0 < b < 0.5:
        raise ValueError(f"exponent b must lie in (0, 1/2), got {b}")
    return float(n) ** (-b)
