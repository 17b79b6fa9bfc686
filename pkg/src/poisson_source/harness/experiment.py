"""Monte Carlo orchestration: simulate, estimate, aggregate, persist.

Every replication is a pure function of ``(config, scale index, rep)``.  The
per-scale seed is derived with a SeedSequence spawn key, and the simulation
and thinning streams are keyed further by replication and detector, so the
report does not depend on how replications are spread over worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..estimators import (
    DegenerateInformationError,
    OptimizerFailure,
    SingularDesignError,
    arrival_estimates,
    bayes_estimate,
    joint_mle,
    lse_estimate,
    lse_estimate_unknown_start,
    one_step,
    one_step_process,
)
from ..estimators.bayes import PosteriorUnderflow
from ..estimators.lse import lse_covariance
from ..geometry import Point2, SensorNetwork, travel_times
from ..likelihood import detector_profiles, score
from ..pp_sim import ObservationSet, sample_paths, thin, thinning_probability
from ..signal_model import ZeroInformationError, arrival_fisher, fisher_matrix
from . import stats
from .config import ExperimentConfig

SCHEMA = 1
FAILURE_BUDGET = 0.05
COVERAGE_LEVEL = 0.95

# failures that count against the budget instead of aborting the run
RECOVERABLE = (
    SingularDesignError,
    OptimizerFailure,
    DegenerateInformationError,
    ZeroInformationError,
    PosteriorUnderflow,
    np.linalg.LinAlgError,
)


class FailureBudgetExceeded(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Record:
    rep: int
    method: str
    n: float
    values: tuple
    status: str = "ok"
    seed: int = 0


def scale_seed(seed: int, scale_index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(scale_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _prelim_network(net: SensorNetwork, which) -> tuple:
    if which == "all":
        return net, list(range(net.k))
    idx = [0, 1, 2]
    return SensorNetwork(tuple(net.sensors[i] for i in idx), net.nu, net.T, net.lambda0, net.theta_region), idx


def run_replication(cfg: ExperimentConfig, scale_index: int, rep: int):
    """All requested estimates for one replication; returns ``(records, seconds per method)``."""
    net = cfg.build_network()
    model = cfg.build_model()
    theta0 = cfg.theta0_point
    n = cfg.scales[scale_index]
    seed = scale_seed(cfg.seed, scale_index)
    methods = set(cfg.methods)
    records, timing = [], {}

    def add(method, values, status="ok"):
        records.append(Record(rep, method, n, tuple(float(v) for v in values), status, seed))

    def failed(method, exc, dims=2):
        add(method, [math.nan] * dims, f"failed:{type(exc).__name__}")

    t0 = time.perf_counter()
    obs = sample_paths(net, model, theta0, n, seed, rep)
    profiles = detector_profiles(net, model, obs)
    timing["simulate"] = time.perf_counter() - t0

    if "score" in methods:
        t0 = time.perf_counter()
        add("score", score(net, model, theta0, obs))
        timing["score"] = time.perf_counter() - t0

    arrivals = None
    if methods & {"arrivals", "lse", "lse4"}:
        t0 = time.perf_counter()
        try:
            arrivals = arrival_estimates(net, model, obs, profiles)
            if "arrivals" in methods:
                for j, tau in enumerate(arrivals.tau_hat):
                    add(f"tau{j}", [tau], "flat" if arrivals.flat[j] else "ok")
        except RECOVERABLE as exc:
            for j in range(net.k):
                failed(f"tau{j}", exc, 1)
        timing["arrivals"] = time.perf_counter() - t0

    if "lse" in methods:
        t0 = time.perf_counter()
        try:
            if arrivals is None:
                raise ZeroInformationError("arrival estimation failed")
            res = lse_estimate(net, arrivals, n)
            add("lse", res.gamma[:2], "ok" if res.s_n_ok else "ok:s_n")
            add("lse_gamma3", res.gamma[2:])
        except RECOVERABLE as exc:
            failed("lse", exc)
            failed("lse_gamma3", exc, 1)
        timing["lse"] = time.perf_counter() - t0

    if "lse4" in methods:
        t0 = time.perf_counter()
        try:
            if arrivals is None:
                raise ZeroInformationError("arrival estimation failed")
            res = lse_estimate_unknown_start(net, arrivals)
            add("lse4", res.gamma[:2])
            add("lse4_start", [res.emission_time])
        except RECOVERABLE as exc:
            failed("lse4", exc)
            failed("lse4_start", exc, 1)
        timing["lse4"] = time.perf_counter() - t0

    if "mle" in methods:
        t0 = time.perf_counter()
        try:
            add("mle", joint_mle(net, model, obs, profiles=profiles).as_array())
        except RECOVERABLE as exc:
            failed("mle", exc)
        timing["mle"] = time.perf_counter() - t0

    if "be" in methods:
        t0 = time.perf_counter()
        try:
            add("be", bayes_estimate(net, model, obs, profiles=profiles).as_array())
        except RECOVERABLE as exc:
            failed("be", exc)
        timing["be"] = time.perf_counter() - t0

    if methods & {"onestep", "process"}:
        t0 = time.perf_counter()
        p = thinning_probability(n, cfg.thinning_b)
        pair = thin(obs, p, seed, rep)
        pnet, idx = _prelim_network(net, cfg.prelim_detectors)
        y_obs = ObservationSet(p * n, net.T, tuple(pair.y.events[i] for i in idx))
        try:
            pre = lse_estimate(pnet, arrival_estimates(pnet, model, y_obs), p * n)
            # the preliminary estimator is taken with values in Theta
            theta_pre = Point2(*net.theta_region.clamp(pre.gamma[:2]))
        except RECOVERABLE as exc:
            theta_pre = None
            pre_exc = exc
        if "onestep" in methods:
            if theta_pre is None:
                failed("onestep", pre_exc)
            else:
                try:
                    add("onestep", one_step(net, model, theta_pre, pair.x_tilde, p).as_array())
                except RECOVERABLE as exc:
                    failed("onestep", exc)
        if "process" in methods:
            for t in cfg.t_grid:
                if theta_pre is None:
                    failed(f"process({t:g})", pre_exc)
            if theta_pre is not None and cfg.t_grid:
                for t, res in zip(cfg.t_grid, one_step_process(net, model, theta_pre, pair.x_tilde, p, cfg.t_grid)):
                    add(f"process({t:g})", res.as_array(), res.status)
        timing["onestep"] = time.perf_counter() - t0

    return records, timing


def _run_task(args):
    return run_replication(*args)


# ---------------------------------------------------------------- aggregation


def targets(cfg: ExperimentConfig) -> dict:
    """Asymptotic covariance of each method's normalized error at theta0."""
    net, model, theta0 = cfg.build_network(), cfg.build_model(), cfg.theta0_point
    info = fisher_matrix(net, model, theta0)
    inv = info.inverse()
    taus = travel_times(net, theta0)
    sigma2 = arrival_fisher(net, model, theta0).sigma2
    D = lse_covariance(net.positions, net.nu, taus, sigma2)
    out = {"score": info.matrix, "mle": inv, "be": inv, "onestep": inv, "lse": D[:2, :2], "lse_gamma": D}
    for j in range(net.k):
        out[f"tau{j}"] = np.array([[sigma2[j]]])
    for t in cfg.t_grid:
        it = fisher_matrix(net, model, theta0, t_end=t).matrix
        tr = np.trace(it)
        if tr > 0 and np.linalg.det(it) > 1e-10 * tr * tr:
            out[f"process({t:g})"] = np.linalg.inv(it)
    return out


def truths(cfg: ExperimentConfig) -> dict:
    net, theta0 = cfg.build_network(), cfg.theta0_point
    th = np.array(cfg.theta0)
    taus = travel_times(net, theta0)
    out = {"score": np.zeros(2), "lse_gamma3": np.array([th @ th]), "lse4_start": np.zeros(1)}
    for j in range(net.k):
        out[f"tau{j}"] = np.array([taus[j]])
    return out


def _group_stats(method, n, recs, truth, target, M):
    good = [r for r in recs if r.status in ("ok", "ok:s_n")]
    statuses = {}
    for r in recs:
        statuses[r.status] = statuses.get(r.status, 0) + 1
    failures = sum(v for k, v in statuses.items() if k.startswith("failed"))
    entry = {"method": method, "n": n, "count": len(good), "failures": failures, "statuses": statuses}
    if not good:
        return entry
    vals = np.array([r.values for r in good])
    mean = vals.mean(axis=0)
    scale = 1.0 if method == "score" else math.sqrt(n)
    err = scale * (vals - truth)
    cov = stats.sample_covariance(err)
    entry.update(
        mean=mean.tolist(),
        bias=(mean - truth).tolist(),
        mse=float(np.mean(np.sum((vals - truth) ** 2, axis=1))),
        cov_n=cov.tolist(),
    )
    if target is not None:
        entry["target"] = np.asarray(target).tolist()
        if len(good) > 1:
            entry["rel_frobenius"] = stats.relative_frobenius(cov, target)
            entry["rel_trace"] = stats.relative_to_trace(cov, target)
            entry["mean_se"] = (np.sqrt(np.diag(cov) / len(good))).tolist()
        if method != "score":
            entry["coverage"] = stats.ellipse_coverage(err, target, COVERAGE_LEVEL)
            if len(good) >= stats.MIN_NORMALITY_SAMPLES:
                nd = stats.normality_diagnostics(err, target, COVERAGE_LEVEL)
                entry["ks_statistic"], entry["ks_pvalue"] = nd.ks_statistic, nd.ks_pvalue
    return entry


@dataclass
class ExperimentReport:
    config: dict
    results: list
    records: list = field(default_factory=list, repr=False)
    timing: dict = field(default_factory=dict)
    schema: int = SCHEMA

    def get(self, method: str, n: float) -> dict:
        for e in self.results:
            if e["method"] == method and e["n"] == float(n):
                return e
        raise KeyError((method, n))

    def values(self, method: str, n: float) -> np.ndarray:
        return np.array([r.values for r in self.records if r.method == method and r.n == float(n) and r.status.startswith("ok")])

    def rate(self, method: str) -> stats.RateFit:
        entries = sorted((e for e in self.results if e["method"] == method and "mse" in e), key=lambda e: e["n"])
        return stats.rate_regression([e["n"] for e in entries], [e["mse"] for e in entries])

    def deterministic(self) -> dict:
        return {"schema": self.schema, "config": self.config, "results": self.results}

    def to_json(self, timing: bool = True) -> dict:
        out = self.deterministic()
        if timing:
            out["timing"] = self.timing
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, allow_nan=True))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "method", "n", "x", "y", "status", "seed"])
            for r in self.records:
                x = repr(r.values[0])
                y = repr(r.values[1]) if len(r.values) > 1 else ""
                n = int(r.n) if float(r.n).is_integer() else r.n
                w.writerow([r.rep, r.method, n, x, y, r.status, r.seed])


def aggregate(cfg: ExperimentConfig, records: list, timing: dict = None) -> ExperimentReport:
    tg, tr = targets(cfg), truths(cfg)
    theta0 = np.array(cfg.theta0)
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.n), []).append(r)
    results = []
    for (method, n) in sorted(groups, key=lambda k: (k[1], k[0])):
        recs = groups[(method, n)]
        results.append(_group_stats(method, n, recs, tr.get(method, theta0), tg.get(method), cfg.replications))
        if method == "lse_gamma3":
            # join the position and the third coordinate by replication
            pos = {r.rep: r for r in groups.get(("lse", n), [])}
            joined = [
                Record(r.rep, "lse_gamma", n, pos[r.rep].values + r.values, r.status, r.seed)
                for r in recs
                if r.rep in pos
            ]
            truth = np.append(theta0, theta0 @ theta0)
            results.append(_group_stats("lse_gamma", n, joined, truth, tg["lse_gamma"], cfg.replications))
    return ExperimentReport(config=cfg.to_dict(), results=results, records=list(records), timing=timing or {})


def run_experiment(cfg: ExperimentConfig, threads: int = 1, progress=None, check_budget: bool = True) -> ExperimentReport:
    """Run every (scale, replication) pair and aggregate in index order.

    ``threads`` > 1 fans replications out to worker processes; the result is
    bitwise identical to the serial run.  Replication failures are counted;
    if any method fails on more than 5% of replications at some scale,
    :class:`FailureBudgetExceeded` is raised carrying the report.
    """
    cfg.validate()
    tasks = [(cfg, s, rep) for s in range(len(cfg.scales)) for rep in range(int(cfg.replications))]
    start = time.perf_counter()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            outputs = list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    else:
        outputs = []
        for i, t in enumerate(tasks):
            outputs.append(_run_task(t))
            if progress is not None:
                progress(i + 1, len(tasks))
    records = [r for recs, _ in outputs for r in recs]
    per_method = {}
    for _, tm in outputs:
        for k, v in tm.items():
            per_method.setdefault(k, []).append(v)
    timing = {
        "wall_seconds": time.perf_counter() - start,
        "threads": threads,
        "per_replication": {k: {"mean": float(np.mean(v)), "max": float(np.max(v)), "total": float(np.sum(v))}
                            for k, v in per_method.items()},
    }
    report = aggregate(cfg, records, timing)
    if check_budget:
        over = [(e["method"], e["n"], e["failures"]) for e in report.results
                if e["failures"] > FAILURE_BUDGET * cfg.replications]
        if over:
            raise FailureBudgetExceeded(f"failure budget exceeded: {over}", report)
    return report
