"""Command line entry point: ``poisson-source {simulate,estimate,experiment,fisher,delay}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from ..estimators import (
    arrival_estimates,
    bayes_estimate,
    joint_mle,
    lse_estimate,
    one_step,
)
from ..geometry import ConfigurationError, Point2, travel_times
from ..likelihood import score
from ..pp_sim import ObservationSet, sample_paths, thin, thinning_probability
from ..signal_model import arrival_fisher, fisher_matrix
from .config import ExperimentConfig
from .delay import DelayConfig, run_delay_experiment
from .experiment import FailureBudgetExceeded, run_experiment


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Point2):
        return [obj.x, obj.y]
    return obj


def _emit(payload, out):
    text = json.dumps(_jsonable(payload), indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _result_json(res):
    return {"label": res.label, "theta": res.theta, "status": res.status,
            "normalized_cov": res.normalized_cov, "diagnostics": res.diagnostics}


def cmd_simulate(args):
    cfg = ExperimentConfig.load(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    n = cfg.scales[0] if args.n is None else args.n
    obs = sample_paths(cfg.build_network(), cfg.build_model(), cfg.theta0_point, n, seed, args.rep)
    obs.save(args.out)
    print(f"wrote {args.out}: n={n:g}, events per detector {obs.counts().tolist()}", file=sys.stderr)
    return 0


def cmd_estimate(args):
    cfg = ExperimentConfig.load(args.config)
    net, model = cfg.build_network(), cfg.build_model()
    obs = ObservationSet.load(args.obs)
    methods = ["mle", "be", "lse", "onestep"] if args.method == "all" else [args.method]
    out = {}
    for m in methods:
        if m == "mle":
            out["mle"] = _result_json(joint_mle(net, model, obs))
        elif m == "be":
            out["be"] = _result_json(bayes_estimate(net, model, obs))
        elif m == "lse":
            arr = arrival_estimates(net, model, obs)
            res = lse_estimate(net, arr, obs.n)
            out["lse"] = {"gamma": res.gamma, "theta": res.theta_star, "D": res.D, "M": res.M,
                          "s_n": res.s_n, "s_n_ok": res.s_n_ok, "cond_A": res.cond_A,
                          "tau_hat": arr.tau_hat, "sigma2": arr.sigma2}
        elif m == "onestep":
            p = thinning_probability(obs.n, cfg.thinning_b)
            pair = thin(obs, p, cfg.seed)
            y = ObservationSet(p * obs.n, obs.T, pair.y.events)
            pre = lse_estimate(net, arrival_estimates(net, model, y), p * obs.n)
            theta_pre = Point2(*net.theta_region.clamp(pre.gamma[:2]))
            res = one_step(net, model, theta_pre, pair.x_tilde, p, t=args.t)
            out["onestep"] = _result_json(res) | {"theta_pre": theta_pre, "p": p}
    _emit(out, args.out)
    return 0


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config)

    def progress(i, total):
        if i % max(1, total // 20) == 0 or i == total:
            print(f"  {i}/{total} replications", file=sys.stderr)

    code = 0
    try:
        report = run_experiment(cfg, threads=args.threads, progress=progress)
    except FailureBudgetExceeded as exc:
        print(str(exc), file=sys.stderr)
        report, code = exc.report, 2
    report.save(args.out)
    if args.csv:
        report.write_csv(args.csv)
    for e in report.results:
        dev = e.get("rel_frobenius")
        cov = e.get("coverage")
        print(
            f"{e['method']:>14s}  n={e['n']:<9g} ok={e['count']:<5d} fail={e['failures']:<3d}"
            + (f" rel.dev={dev:.3f}" if dev is not None else "")
            + (f" coverage={cov:.3f}" if cov is not None else ""),
            file=sys.stderr,
        )
    return code


def cmd_fisher(args):
    cfg = ExperimentConfig.load(args.config)
    net, model = cfg.build_network(), cfg.build_model()
    theta = Point2(*map(float, args.theta.split(","))) if args.theta else cfg.theta0_point
    info = fisher_matrix(net, model, theta)
    out = {
        "theta": theta,
        "tau": travel_times(net, theta),
        "fisher": info.matrix,
        "fisher_inverse": info.inverse(),
        "arrival_fisher": arrival_fisher(net, model, theta).diag,
    }
    if args.t is not None:
        it = fisher_matrix(net, model, theta, t_end=args.t)
        out["t"] = args.t
        out["fisher_t"] = it.matrix
        out["det_fisher_t"] = it.det
    if args.obs:
        obs = ObservationSet.load(args.obs)
        out["score"] = score(net, model, theta, obs)
    _emit(out, args.out)
    return 0


def cmd_delay(args):
    cfg = DelayConfig(a=args.a, lambda0=args.lambda0, scales=[float(s) for s in args.scales.split(",")],
                      replications=args.replications, seed=args.seed)
    rep = run_delay_experiment(cfg)
    payload = {"schema": 1, "config": asdict(cfg), "results": rep.results}
    if len(cfg.scales) >= 3:
        fit = rep.rate()
        payload["rate"] = {"slope": fit.slope, "stderr": fit.stderr}
    _emit(payload, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poisson-source", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one set of detector paths")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=float, help="scale (default: first entry of scales)")
    p.add_argument("--rep", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="run estimators on an observation file")
    p.add_argument("--method", choices=["mle", "be", "lse", "onestep", "all"], default="all")
    p.add_argument("--obs", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--t", type=float, help="time for the one-step process (default T)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="Monte Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("fisher", help="Fisher information at a point")
    p.add_argument("--config", required=True)
    p.add_argument("--theta", help="x,y (default theta0)")
    p.add_argument("--t", type=float)
    p.add_argument("--obs", help="observation file for the score")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser("delay", help="square-root onset delay study")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--lambda0", type=float, default=0.5)
    p.add_argument("--scales", default="1000,10000,100000")
    p.add_argument("--replications", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_delay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
