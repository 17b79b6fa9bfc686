"""MLE mean-squared-error rate over several scales.

    python3 scripts/run_rate.py [--replications 500] [--scales 1000,10000,30000] [--threads 1]
"""

import argparse

from poisson_source.harness import reference_config, run_experiment

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--replications", type=int, default=500)
    ap.add_argument("--scales", default="1000,10000,30000")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    a = ap.parse_args()
    cfg = reference_config(methods=["mle"], replications=a.replications, seed=a.seed,
                           scales=[float(s) for s in a.scales.split(",")])
    rep = run_experiment(cfg, threads=a.threads)
    for e in rep.results:
        print(f"n={e['n']:<9g} mse={e['mse']:.3e} n*mse={e['mse'] * e['n']:.4f}")
    fit = rep.rate("mle")
    print(f"log-MSE slope {fit.slope:.3f} +/- {fit.stderr:.3f}")
