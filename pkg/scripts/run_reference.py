"""Run the reference Monte Carlo experiment and print per-method summaries.

    python3 scripts/run_reference.py [--config configs/reference.toml] [--out reference.json] [--threads 1]
"""

import argparse
import sys

from poisson_source.harness.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/reference.toml")
    ap.add_argument("--out", default="reference.json")
    ap.add_argument("--csv")
    ap.add_argument("--threads", default="1")
    a = ap.parse_args()
    argv = ["experiment", "--config", a.config, "--out", a.out, "--threads", a.threads]
    if a.csv:
        argv += ["--csv", a.csv]
    sys.exit(main(argv))
