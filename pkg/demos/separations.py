"""Run every registered separation experiment at a laptop budget and print the verdicts.

    python3 demos/separations.py            # about half a minute
    python3 demos/separations.py --quick    # smaller budgets

The same runs are available one by one as ``theonlab run NAME``.
"""

import argparse
import time

from theonlab.experiments import ExperimentSpec, run_experiment

ap = argparse.ArgumentParser()
ap.add_argument("--quick", action="store_true")
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()
scale = 10 if args.quick else 1

RUNS = [
    ("sep-ucouple-independence", {"ell": 1}, 100_000),
    ("sep-uinduce-ucouple", {"ell": 1, "p": "0.3"}, 10_000_000),
    ("sep-uinduce-ucouple", {"ell": 1, "p": "0.5"}, 2_000_000),
    ("sep-dev-uinduce", {"k": 2, "p": "0.5"}, 2_000_000),
    ("sep-independence-disc", {"k": 2, "ell": 1, "p": "0.5"}, 200_000),
    ("sep-uinduce-ucouple-order", {}, 100_000),
    ("alternating-census", {"k": 3}, None),
    ("self-coupling", {"theon": "qr-graphon:p=0.5"}, 100_000),
]

for name, params, n in RUNS:
    start = time.perf_counter()
    r = run_experiment(ExperimentSpec(name, dict(params), seed=args.seed, samples=n and n // scale))
    shown = ", ".join(f"{k}={v}" for k, v in r["params"].items())
    print(f"{r['decision']:6s}  {name}({shown})  {time.perf_counter() - start:5.1f} s")
    for e in r["estimates"][:4]:
        print(f"          {e['name']:22s} {e['value']}")
    for o in r["oracle"][:3]:
        print(f"          oracle {o['name']:15s} {o['value']}")
    if name == "sep-dev-uinduce":
        print(f"          max probe |z| {r['details']['max_probe_z']:.1f}, colouring gap |z| {r['statistic']:.1f}")
        print("          (at k=2 the probe family rejects: the construction needs k >= 3 for Dev)")
