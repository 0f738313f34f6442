"""Simulate a measurement campaign, then recover the host's power model.

Usage:
    python demos/measure_and_train.py
    python demos/measure_and_train.py --seed 7 --duration 300 --noise 3.0

Runs one metered experiment per single-resource workload, fits total
watts against the windowed utilization features, and compares the
fitted coefficients with the simulator's ground truth.
"""

import argparse
from dataclasses import replace

import numpy as np

from greenmeter import (
    DEFAULT_HOST,
    M1_SMALL,
    WorkloadKind,
    default_workload,
    extract_features,
    fit,
    run_experiment,
)

KINDS = (
    WorkloadKind.CPU_SPIN,
    WorkloadKind.MEM_CYCLE,
    WorkloadKind.DISK_IO,
    WorkloadKind.NET_TRANSFER,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--duration", type=int, default=600, help="seconds per run")
    ap.add_argument("--noise", type=float, default=None, help="meter noise sigma, watts")
    ap.add_argument("--window", type=int, default=5)
    args = ap.parse_args()

    host = DEFAULT_HOST
    if args.noise is not None:
        host = replace(host, noise_sigma_watts=args.noise)

    data = []
    for kind in KINDS:
        record = run_experiment(
            M1_SMALL, default_workload(kind, args.duration), host=host, seed=args.seed
        )
        feats = extract_features(record, window_seconds=args.window)
        watts = np.array([w for _, w in feats])
        print(f"{kind.value:<14} {len(feats):>4} windows  "
              f"mean {watts.mean():7.2f} W  peak {watts.max():7.2f} W")
        data.extend(feats)

    model = fit(data)
    print()
    print(f"{'':<12} {'fitted':>8} {'truth':>8} {'rel err':>8}")
    rows = [("static", model.p_static_watts, host.static_watts)]
    rows += list(zip(("cpu", "mem", "disk", "net"), model.beta, host.betas))
    for name, got, true in rows:
        print(f"{name:<12} {got:8.2f} {true:8.2f} {abs(got - true) / true:8.2%}")
    print(f"\nrmse {model.residual_rmse_watts:.2f} W   r2 {model.r_squared:.5f}   "
          f"n {model.n_samples}")


if __name__ == "__main__":
    main()
