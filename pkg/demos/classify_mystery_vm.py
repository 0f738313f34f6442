"""Train the workload classifier, then identify an unlabeled run.

Labeled windows come from seeded simulations of each workload kind;
the mystery VM is the same simulator at a seed the classifier never
saw. Prints the per-window vote tally and the aggregate call.
"""

import argparse
from collections import Counter

from greenmeter import (
    DEFAULT_HOST,
    M1_SMALL,
    WorkloadKind,
    bayes_classify,
    bayes_fit,
    default_workload,
    extract_features,
    run_experiment,
)

KINDS = (
    WorkloadKind.CPU_SPIN,
    WorkloadKind.MEM_CYCLE,
    WorkloadKind.DISK_IO,
    WorkloadKind.NET_TRANSFER,
)


def windows(kind, duration, seed, window):
    record = run_experiment(M1_SMALL, default_workload(kind, duration), seed=seed)
    return extract_features(record, window_seconds=window)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mystery", choices=[k.value for k in KINDS], default="disk_io")
    ap.add_argument("--mystery-seed", type=int, default=1234)
    ap.add_argument("--window", type=int, default=5)
    args = ap.parse_args()

    static = DEFAULT_HOST.static_watts
    labeled = []
    for kind in KINDS:
        for seed in (1, 2):
            for fv, total in windows(kind, 300, seed, args.window):
                labeled.append((fv, kind.value, max(0.0, total - static)))
    classifier = bayes_fit(labeled)
    print(f"trained on {len(labeled)} windows, classes: {', '.join(classifier.classes)}")

    mystery = windows(WorkloadKind(args.mystery), 120, args.mystery_seed, args.window)
    votes = Counter()
    expected_watts = {}
    for fv, _ in mystery:
        label, posterior, watts = bayes_classify(classifier, fv)
        votes[label] += 1
        expected_watts[label] = watts
    print(f"\nmystery run ({len(mystery)} windows):")
    for label, count in votes.most_common():
        print(f"  {label:<14} {count:>3} votes  "
              f"expected dynamic {expected_watts[label]:6.2f} W")
    verdict = votes.most_common(1)[0][0]
    print(f"\nverdict: {verdict} "
          f"({'correct' if verdict == args.mystery else 'wrong, truth ' + args.mystery})")


if __name__ == "__main__":
    main()
