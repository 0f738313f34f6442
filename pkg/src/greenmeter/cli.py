"""Command line tying the pipeline together.

Subcommands: simulate, mix, ingest, train, predict, classify, schedule,
report. Exit codes: 0 success, 1 runtime failure, 2 usage error. The
store root comes from GREENMETER_STORE when set, else --store.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import powermodel, scheduler, simcloud, store
from .errors import EstimationError, GreenMeterError, StorageError, UsageError
from .ingest import (
    _fmt,
    parse_marks,
    parse_power_log,
    parse_resource_csv,
)
from .powermodel import BayesClassifier, FeatureVector, PowerModel
from .simcloud import DEFAULT_HOST, FLAVORS, WorkloadKind

_KINDS = [kind.value for kind in WorkloadKind]


def _store_root(args) -> str:
    return os.environ.get("GREENMETER_STORE") or args.store


def _duration(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if n < simcloud.MIN_DURATION_SECONDS:
        raise argparse.ArgumentTypeError(
            f"duration must be >= {simcloud.MIN_DURATION_SECONDS} seconds, got {n}"
        )
    return n


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def _host_with_overrides(args) -> simcloud.HostModel:
    host = DEFAULT_HOST
    overrides = {}
    if getattr(args, "static_watts", None) is not None:
        overrides["static_watts"] = args.static_watts
    if getattr(args, "noise_sigma", None) is not None:
        overrides["noise_sigma_watts"] = args.noise_sigma
    return replace(host, **overrides) if overrides else host


def _unique_id(root: str, record: simcloud.ExperimentRecord) -> simcloud.ExperimentRecord:
    # rerunning the same flags must not collide with the stored run
    base = record.id
    candidate, n = base, 1
    while (Path(root) / "experiments" / candidate).exists():
        n += 1
        candidate = f"{base}-r{n}"
    return record if candidate == base else replace(record, id=candidate)


def cmd_simulate(args) -> int:
    flavor = FLAVORS[args.flavor]
    workload = simcloud.default_workload(WorkloadKind(args.workload), args.duration)
    overrides = {
        name: getattr(args, name)
        for name in ("cpu_threads", "io_threads", "vm_threads", "vm_bytes")
        if getattr(args, name) is not None
    }
    if args.net_rate is not None:
        overrides["net_rate_bytes_per_sec"] = args.net_rate
    if overrides:
        workload = replace(workload, **overrides)
    record = simcloud.run_experiment(flavor, workload, host=_host_with_overrides(args), seed=args.seed)
    root = _store_root(args)
    record = _unique_id(root, record)
    store.save_experiment(root, record)
    print(record.id)
    return 0


def cmd_mix(args) -> int:
    flavor = FLAVORS[args.flavor]
    vms = tuple(
        (flavor, simcloud.default_workload(WorkloadKind(kind), args.duration)) for kind in args.vm
    )
    record = simcloud.run_mix(_host_with_overrides(args), vms, seed=args.seed)
    root = _store_root(args)
    record = _unique_id(root, record)
    store.save_experiment(root, record)
    print(record.id)
    return 0


def cmd_ingest(args) -> int:
    resources = parse_resource_csv(_read_text(args.resources), path=args.resources)
    power = parse_power_log(_read_text(args.power), path=args.power)
    marks = parse_marks(_read_text(args.marks), path=args.marks)
    workload = simcloud.WorkloadSpec(WorkloadKind(args.workload), marks.span_seconds)
    record = simcloud.ExperimentRecord(
        id=args.id,
        flavor=FLAVORS[args.flavor],
        workload=workload,
        marks=marks,
        resources=resources,
        power=power,
    )
    store.save_experiment(_store_root(args), record)
    print(record.id)
    return 0


def _pooled_static(records) -> float:
    """Static watts from idle-kind records, else from outside-marks samples."""
    idle = [r for r in records if r.kind == "idle"]
    if idle:
        return float(np.mean([powermodel.estimate_static(r.power) for r in idle]))
    chunks = []
    for r in records:
        epochs = r.power.epochs
        outside = (epochs < r.marks.start_epoch) | (epochs > r.marks.end_epoch)
        chunks.append(r.power.values[outside])
    pooled = np.concatenate(chunks) if chunks else np.empty(0)
    if pooled.size < powermodel.MIN_IDLE_SAMPLES:
        raise EstimationError(
            f"only {pooled.size} idle samples across {len(records)} records; "
            "run an idle experiment first"
        )
    return float(pooled.mean())


def cmd_train(args) -> int:
    root = _store_root(args)
    rows = store.query(root)
    if not rows:
        print(f"error: no experiments under {root}", file=sys.stderr)
        return 1
    records = [store.load_experiment(root, row.id) for row in rows]
    static_estimate = _pooled_static(records)

    data = []
    labeled = []
    for record in records:
        feats = powermodel.extract_features(record, window_seconds=args.window)
        data.extend(feats)
        for fv, total_watts in feats:
            labeled.append((fv, record.kind, max(0.0, total_watts - static_estimate)))
    model = powermodel.fit(data, ridge_lambda=args.ridge)
    powermodel.crosscheck_static(model, static_estimate)
    store.save_model(root, args.model_name, model)

    counts: dict[str, int] = {}
    for _, kind, _ in labeled:
        counts[kind] = counts.get(kind, 0) + 1
    if len(counts) >= 2 and min(counts.values()) >= powermodel.MIN_CLASS_SAMPLES:
        classifier = powermodel.bayes_fit(labeled)
        store.save_model(root, args.bayes_name, classifier)

    print(f"p_static {_fmt(model.p_static_watts)}")
    for name, beta in zip(("cpu", "mem", "disk", "net"), model.beta):
        print(f"beta_{name} {_fmt(beta)}")
    print(f"lambda {_fmt(model.ridge_lambda)}")
    print(f"rmse {_fmt(model.residual_rmse_watts)}")
    print(f"r2 {_fmt(model.r_squared)}")
    print(f"n {model.n_samples}")
    return 0


def _mean_features(record, window_seconds: int) -> FeatureVector:
    feats = powermodel.extract_features(record, window_seconds=window_seconds)
    mat = np.array([fv.as_tuple() for fv, _ in feats], dtype=np.float64)
    mean = mat.mean(axis=0)
    return FeatureVector(*(float(v) for v in mean))


def _feature_vector(args) -> FeatureVector:
    if args.experiment is not None:
        record = store.load_experiment(_store_root(args), args.experiment)
        return _mean_features(record, args.window)
    return FeatureVector(args.cpu, args.mem, args.disk, args.net)


def cmd_predict(args) -> int:
    model = store.load_model(_store_root(args), args.model_name)
    if not isinstance(model, PowerModel):
        raise UsageError(f"model {args.model_name!r} is not a power model")
    fv = _feature_vector(args)
    total = powermodel.predict(model, fv)
    print(f"predicted_watts {_fmt(total)}")
    print(f"dynamic_watts {_fmt(total - model.p_static_watts)}")
    return 0


def cmd_classify(args) -> int:
    classifier = store.load_model(_store_root(args), args.bayes_name)
    if not isinstance(classifier, BayesClassifier):
        raise UsageError(f"model {args.bayes_name!r} is not a classifier")
    fv = _feature_vector(args)
    label, posterior, watts = powermodel.bayes_classify(classifier, fv)
    print(f"class {label}")
    print(f"posterior {_fmt(posterior)}")
    print(f"expected_dynamic_watts {_fmt(watts)}")
    return 0


def cmd_schedule(args) -> int:
    jobs = scheduler.parse_jobs_csv(_read_text(args.jobs), path=args.jobs)
    forecast = scheduler.parse_forecast_csv(
        _read_text(args.forecast), slot_seconds=args.slot_seconds, path=args.forecast
    )
    admitted, rejected = scheduler.admit_coarse(jobs, args.cap)
    for job in rejected:
        print(f"rejected {job.id} peak {_fmt(job.peak_watts)} cap {_fmt(args.cap)}")
    solver = scheduler.schedule_exact if args.exact else scheduler.schedule_greedy
    schedule, unassigned = solver(admitted, forecast, args.cap)
    for job_id in unassigned:
        print(f"unassigned {job_id}")
    utilization = scheduler.green_utilization(schedule, admitted, forecast)
    _write_text(args.output, scheduler.serialize_schedule_csv(schedule, admitted, utilization))
    print(f"green_utilization {_fmt(utilization)}")
    return 0


def cmd_report(args) -> int:
    root = _store_root(args)
    record = store.load_experiment(root, args.experiment)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create {out_dir}: {exc}") from exc

    def emit(name: str, series) -> None:
        lines = [f"{int(e)} {_fmt(v)}" for e, v in series.samples]
        path = out_dir / name
        _write_text(path, "\n".join(lines) + "\n")
        print(f"wrote {path}")

    for metric in sorted(record.resources, key=lambda m: m.key()):
        emit(f"{record.id}.{metric.key()}.dat", record.resources[metric])
    emit(f"{record.id}.power.dat", record.power)
    return 0


def _add_store_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--store", default="store", help="store root (GREENMETER_STORE overrides)")


def _add_sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--duration", type=_duration, default=600, help="workload seconds")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--flavor", choices=sorted(FLAVORS), default="m1.small")
    parser.add_argument("--static-watts", type=float, default=None, dest="static_watts")
    parser.add_argument("--noise-sigma", type=float, default=None, dest="noise_sigma")


def _add_feature_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--experiment", default=None, help="take features from a stored run")
    parser.add_argument("--window", type=int, default=powermodel.DEFAULT_WINDOW_SECONDS)
    for name in ("cpu", "mem", "disk", "net"):
        parser.add_argument(f"--{name}", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greenmeter", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="run one simulated VM workload and store it")
    p.add_argument("--workload", choices=_KINDS, required=True)
    _add_sim_flags(p)
    p.add_argument("--cpu-threads", type=int, default=None, dest="cpu_threads")
    p.add_argument("--io-threads", type=int, default=None, dest="io_threads")
    p.add_argument("--vm-threads", type=int, default=None, dest="vm_threads")
    p.add_argument("--vm-bytes", type=int, default=None, dest="vm_bytes")
    p.add_argument("--net-rate", type=float, default=None, dest="net_rate")
    _add_store_flag(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mix", help="run several VMs on one host and store the run")
    p.add_argument("--vm", action="append", choices=_KINDS, required=True, help="repeatable")
    _add_sim_flags(p)
    _add_store_flag(p)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("ingest", help="store externally measured files")
    p.add_argument("--id", required=True)
    p.add_argument("--resources", required=True)
    p.add_argument("--power", required=True)
    p.add_argument("--marks", required=True)
    p.add_argument("--workload", choices=_KINDS, required=True)
    p.add_argument("--flavor", choices=sorted(FLAVORS), default="m1.small")
    _add_store_flag(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="fit power model (and classifier) from the store")
    p.add_argument("--window", type=int, default=powermodel.DEFAULT_WINDOW_SECONDS)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--model-name", default="power", dest="model_name")
    p.add_argument("--bayes-name", default="bayes", dest="bayes_name")
    _add_store_flag(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict watts for a feature vector")
    p.add_argument("--model-name", default="power", dest="model_name")
    _add_feature_flags(p)
    _add_store_flag(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("classify", help="classify a feature vector by workload kind")
    p.add_argument("--bayes-name", default="bayes", dest="bayes_name")
    _add_feature_flags(p)
    _add_store_flag(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("schedule", help="place jobs against a green forecast")
    p.add_argument("--jobs", required=True)
    p.add_argument("--forecast", required=True)
    p.add_argument("--cap", type=float, required=True, help="host power cap in watts")
    p.add_argument("--slot-seconds", type=int, default=60, dest="slot_seconds")
    p.add_argument("--output", default="schedule.csv")
    p.add_argument("--exact", action="store_true")
    _add_store_flag(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("report", help="emit two-column plot data for a stored run")
    p.add_argument("--experiment", required=True)
    p.add_argument("--out-dir", default=".", dest="out_dir")
    _add_store_flag(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except GreenMeterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
