"""Filesystem persistence for experiment records and fitted models.

Layout under a store root:

    experiments/<id>/manifest        flat key-value metadata
    experiments/<id>/resources.csv   per-metric utilization series
    experiments/<id>/power.log       metered wall power
    experiments/<id>/marks.txt       workload start and end epochs
    models/<name>                    serialized model text

Experiment saves are atomic: every file lands in a hidden temp directory
that is renamed into place as the last step, so a reader never observes
a half-written record and a crashed writer leaves only a dot-prefixed
directory that queries ignore.
"""

from __future__ import annotations

import os
import shutil
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError, ConflictError, FormatError, StorageError, VersionError
from .ingest import (
    _fmt,
    parse_marks,
    parse_power_log,
    parse_resource_csv,
    serialize_marks,
    serialize_power_log,
    serialize_resource_csv,
)
from .powermodel import BayesClassifier, PowerModel, model_from_text, model_to_text
from .simcloud import ExperimentRecord, Flavor, HostModel, WorkloadKind, WorkloadSpec

MANIFEST_FORMAT = "experiment-v1"

MANIFEST_FILE = "manifest"
RESOURCES_FILE = "resources.csv"
POWER_FILE = "power.log"
MARKS_FILE = "marks.txt"


@dataclass(frozen=True)
class ExperimentManifest:
    """Lightweight row describing one stored experiment."""

    id: str
    flavor_name: str
    workload_kind: str
    marks_start: int
    marks_end: int
    resources_path: Path
    power_path: Path
    marks_path: Path
    created_epoch: int


def _flavor_lines(prefix: str, flavor: Flavor) -> list[str]:
    return [
        f"{prefix}name {flavor.name}",
        f"{prefix}vcpus {flavor.vcpus}",
        f"{prefix}mem_gb {_fmt(flavor.mem_gb)}",
        f"{prefix}disk_gb {_fmt(flavor.disk_gb)}",
    ]


def _workload_lines(prefix: str, workload: WorkloadSpec) -> list[str]:
    return [
        f"{prefix}kind {workload.kind.value}",
        f"{prefix}duration_seconds {workload.duration_seconds}",
        f"{prefix}cpu_threads {workload.cpu_threads}",
        f"{prefix}io_threads {workload.io_threads}",
        f"{prefix}vm_threads {workload.vm_threads}",
        f"{prefix}vm_bytes {workload.vm_bytes}",
        f"{prefix}net_rate_bytes_per_sec {_fmt(workload.net_rate_bytes_per_sec)}",
    ]


_HOST_FIELDS = (
    "static_watts",
    "beta_cpu",
    "beta_mem",
    "beta_disk",
    "beta_net",
    "dynamic_cap_watts",
    "noise_sigma_watts",
    "meter_step_watts",
)


def manifest_to_text(record: ExperimentRecord, created_epoch: int) -> str:
    lines = [
        f"format {MANIFEST_FORMAT}",
        f"id {record.id}",
        f"created {int(created_epoch)}",
        f"kind {record.kind}",
    ]
    if record.vms is None:
        lines += _flavor_lines("flavor.", record.flavor)
        lines += _workload_lines("workload.", record.workload)
    else:
        lines.append(f"mix.count {len(record.vms)}")
        for i, (flavor, workload) in enumerate(record.vms):
            lines += _flavor_lines(f"mix.{i}.flavor.", flavor)
            lines += _workload_lines(f"mix.{i}.workload.", workload)
    lines.append(f"marks.start {record.marks.start_epoch}")
    lines.append(f"marks.end {record.marks.end_epoch}")
    if record.ground_truth is not None:
        host = record.ground_truth
        for field in _HOST_FIELDS:
            lines.append(f"host.{field} {_fmt(getattr(host, field))}")
        lines.append(f"host.meter_period_seconds {host.meter_period_seconds}")
    lines += [
        f"files.resources {RESOURCES_FILE}",
        f"files.power {POWER_FILE}",
        f"files.marks {MARKS_FILE}",
    ]
    return "\n".join(lines) + "\n"


def _parse_kv(text: str, path: str | None = None) -> dict[str, str]:
    kv: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(" ", 1)
        if len(parts) != 2:
            raise FormatError(f"bad manifest line {line!r}", line=ln, path=path)
        kv[parts[0]] = parts[1]
    return kv


def _need(kv: dict[str, str], key: str, path: str | None = None) -> str:
    if key not in kv:
        raise FormatError(f"manifest missing key {key!r}", path=path)
    return kv[key]


def _int_of(kv: dict[str, str], key: str, path: str | None = None) -> int:
    raw = _need(kv, key, path)
    try:
        return int(raw)
    except ValueError:
        raise FormatError(f"manifest key {key!r} is not an integer: {raw!r}", path=path) from None


def _float_of(kv: dict[str, str], key: str, path: str | None = None) -> float:
    raw = _need(kv, key, path)
    try:
        return float(raw)
    except ValueError:
        raise FormatError(f"manifest key {key!r} is not a number: {raw!r}", path=path) from None


def _flavor_of(kv: dict[str, str], prefix: str, path: str | None = None) -> Flavor:
    return Flavor(
        name=_need(kv, prefix + "name", path),
        vcpus=_int_of(kv, prefix + "vcpus", path),
        mem_gb=_float_of(kv, prefix + "mem_gb", path),
        disk_gb=_float_of(kv, prefix + "disk_gb", path),
    )


def _workload_of(kv: dict[str, str], prefix: str, path: str | None = None) -> WorkloadSpec:
    raw_kind = _need(kv, prefix + "kind", path)
    try:
        kind = WorkloadKind(raw_kind)
    except ValueError:
        raise FormatError(f"unknown workload kind {raw_kind!r}", path=path) from None
    return WorkloadSpec(
        kind=kind,
        duration_seconds=_int_of(kv, prefix + "duration_seconds", path),
        cpu_threads=_int_of(kv, prefix + "cpu_threads", path),
        io_threads=_int_of(kv, prefix + "io_threads", path),
        vm_threads=_int_of(kv, prefix + "vm_threads", path),
        vm_bytes=_int_of(kv, prefix + "vm_bytes", path),
        net_rate_bytes_per_sec=_float_of(kv, prefix + "net_rate_bytes_per_sec", path),
    )


def _host_of(kv: dict[str, str], path: str | None = None) -> HostModel | None:
    if "host.static_watts" not in kv:
        return None
    values = {field: _float_of(kv, f"host.{field}", path) for field in _HOST_FIELDS}
    return HostModel(meter_period_seconds=_int_of(kv, "host.meter_period_seconds", path), **values)


def _check_format(kv: dict[str, str], path: str | None = None) -> None:
    fmt = _need(kv, "format", path)
    if fmt != MANIFEST_FORMAT:
        raise VersionError(f"unsupported manifest format {fmt!r}")


def _commit_dir(tmp: Path, final: Path) -> None:
    # single rename = the atomic commit point
    os.rename(tmp, final)


def save_experiment(
    root: str | Path, record: ExperimentRecord, created_epoch: int | None = None
) -> ExperimentManifest:
    """Persist a record under root/experiments/<id>; returns its manifest.

    Raises ConflictError if the id is already stored. The write is atomic:
    a crash mid-save leaves no visible experiment directory.
    """
    if record.id.startswith("."):
        raise ConfigurationError(f"experiment id {record.id!r} may not start with '.'")
    root = Path(root)
    final = root / "experiments" / record.id
    if final.exists():
        raise ConflictError(f"experiment {record.id!r} already stored under {root}")
    created = int(time.time()) if created_epoch is None else int(created_epoch)
    tmp = root / "experiments" / f".tmp-{record.id}-{os.getpid()}"
    try:
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)
        (tmp / MANIFEST_FILE).write_text(manifest_to_text(record, created))
        (tmp / RESOURCES_FILE).write_text(serialize_resource_csv(record.resources))
        (tmp / POWER_FILE).write_text(serialize_power_log(record.power))
        (tmp / MARKS_FILE).write_text(serialize_marks(record.marks))
        _commit_dir(tmp, final)
    except OSError as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        raise StorageError(f"cannot save experiment {record.id!r}: {exc}") from exc
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return ExperimentManifest(
        id=record.id,
        flavor_name=record.flavor.name if record.flavor is not None else "",
        workload_kind=record.kind,
        marks_start=record.marks.start_epoch,
        marks_end=record.marks.end_epoch,
        resources_path=final / RESOURCES_FILE,
        power_path=final / POWER_FILE,
        marks_path=final / MARKS_FILE,
        created_epoch=created,
    )


def load_experiment(root: str | Path, experiment_id: str) -> ExperimentRecord:
    """Rebuild the full record (series reparsed from its files)."""
    exp_dir = Path(root) / "experiments" / experiment_id
    manifest_path = exp_dir / MANIFEST_FILE
    try:
        text = manifest_path.read_text()
    except FileNotFoundError:
        raise StorageError(f"no experiment {experiment_id!r} under {root}") from None
    except OSError as exc:
        raise StorageError(f"cannot read {manifest_path}: {exc}") from exc
    mpath = str(manifest_path)
    kv = _parse_kv(text, path=mpath)
    _check_format(kv, mpath)
    stored_id = _need(kv, "id", mpath)
    if stored_id != experiment_id:
        raise FormatError(f"manifest id {stored_id!r} does not match directory {experiment_id!r}", path=mpath)

    if "mix.count" in kv:
        count = _int_of(kv, "mix.count", mpath)
        vms = tuple(
            (_flavor_of(kv, f"mix.{i}.flavor.", mpath), _workload_of(kv, f"mix.{i}.workload.", mpath))
            for i in range(count)
        )
        flavor = workload = None
    else:
        flavor = _flavor_of(kv, "flavor.", mpath)
        workload = _workload_of(kv, "workload.", mpath)
        vms = None

    def _read(key: str) -> tuple[str, str]:
        name = _need(kv, key, mpath)
        file_path = exp_dir / name
        try:
            return file_path.read_text(), str(file_path)
        except OSError as exc:
            raise StorageError(f"cannot read {file_path}: {exc}") from exc

    res_text, res_path = _read("files.resources")
    pow_text, pow_path = _read("files.power")
    marks_text, marks_path = _read("files.marks")
    resources = parse_resource_csv(res_text, path=res_path)
    power = parse_power_log(pow_text, path=pow_path)
    marks = parse_marks(marks_text, path=marks_path)
    if marks.start_epoch != _int_of(kv, "marks.start", mpath) or marks.end_epoch != _int_of(kv, "marks.end", mpath):
        raise FormatError("marks file disagrees with manifest", path=marks_path)
    return ExperimentRecord(
        id=stored_id,
        flavor=flavor,
        workload=workload,
        marks=marks,
        resources=resources,
        power=power,
        ground_truth=_host_of(kv, mpath),
        vms=vms,
    )


def _manifest_row(kv: dict[str, str], exp_dir: Path, path: str) -> ExperimentManifest:
    if "mix.count" in kv:
        flavor_name = ""
    else:
        flavor_name = _need(kv, "flavor.name", path)
    return ExperimentManifest(
        id=_need(kv, "id", path),
        flavor_name=flavor_name,
        workload_kind=_need(kv, "kind", path),
        marks_start=_int_of(kv, "marks.start", path),
        marks_end=_int_of(kv, "marks.end", path),
        resources_path=exp_dir / _need(kv, "files.resources", path),
        power_path=exp_dir / _need(kv, "files.power", path),
        marks_path=exp_dir / _need(kv, "files.marks", path),
        created_epoch=_int_of(kv, "created", path),
    )


def _mix_flavor_names(kv: dict[str, str]) -> set[str]:
    if "mix.count" not in kv:
        return set()
    count = int(kv["mix.count"])
    return {kv.get(f"mix.{i}.flavor.name", "") for i in range(count)}


def query(
    root: str | Path, flavor: str | None = None, workload_kind: str | None = None
) -> list[ExperimentManifest]:
    """List stored experiments, ordered by (created_epoch, id).

    ``flavor`` keeps records whose VM (or any mix member) uses that flavor;
    ``workload_kind`` matches the record kind ("mix" for mixes). A missing
    store yields []. Dot-prefixed directories are in-flight or abandoned
    saves and are skipped.
    """
    exp_root = Path(root) / "experiments"
    if not exp_root.is_dir():
        return []
    rows = []
    try:
        entries = sorted(exp_root.iterdir())
    except OSError as exc:
        raise StorageError(f"cannot list {exp_root}: {exc}") from exc
    for entry in entries:
        if entry.name.startswith(".") or not entry.is_dir():
            continue
        manifest_path = entry / MANIFEST_FILE
        try:
            text = manifest_path.read_text()
        except OSError as exc:
            raise StorageError(f"cannot read {manifest_path}: {exc}") from exc
        mpath = str(manifest_path)
        kv = _parse_kv(text, path=mpath)
        _check_format(kv, mpath)
        row = _manifest_row(kv, entry, mpath)
        if workload_kind is not None and row.workload_kind != workload_kind:
            continue
        if flavor is not None and row.flavor_name != flavor and flavor not in _mix_flavor_names(kv):
            continue
        rows.append(row)
    rows.sort(key=lambda r: (r.created_epoch, r.id))
    return rows


def _check_model_name(name: str) -> None:
    ok = bool(name) and not name.startswith(".") and all(c.isalnum() or c in "._+-" for c in name)
    if not ok:
        raise ConfigurationError(f"bad model name {name!r}")


def save_model(root: str | Path, name: str, model: PowerModel | BayesClassifier) -> Path:
    """Write a model under root/models/<name>; overwriting is allowed."""
    _check_model_name(name)
    models_dir = Path(root) / "models"
    final = models_dir / name
    tmp = models_dir / f".tmp-{name}-{os.getpid()}"
    try:
        models_dir.mkdir(parents=True, exist_ok=True)
        tmp.write_text(model_to_text(model))
        os.replace(tmp, final)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise StorageError(f"cannot save model {name!r}: {exc}") from exc
    return final


def load_model(root: str | Path, name: str) -> PowerModel | BayesClassifier:
    _check_model_name(name)
    path = Path(root) / "models" / name
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise StorageError(f"no model {name!r} under {root}") from None
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return model_from_text(text)
