"""Deterministic simulator for metered VM workloads on a shared host.

Each workload kind produces a characteristic per-second utilization
shape (fractions of the host's capacity for cpu, memory, disk, network):

* ``idle``: background wiggle only, every component under 0.02.
* ``cpu_spin``: monotone ramp over the first 10 s, then sustained near
  the thread-limited target (>= 0.95 once cpu_threads covers the vcpus).
* ``mem_cycle``: short rise to a near-constant plateau sized by
  vm_threads * vm_bytes against the flavor's memory.
* ``disk_io``: periodic write bursts (period 10 s, 3 s duty) whose
  amplitude grows with io_threads.
* ``net_transfer``: sustained transfer at net_rate_bytes_per_sec.
* ``stress_composite``: cpu + memory + io shapes combined, the classic
  multi-resource stressor.

Host power is ``quantize(static + min(beta . u, cap) + noise)`` on the
meter's 4 W grid. Everything is a pure function of (workload, flavor,
seed, t): two runs with the same seed are bit-identical.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DataError, DomainError
from .ingest import (
    ALL_METRICS,
    CPU_VALUE,
    DEFAULT_SCALES,
    DISK_READ,
    DISK_WRITE,
    MEMORY_VALUE,
    NET_RECEIVE,
    NET_TRANSMIT,
    ExperimentMarks,
    MetricName,
    ResourceScales,
    quantize_power,
)
from .timeseries import TimeSeries


class WorkloadKind(str, Enum):
    IDLE = "idle"
    CPU_SPIN = "cpu_spin"
    MEM_CYCLE = "mem_cycle"
    DISK_IO = "disk_io"
    NET_TRANSFER = "net_transfer"
    STRESS_COMPOSITE = "stress_composite"


MAX_THREADS = 64
MIN_DURATION_SECONDS = 10
MAX_MIX_SIZE = 16
DEFAULT_START_EPOCH = 1_600_000_000

# utilization shape constants (documented above; tests evaluate these directly)
CPU_RAMP_SECONDS = 10
MEM_RISE_SECONDS = 5
NET_RISE_SECONDS = 5
DISK_PERIOD_SECONDS = 10
DISK_DUTY_SECONDS = 3
DISK_BASE = 0.02
BACKGROUND_BASE = 0.001
BACKGROUND_SPAN = 0.002

_COMP_CPU, _COMP_MEM, _COMP_DISK, _COMP_NET = range(4)
_SALT_BACKGROUND = 11
_SALT_CPU = 12
_SALT_MEM = 13
_SALT_DISK_PHASE = 14
_SALT_DISK_AMP = 15
_SALT_NET = 16
_SALT_VM_SEED = 17


@dataclass(frozen=True)
class Flavor:
    """VM sizing, named like a cloud instance type."""

    name: str
    vcpus: int
    mem_gb: float
    disk_gb: float

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ConfigurationError(f"bad flavor name {self.name!r}")
        if self.vcpus < 1:
            raise ConfigurationError(f"vcpus must be >= 1, got {self.vcpus}")
        if self.mem_gb <= 0 or self.disk_gb <= 0:
            raise ConfigurationError("mem_gb and disk_gb must be positive")


M1_SMALL = Flavor("m1.small", 4, 8.0, 10.0)
FLAVORS = {M1_SMALL.name: M1_SMALL}


@dataclass(frozen=True)
class WorkloadSpec:
    """Parameters of one workload, stress-tool style."""

    kind: WorkloadKind
    duration_seconds: int
    cpu_threads: int = 0
    io_threads: int = 0
    vm_threads: int = 0
    vm_bytes: int = 0
    net_rate_bytes_per_sec: float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, WorkloadKind):
            raise ConfigurationError(f"unknown workload kind {self.kind!r}")
        if self.duration_seconds < 1:
            raise ConfigurationError(f"duration_seconds must be >= 1, got {self.duration_seconds}")
        for field_name in ("cpu_threads", "io_threads", "vm_threads"):
            n = getattr(self, field_name)
            if not 0 <= n <= MAX_THREADS:
                raise ConfigurationError(f"{field_name} must be in [0, {MAX_THREADS}], got {n}")
        if self.vm_bytes < 0:
            raise ConfigurationError(f"vm_bytes must be >= 0, got {self.vm_bytes}")
        if self.net_rate_bytes_per_sec < 0:
            raise ConfigurationError(f"net_rate_bytes_per_sec must be >= 0, got {self.net_rate_bytes_per_sec}")


def default_workload(kind: WorkloadKind, duration_seconds: int) -> WorkloadSpec:
    """Canonical parameters per kind, sized for the m1.small flavor."""
    kind = WorkloadKind(kind)
    if kind is WorkloadKind.CPU_SPIN:
        return WorkloadSpec(kind, duration_seconds, cpu_threads=8)
    if kind is WorkloadKind.MEM_CYCLE:
        # two workers, ~3.6 GiB each: 0.9 of an 8 GiB flavor
        return WorkloadSpec(kind, duration_seconds, vm_threads=2, vm_bytes=3_865_470_566)
    if kind is WorkloadKind.DISK_IO:
        return WorkloadSpec(kind, duration_seconds, io_threads=4)
    if kind is WorkloadKind.NET_TRANSFER:
        return WorkloadSpec(kind, duration_seconds, net_rate_bytes_per_sec=900_000.0)
    if kind is WorkloadKind.STRESS_COMPOSITE:
        return WorkloadSpec(
            kind,
            duration_seconds,
            cpu_threads=8,
            io_threads=4,
            vm_threads=2,
            vm_bytes=128 * 1024 * 1024,
        )
    return WorkloadSpec(kind, duration_seconds)


@dataclass(frozen=True)
class HostModel:
    """Linear ground-truth power model of the metered host."""

    static_watts: float = 100.0
    beta_cpu: float = 35.0
    beta_mem: float = 26.0
    beta_disk: float = 9.0
    beta_net: float = 27.0
    dynamic_cap_watts: float = 100.0
    noise_sigma_watts: float = 2.0
    meter_step_watts: float = 4.0
    meter_period_seconds: int = 1

    def __post_init__(self):
        values = (self.static_watts, self.beta_cpu, self.beta_mem, self.beta_disk, self.beta_net)
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ConfigurationError("static and betas must be finite and >= 0")
        if self.dynamic_cap_watts <= 0:
            raise ConfigurationError(f"dynamic_cap_watts must be positive, got {self.dynamic_cap_watts}")
        if self.dynamic_cap_watts < max(self.betas):
            raise ConfigurationError(
                f"dynamic_cap_watts {self.dynamic_cap_watts} below largest coefficient {max(self.betas)}"
            )
        if self.noise_sigma_watts < 0 or self.meter_step_watts < 0:
            raise ConfigurationError("noise_sigma_watts and meter_step_watts must be >= 0")
        if self.meter_period_seconds < 1:
            raise ConfigurationError(f"meter_period_seconds must be >= 1, got {self.meter_period_seconds}")

    @property
    def betas(self) -> tuple[float, float, float, float]:
        return (self.beta_cpu, self.beta_mem, self.beta_disk, self.beta_net)


DEFAULT_HOST = HostModel()


class Utilization(NamedTuple):
    u_cpu: float
    u_mem: float
    u_disk: float
    u_net: float


@dataclass(frozen=True)
class ExperimentRecord:
    """One complete metered run: series, marks, and what produced them.

    Single-VM runs carry ``flavor`` and ``workload``; mixes carry ``vms``
    (a tuple of (flavor, workload) pairs) instead. ``ground_truth`` keeps
    the generating HostModel for simulated records, None for ingested ones.
    """

    id: str
    flavor: Flavor | None
    workload: WorkloadSpec | None
    marks: ExperimentMarks
    resources: dict[MetricName, TimeSeries]
    power: TimeSeries
    ground_truth: HostModel | None = None
    vms: tuple[tuple[Flavor, WorkloadSpec], ...] | None = None

    def __post_init__(self):
        if not self.id or not all(c.isalnum() or c in "._+-" for c in self.id):
            raise ConfigurationError(f"bad experiment id {self.id!r}")
        single = self.workload is not None and self.flavor is not None and self.vms is None
        mix = self.workload is None and self.flavor is None and self.vms is not None
        if not (single or mix):
            raise ConfigurationError("record needs either (flavor, workload) or vms, not both")
        if mix and not self.vms:
            raise ConfigurationError("mix record with empty vms")
        if not self.resources:
            raise ConfigurationError("record has no resource series")
        for metric, series in self.resources.items():
            if not self._covers(series):
                raise ConfigurationError(f"{metric} series does not cover the marks span")
        if not self._covers(self.power):
            raise ConfigurationError("power series does not cover the marks span")
        if np.any(self.power.values < 0):
            raise DataError("power series contains negative watts")
        if self.ground_truth is not None and self.ground_truth.meter_step_watts > 0:
            step = self.ground_truth.meter_step_watts
            ratio = self.power.values / step
            if not np.allclose(ratio, np.round(ratio), atol=1e-9):
                raise DataError(f"power values not on the {step} W meter grid")

    def _covers(self, series: TimeSeries) -> bool:
        if len(series) == 0:
            return False
        return int(series.epochs[0]) <= self.marks.start_epoch and int(series.epochs[-1]) >= self.marks.end_epoch

    @property
    def kind(self) -> str:
        return self.workload.kind.value if self.workload is not None else "mix"


def _unit(*keys: int) -> float:
    """Deterministic hash of integer keys to a float in [0, 1)."""
    digest = hashlib.blake2b(struct.pack(f"<{len(keys)}q", *keys), digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0**64


def _derive_seed(seed: int, index: int) -> int:
    digest = hashlib.blake2b(struct.pack("<3q", seed, _SALT_VM_SEED, index), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def _background(seed: int, comp: int, t: int) -> float:
    return BACKGROUND_BASE + BACKGROUND_SPAN * _unit(seed, _SALT_BACKGROUND, comp, t)


def _cpu_shape(seed: int, t: int, cpu_threads: int, vcpus: int) -> float:
    target = min(1.0, cpu_threads / vcpus)
    ramp = min(1.0, (t + 1) / CPU_RAMP_SECONDS)
    wiggle = 0.97 + 0.03 * _unit(seed, _SALT_CPU, t)
    return target * ramp * wiggle


def _mem_shape(seed: int, t: int, vm_threads: int, vm_bytes: int, mem_gb: float) -> float:
    plateau = min(1.0, (vm_threads * vm_bytes) / (mem_gb * 2.0**30))
    rise = min(1.0, (t + 1) / MEM_RISE_SECONDS)
    wiggle = 0.995 + 0.005 * _unit(seed, _SALT_MEM, t)
    return plateau * rise * wiggle


def _disk_shape(seed: int, t: int, io_threads: int) -> float:
    amplitude = min(1.0, 0.2 + 0.16 * io_threads)
    phase = int(_unit(seed, _SALT_DISK_PHASE) * DISK_PERIOD_SECONDS)
    cycle, offset = divmod(t + phase, DISK_PERIOD_SECONDS)
    if offset >= DISK_DUTY_SECONDS:
        return DISK_BASE
    burst = amplitude * (0.9 + 0.1 * _unit(seed, _SALT_DISK_AMP, cycle))
    return DISK_BASE + burst


def _net_shape(seed: int, t: int, rate_bytes_per_sec: float, scales: ResourceScales) -> float:
    level = min(1.0, rate_bytes_per_sec / scales.net_bytes_per_sec)
    rise = min(1.0, (t + 1) / NET_RISE_SECONDS)
    wiggle = 0.98 + 0.02 * _unit(seed, _SALT_NET, t)
    return level * rise * wiggle


def gen_utilization(
    workload: WorkloadSpec,
    flavor: Flavor,
    seed: int,
    t: int,
    scales: ResourceScales = DEFAULT_SCALES,
) -> Utilization:
    """Utilization vector at second ``t`` of the run, each component in [0, 1].

    Pure in (workload, flavor, seed, t); no generator state is carried
    between calls.
    """
    if not 0 <= t < workload.duration_seconds:
        raise DomainError(f"t {t} outside [0, {workload.duration_seconds})")
    kind = workload.kind
    u_cpu = _background(seed, _COMP_CPU, t)
    u_mem = _background(seed, _COMP_MEM, t)
    u_disk = _background(seed, _COMP_DISK, t)
    u_net = _background(seed, _COMP_NET, t)
    if kind is WorkloadKind.CPU_SPIN:
        u_cpu = _cpu_shape(seed, t, workload.cpu_threads, flavor.vcpus)
    elif kind is WorkloadKind.MEM_CYCLE:
        u_mem = _mem_shape(seed, t, workload.vm_threads, workload.vm_bytes, flavor.mem_gb)
    elif kind is WorkloadKind.DISK_IO:
        u_disk = _disk_shape(seed, t, workload.io_threads)
    elif kind is WorkloadKind.NET_TRANSFER:
        u_net = _net_shape(seed, t, workload.net_rate_bytes_per_sec, scales)
    elif kind is WorkloadKind.STRESS_COMPOSITE:
        u_cpu = _cpu_shape(seed, t, workload.cpu_threads, flavor.vcpus)
        u_mem = _mem_shape(seed, t, workload.vm_threads, workload.vm_bytes, flavor.mem_gb)
        u_disk = _disk_shape(seed, t, workload.io_threads)
        if workload.net_rate_bytes_per_sec > 0:
            u_net = _net_shape(seed, t, workload.net_rate_bytes_per_sec, scales)
    return Utilization(_clamp01(u_cpu), _clamp01(u_mem), _clamp01(u_disk), _clamp01(u_net))


def gen_power(host: HostModel, u: Utilization, rng: np.random.Generator | None = None) -> float:
    """One meter reading for utilization ``u``: linear model, capped
    dynamic power, optional Gaussian noise, snapped to the meter grid."""
    dynamic = (
        host.beta_cpu * u.u_cpu
        + host.beta_mem * u.u_mem
        + host.beta_disk * u.u_disk
        + host.beta_net * u.u_net
    )
    raw = host.static_watts + min(dynamic, host.dynamic_cap_watts)
    if rng is not None and host.noise_sigma_watts > 0:
        raw += rng.normal(0.0, host.noise_sigma_watts)
    raw = max(0.0, raw)
    if host.meter_step_watts > 0:
        return quantize_power(raw, host.meter_step_watts)
    return raw


def _mix_utilization(
    vms: tuple[tuple[Flavor, WorkloadSpec], ...],
    seed: int,
    t: int,
    scales: ResourceScales,
) -> Utilization:
    total = [0.0, 0.0, 0.0, 0.0]
    for index, (flavor, workload) in enumerate(vms):
        u = gen_utilization(workload, flavor, _derive_seed(seed, index), t, scales)
        for comp in range(4):
            total[comp] += u[comp]
    return Utilization(*(_clamp01(v) for v in total))


def _power_epochs(rng: np.random.Generator, start: int, end: int, period: int) -> list[int]:
    """Free-running meter epochs covering [start, end].

    First and last readings are pinned to the marks; in between the loop
    wakes near the nominal grid with a random phase and +-0.3 s jitter,
    truncated to whole seconds. Duplicate seconds are dropped, so epochs
    are strictly increasing with occasional skips.
    """
    phase = float(rng.uniform(0.0, 1.0))
    count = max(0, (end - start) // period)
    jitter = rng.uniform(-0.3, 0.3, size=count + 1)
    epochs = [start]
    for k in range(1, count):
        e = start + int(math.floor(k * period + phase + jitter[k]))
        if e <= epochs[-1] or e >= end:
            continue
        epochs.append(e)
    if end > start:
        epochs.append(end)
    return epochs


def _utilization_series(u_of_t, duration: int, start: int, scales: ResourceScales) -> dict[MetricName, TimeSeries]:
    us = [u_of_t(t) for t in range(duration)]
    epochs = list(range(start, start + duration))
    columns = {
        CPU_VALUE: [u.u_cpu for u in us],
        MEMORY_VALUE: [u.u_mem for u in us],
        # dd-style traffic is write-heavy; transfer is symmetric on the wire
        DISK_READ: [0.05 * u.u_disk * scales.disk_bytes_per_sec for u in us],
        DISK_WRITE: [0.95 * u.u_disk * scales.disk_bytes_per_sec for u in us],
        NET_RECEIVE: [0.5 * u.u_net * scales.net_bytes_per_sec for u in us],
        NET_TRANSMIT: [0.5 * u.u_net * scales.net_bytes_per_sec for u in us],
    }
    return {m: TimeSeries(1, epochs, columns[m]) for m in ALL_METRICS}


def _metered_power(
    host: HostModel,
    rng: np.random.Generator,
    u_of_t,
    duration: int,
    start: int,
    end: int,
) -> TimeSeries:
    epochs = _power_epochs(rng, start, end, host.meter_period_seconds)
    values = []
    for e in epochs:
        t = min(e - start, duration - 1)
        values.append(gen_power(host, u_of_t(t), rng))
    return TimeSeries(1, epochs, values)


def run_experiment(
    flavor: Flavor,
    workload: WorkloadSpec,
    host: HostModel = DEFAULT_HOST,
    seed: int = 42,
    start_epoch: int = DEFAULT_START_EPOCH,
    scales: ResourceScales = DEFAULT_SCALES,
) -> ExperimentRecord:
    """Simulate one metered run of ``workload`` on ``flavor``.

    Resources are sampled at 1 s over the run; the power loop free-runs
    at the meter period with jittered epochs. Marks bracket the sampled
    span exactly. Same seed, same record, bit for bit.
    """
    duration = workload.duration_seconds
    if duration < MIN_DURATION_SECONDS:
        raise ConfigurationError(f"duration must be >= {MIN_DURATION_SECONDS} s, got {duration}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    start = int(start_epoch)
    end = start + duration - 1
    marks = ExperimentMarks(start, end)

    def u_of_t(t: int) -> Utilization:
        return gen_utilization(workload, flavor, seed, t, scales)

    resources = _utilization_series(u_of_t, duration, start, scales)
    power = _metered_power(host, rng, u_of_t, duration, start, end)
    exp_id = f"{workload.kind.value}-{flavor.name}-s{seed}-d{duration}"
    return ExperimentRecord(
        id=exp_id,
        flavor=flavor,
        workload=workload,
        marks=marks,
        resources=resources,
        power=power,
        ground_truth=host,
    )


def run_mix(
    host: HostModel,
    vms: list[tuple[Flavor, WorkloadSpec]],
    seed: int = 42,
    duration: int | None = None,
    start_epoch: int = DEFAULT_START_EPOCH,
    scales: ResourceScales = DEFAULT_SCALES,
) -> ExperimentRecord:
    """Simulate several VMs sharing one metered host.

    Per-component utilizations are summed across VMs and clamped to
    [0, 1] before the power model is applied. Each VM draws its shape
    from a seed derived from (seed, position); ``duration`` overrides
    every VM's duration when given, otherwise all must agree.
    """
    if not 1 <= len(vms) <= MAX_MIX_SIZE:
        raise ConfigurationError(f"mix size must be in [1, {MAX_MIX_SIZE}], got {len(vms)}")
    pairs = []
    for flavor, workload in vms:
        if duration is not None and workload.duration_seconds != duration:
            workload = replace(workload, duration_seconds=duration)
        pairs.append((flavor, workload))
    durations = {w.duration_seconds for _, w in pairs}
    if len(durations) != 1:
        raise ConfigurationError(f"mix workloads disagree on duration: {sorted(durations)}")
    run_seconds = durations.pop()
    if run_seconds < MIN_DURATION_SECONDS:
        raise ConfigurationError(f"duration must be >= {MIN_DURATION_SECONDS} s, got {run_seconds}")
    vms_tuple = tuple(pairs)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    start = int(start_epoch)
    end = start + run_seconds - 1
    marks = ExperimentMarks(start, end)

    def u_of_t(t: int) -> Utilization:
        return _mix_utilization(vms_tuple, seed, t, scales)

    resources = _utilization_series(u_of_t, run_seconds, start, scales)
    power = _metered_power(host, rng, u_of_t, run_seconds, start, end)
    kinds = "+".join(w.kind.value for _, w in vms_tuple)
    exp_id = f"mix-{kinds}-s{seed}-d{run_seconds}"
    return ExperimentRecord(
        id=exp_id,
        flavor=None,
        workload=None,
        marks=marks,
        resources=resources,
        power=power,
        ground_truth=host,
        vms=vms_tuple,
    )
