"""Parsers and serializers for the on-disk telemetry formats.

Three plain-text formats are supported, all line-oriented:

* resource CSV: header ``epoch,category,sensor,value`` then one row per
  sample. cpu and memory carry a ``value`` sensor holding a fraction in
  [0, 1]; disk carries ``read``/``write`` and network ``receive``/
  ``transmit``, all in bytes per second.
* power log: ``<epoch> <watts>`` per line, strictly increasing epochs.
  The power loop is free-running, so epochs may skip seconds.
* marks file: exactly two lines, ``start <epoch>`` and ``end <epoch>``,
  bracketing the experiment.

Every parser rejects malformed input with the offending line number;
nothing is silently dropped. ``parse(serialize(x)) == x`` holds for all
three formats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

from .errors import (
    DomainError,
    DuplicateSampleError,
    FormatError,
    InvalidMarksError,
    OutOfOrderError,
)
from .timeseries import TimeSeries

# sensors allowed per category
CATEGORY_SENSORS = {
    "cpu": ("value",),
    "memory": ("value",),
    "disk": ("read", "write"),
    "network": ("receive", "transmit"),
}


@dataclass(frozen=True)
class MetricName:
    """A (category, sensor) pair naming one collected metric."""

    category: str
    sensor: str

    def __post_init__(self):
        allowed = CATEGORY_SENSORS.get(self.category)
        if allowed is None:
            raise DomainError(f"unknown category {self.category!r}")
        if self.sensor not in allowed:
            raise DomainError(f"category {self.category!r} has no sensor {self.sensor!r}")

    def key(self) -> str:
        return f"{self.category}.{self.sensor}"

    def __str__(self) -> str:
        return self.key()

    @classmethod
    def parse(cls, text: str) -> "MetricName":
        category, _, sensor = text.partition(".")
        return cls(category, sensor)


CPU_VALUE = MetricName("cpu", "value")
MEMORY_VALUE = MetricName("memory", "value")
DISK_READ = MetricName("disk", "read")
DISK_WRITE = MetricName("disk", "write")
NET_RECEIVE = MetricName("network", "receive")
NET_TRANSMIT = MetricName("network", "transmit")

ALL_METRICS = (CPU_VALUE, MEMORY_VALUE, DISK_READ, DISK_WRITE, NET_RECEIVE, NET_TRANSMIT)


@dataclass(frozen=True)
class ExperimentMarks:
    """Start and end of an experiment, in epoch seconds."""

    start_epoch: int
    end_epoch: int

    def __post_init__(self):
        if self.end_epoch < self.start_epoch:
            raise InvalidMarksError(f"end {self.end_epoch} before start {self.start_epoch}")

    @property
    def span_seconds(self) -> int:
        return self.end_epoch - self.start_epoch + 1

    def contains(self, epoch: int) -> bool:
        return self.start_epoch <= epoch <= self.end_epoch


@dataclass(frozen=True)
class ResourceScales:
    """Host maxima used to normalize byte rates to utilization fractions."""

    disk_bytes_per_sec: float = 100e6
    net_bytes_per_sec: float = 1e6


DEFAULT_SCALES = ResourceScales()

RESOURCE_CSV_HEADER = "epoch,category,sensor,value"


def _fmt(value: float) -> str:
    """Canonical decimal rendering, 17 significant digits (round-trips exactly)."""
    return format(float(value), ".17g")


def _infer_step(epochs: list[int]) -> int:
    if len(epochs) < 2:
        return 1
    return reduce(math.gcd, [b - a for a, b in zip(epochs, epochs[1:])])


def parse_resource_csv(text: str, path: str | None = None) -> dict[MetricName, TimeSeries]:
    """Parse a resource CSV document into one TimeSeries per metric.

    Rows may arrive in any order; each metric's step is inferred as the
    GCD of its epoch deltas. Duplicate (metric, epoch) rows, unknown
    metrics, and non-finite values are rejected with their line number.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != RESOURCE_CSV_HEADER:
        raise FormatError(f"expected header {RESOURCE_CSV_HEADER!r}", line=1, path=path)
    seen: set[tuple[MetricName, int]] = set()
    data: dict[MetricName, list[tuple[int, float]]] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.strip().split(",")
        if len(fields) != 4:
            raise FormatError(f"expected 4 fields, got {len(fields)}", line=lineno, path=path)
        try:
            epoch = int(fields[0])
        except ValueError:
            raise FormatError(f"bad epoch {fields[0]!r}", line=lineno, path=path) from None
        try:
            metric = MetricName(fields[1], fields[2])
        except DomainError as exc:
            raise FormatError(str(exc), line=lineno, path=path) from None
        try:
            value = float(fields[3])
        except ValueError:
            raise FormatError(f"non-numeric value {fields[3]!r}", line=lineno, path=path) from None
        if not math.isfinite(value):
            raise FormatError(f"non-finite value {fields[3]!r}", line=lineno, path=path)
        if (metric, epoch) in seen:
            raise DuplicateSampleError(
                f"duplicate sample for {metric} at epoch {epoch}", line=lineno, path=path
            )
        seen.add((metric, epoch))
        data.setdefault(metric, []).append((epoch, value))

    out: dict[MetricName, TimeSeries] = {}
    order = [m for m in ALL_METRICS if m in data] + sorted(
        (m for m in data if m not in ALL_METRICS), key=MetricName.key
    )
    for metric in order:
        pairs = sorted(data[metric])
        out[metric] = TimeSeries.from_samples(_infer_step([e for e, _ in pairs]), pairs)
    return out


def serialize_resource_csv(resources: dict[MetricName, TimeSeries]) -> str:
    lines = [RESOURCE_CSV_HEADER]
    order = [m for m in ALL_METRICS if m in resources] + sorted(
        (m for m in resources if m not in ALL_METRICS), key=MetricName.key
    )
    for metric in order:
        for epoch, value in resources[metric].samples:
            lines.append(f"{epoch},{metric.category},{metric.sensor},{_fmt(value)}")
    return "\n".join(lines) + "\n"


def parse_power_log(text: str, path: str | None = None) -> TimeSeries:
    """Parse ``<epoch> <watts>`` lines into a TimeSeries of watts.

    Epochs must be strictly increasing; watts must be finite and >= 0.
    The step is the GCD of the epoch deltas (1 for short logs).
    """
    epochs: list[int] = []
    values: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if len(tokens) != 2:
            raise FormatError(f"expected '<epoch> <watts>', got {raw!r}", line=lineno, path=path)
        try:
            epoch = int(tokens[0])
        except ValueError:
            raise FormatError(f"bad epoch {tokens[0]!r}", line=lineno, path=path) from None
        try:
            watts = float(tokens[1])
        except ValueError:
            raise FormatError(f"non-numeric watts {tokens[1]!r}", line=lineno, path=path) from None
        if not math.isfinite(watts) or watts < 0:
            raise FormatError(f"watts must be finite and >= 0, got {tokens[1]}", line=lineno, path=path)
        if epochs and epoch <= epochs[-1]:
            raise OutOfOrderError(f"line {lineno}: epoch {epoch} not after {epochs[-1]}")
        epochs.append(epoch)
        values.append(watts)
    return TimeSeries(_infer_step(epochs), epochs, values)


def serialize_power_log(power: TimeSeries) -> str:
    return "".join(f"{epoch} {_fmt(watts)}\n" for epoch, watts in power.samples)


def parse_marks(text: str, path: str | None = None) -> ExperimentMarks:
    """Parse the two-line marks format (``start <epoch>`` then ``end <epoch>``)."""
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) != 2:
        raise FormatError(f"expected 2 lines, got {len(lines)}", line=len(lines) + 1, path=path)
    values = {}
    for lineno, (label, raw) in enumerate(zip(("start", "end"), lines), start=1):
        tokens = raw.split()
        if len(tokens) != 2 or tokens[0] != label:
            raise FormatError(f"expected '{label} <epoch>', got {raw!r}", line=lineno, path=path)
        try:
            values[label] = int(tokens[1])
        except ValueError:
            raise FormatError(f"bad epoch {tokens[1]!r}", line=lineno, path=path) from None
    return ExperimentMarks(values["start"], values["end"])


def serialize_marks(marks: ExperimentMarks) -> str:
    return f"start {marks.start_epoch}\nend {marks.end_epoch}\n"


def quantize_power(watts: float, step: float = 4.0) -> float:
    """Snap a reading to the meter grid: nearest multiple of ``step``,
    ties away from zero. The error never exceeds step/2."""
    if step <= 0:
        raise DomainError(f"step must be positive, got {step}")
    if watts < 0:
        raise DomainError(f"watts must be >= 0, got {watts}")
    return math.floor(watts / step + 0.5) * step
