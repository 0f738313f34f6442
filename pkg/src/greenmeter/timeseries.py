"""In-memory time series, round-robin archives, and resource/power alignment.

A :class:`TimeSeries` is an immutable list of ``(epoch_seconds, value)``
samples on a regular grid: epochs are strictly increasing integers and
consecutive epochs differ by an integer multiple of ``step_seconds``, so
gaps are representable but fabricated samples are not.

A :class:`RoundRobinArchive` consolidates incoming primary samples in
buckets of ``consolidation_factor`` values (AVERAGE or MAX) and keeps at
most ``capacity`` consolidated points, evicting the oldest once full.
This mirrors how long-running collectors keep bounded history.

:func:`align` pairs each resource sample with the nearest power reading
within a gap bound, producing the matched rows that model fitting needs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import Hashable, Iterable, Mapping

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    InvalidRangeError,
    OutOfOrderError,
)


class Consolidation(Enum):
    AVERAGE = "average"
    MAX = "max"


class TimeSeries:
    """Immutable (epoch, value) samples with a fixed sampling step."""

    __slots__ = ("_step", "_epochs", "_values")

    def __init__(self, step_seconds: int, epochs: Iterable[int] = (), values: Iterable[float] = ()):
        step = int(step_seconds)
        if step <= 0:
            raise ConfigurationError(f"step_seconds must be positive, got {step_seconds}")
        ep = np.array(list(epochs), dtype=np.int64)
        va = np.array(list(values), dtype=np.float64)
        if ep.shape != va.shape:
            raise DataError(f"epochs and values differ in length ({ep.size} vs {va.size})")
        if ep.size:
            deltas = np.diff(ep)
            if ep.size > 1 and not np.all(deltas > 0):
                raise OutOfOrderError("epochs must be strictly increasing")
            if ep.size > 1 and not np.all(deltas % step == 0):
                raise ConfigurationError(f"epoch deltas must be multiples of step {step}")
            if not np.all(np.isfinite(va)):
                raise DataError("values must be finite")
        ep.setflags(write=False)
        va.setflags(write=False)
        self._step = step
        self._epochs = ep
        self._values = va

    @classmethod
    def from_samples(cls, step_seconds: int, samples: Iterable[tuple[int, float]]) -> "TimeSeries":
        pairs = list(samples)
        return cls(step_seconds, [e for e, _ in pairs], [v for _, v in pairs])

    @property
    def step_seconds(self) -> int:
        return self._step

    @property
    def epochs(self) -> np.ndarray:
        return self._epochs

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def samples(self) -> list[tuple[int, float]]:
        return [(int(e), float(v)) for e, v in zip(self._epochs, self._values)]

    def value_at(self, epoch: int) -> float:
        """Exact-epoch lookup."""
        i = int(np.searchsorted(self._epochs, epoch))
        if i >= self._epochs.size or self._epochs[i] != epoch:
            raise KeyError(epoch)
        return float(self._values[i])

    def __len__(self) -> int:
        return int(self._epochs.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self._step == other._step
            and np.array_equal(self._epochs, other._epochs)
            and np.array_equal(self._values, other._values)
        )

    def __hash__(self):
        return hash((self._step, self._epochs.tobytes(), self._values.tobytes()))

    def __repr__(self) -> str:
        return f"TimeSeries(step={self._step}, n={len(self)})"


def _consolidate(values: list[float], mode: Consolidation) -> float:
    if mode is Consolidation.MAX:
        return max(values)
    # mean of an all-equal bucket must be that value exactly
    if values.count(values[0]) == len(values):
        return values[0]
    return sum(values) / len(values)


class RoundRobinArchive:
    """Fixed-capacity archive with count-based consolidation buckets.

    Primary samples are pushed with strictly increasing epochs. Every
    ``consolidation_factor`` pushes complete one bucket; the consolidated
    value is stored at the bucket's newest epoch. Once ``capacity``
    consolidated points exist, each new one evicts the oldest. A single
    writer is assumed; there is no internal locking.
    """

    def __init__(
        self,
        capacity: int = 86400,
        step_seconds: int = 1,
        consolidation: Consolidation = Consolidation.AVERAGE,
        consolidation_factor: int = 1,
    ):
        if int(capacity) <= 0:
            raise ConfigurationError(f"capacity must be positive, got {capacity}")
        if int(step_seconds) <= 0:
            raise ConfigurationError(f"step_seconds must be positive, got {step_seconds}")
        if int(consolidation_factor) <= 0:
            raise ConfigurationError(f"consolidation_factor must be positive, got {consolidation_factor}")
        if not isinstance(consolidation, Consolidation):
            raise ConfigurationError(f"unknown consolidation {consolidation!r}")
        self.capacity = int(capacity)
        self.step_seconds = int(step_seconds)
        self.consolidation = consolidation
        self.consolidation_factor = int(consolidation_factor)
        self._ring: deque[tuple[int, float]] = deque(maxlen=self.capacity)
        self._pending: list[tuple[int, float]] = []
        self._last_epoch: int | None = None

    @property
    def ring(self) -> tuple[tuple[int, float], ...]:
        """Completed consolidated points, oldest first."""
        return tuple(self._ring)

    @property
    def partial(self) -> tuple[int, float] | None:
        """Consolidation of the not-yet-complete newest bucket, if any."""
        if not self._pending:
            return None
        epoch = self._pending[-1][0]
        return epoch, _consolidate([v for _, v in self._pending], self.consolidation)

    def push(self, epoch: int, value: float) -> None:
        epoch = int(epoch)
        value = float(value)
        if not math.isfinite(value):
            raise DataError(f"value must be finite, got {value}")
        if self._last_epoch is not None and epoch <= self._last_epoch:
            raise OutOfOrderError(f"epoch {epoch} not after newest epoch {self._last_epoch}")
        self._last_epoch = epoch
        self._pending.append((epoch, value))
        if len(self._pending) == self.consolidation_factor:
            consolidated = _consolidate([v for _, v in self._pending], self.consolidation)
            self._ring.append((self._pending[-1][0], consolidated))
            self._pending.clear()

    def fetch(self, t0: int, t1: int) -> TimeSeries:
        """Consolidated points with t0 <= epoch <= t1, as a TimeSeries.

        The result step is the GCD of the selected epoch deltas (the
        archive's consolidated step when fewer than two points match).
        """
        if t0 > t1:
            raise InvalidRangeError(f"invalid fetch range [{t0}, {t1}]")
        points = [(e, v) for e, v in self._ring if t0 <= e <= t1]
        if len(points) >= 2:
            step = reduce(math.gcd, [b - a for (a, _), (b, _) in zip(points, points[1:])])
        else:
            step = self.step_seconds * self.consolidation_factor
        return TimeSeries.from_samples(step, points)


@dataclass(frozen=True)
class AlignedSample:
    """One matched row: every resource metric plus the nearest power reading."""

    epoch_seconds: int
    resource_values: Mapping[Hashable, float]
    power_watts: float

    def __post_init__(self):
        object.__setattr__(self, "resource_values", dict(self.resource_values))
        if not math.isfinite(self.power_watts) or self.power_watts < 0:
            raise DataError(f"power_watts must be finite and >= 0, got {self.power_watts}")


def align(
    resources: Mapping[Hashable, TimeSeries],
    power: TimeSeries,
    max_gap_seconds: int = 1,
) -> list[AlignedSample]:
    """Pair resource samples with the nearest power sample within a gap bound.

    Only epochs present in every resource series are considered. Ties
    between two equidistant power samples go to the earlier one. Epochs
    with no power sample within ``max_gap_seconds`` are dropped. All
    resource series must share one step; the power series may be irregular.
    """
    if max_gap_seconds < 0:
        raise ConfigurationError(f"max_gap_seconds must be >= 0, got {max_gap_seconds}")
    if not resources:
        return []
    steps = {series.step_seconds for series in resources.values()}
    if len(steps) != 1:
        raise ConfigurationError(f"resource series disagree on step_seconds: {sorted(steps)}")

    metric_order = list(resources)
    epoch_arrays = [resources[m].epochs for m in metric_order]
    common = reduce(np.intersect1d, epoch_arrays)
    if common.size == 0 or len(power) == 0:
        return []

    p_epochs = power.epochs
    p_values = power.values
    out: list[AlignedSample] = []
    for e in common:
        i = int(np.searchsorted(p_epochs, e))
        best = None
        # candidate on each side; earlier sample wins distance ties
        for j in (i - 1, i):
            if 0 <= j < p_epochs.size:
                d = abs(int(p_epochs[j]) - int(e))
                if best is None or d < best[0]:
                    best = (d, j)
        if best is None or best[0] > max_gap_seconds:
            continue
        row = {m: resources[m].value_at(int(e)) for m in metric_order}
        out.append(AlignedSample(int(e), row, float(p_values[best[1]])))
    return out
