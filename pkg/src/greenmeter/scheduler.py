"""Green-energy-aware placement of constant-power batch jobs.

A :class:`GreenForecast` gives the green watts available in each slot of
a discrete horizon. Jobs draw an assumed-constant dynamic power (above
the host's static draw, which no placement can change) for a whole
number of slots. The objective is green utilization: the fraction of
consumed energy covered by the forecast.

``admit_coarse`` is the cheap peak-watts gate; ``schedule_greedy``
places big consumers first where they gain the most green coverage;
``schedule_exact`` enumerates every assignment on small instances and is
the reference optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    ConfigurationError,
    DataError,
    FormatError,
    ScheduleValidationError,
    SizeError,
)

CAP_SLACK = 1e-9  # float guard on capacity comparisons

JOBS_CSV_HEADER = "job_id,predicted_watts,peak_watts,duration_slots"
FORECAST_CSV_HEADER = "slot,green_watts"
SCHEDULE_CSV_HEADER = "job_id,start_slot,predicted_watts,duration_slots"


@dataclass(frozen=True)
class GreenForecast:
    """Green watts available per slot over a fixed horizon."""

    slot_seconds: int
    green_watts: tuple[float, ...]

    def __post_init__(self):
        if self.slot_seconds < 1:
            raise ConfigurationError(f"slot_seconds must be >= 1, got {self.slot_seconds}")
        object.__setattr__(self, "green_watts", tuple(float(g) for g in self.green_watts))
        if not self.green_watts:
            raise ConfigurationError("forecast needs at least one slot")
        for g in self.green_watts:
            if not math.isfinite(g) or g < 0:
                raise DataError(f"green watts must be finite and >= 0, got {g}")

    @property
    def horizon(self) -> int:
        return len(self.green_watts)


@dataclass(frozen=True)
class Job:
    """One batch job with its predicted constant dynamic draw."""

    id: str
    predicted_watts: float
    peak_watts: float
    duration_slots: int

    def __post_init__(self):
        if not self.id:
            raise ConfigurationError("job id must be non-empty")
        if not math.isfinite(self.predicted_watts) or self.predicted_watts <= 0:
            raise DataError(f"predicted_watts must be > 0, got {self.predicted_watts}")
        if self.peak_watts < self.predicted_watts:
            raise DataError(
                f"peak_watts {self.peak_watts} below predicted_watts {self.predicted_watts}"
            )
        if self.duration_slots < 1:
            raise ConfigurationError(f"duration_slots must be >= 1, got {self.duration_slots}")


@dataclass(frozen=True)
class Schedule:
    """Start slots for the assigned jobs under one host power cap."""

    assignments: Mapping[str, int]
    host_cap_watts: float

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))
        if self.host_cap_watts <= 0:
            raise ConfigurationError(f"host_cap_watts must be > 0, got {self.host_cap_watts}")


def admit_coarse(jobs: Sequence[Job], host_cap_watts: float) -> tuple[list[Job], list[Job]]:
    """Peak-power gate: (admitted, rejected), input order preserved."""
    admitted, rejected = [], []
    for job in jobs:
        (rejected if job.peak_watts > host_cap_watts else admitted).append(job)
    return admitted, rejected


def _job_index(jobs: Sequence[Job]) -> dict[str, Job]:
    index = {}
    for job in jobs:
        if job.id in index:
            raise ConfigurationError(f"duplicate job id {job.id!r}")
        index[job.id] = job
    return index


def slot_loads(schedule: Schedule, jobs: Sequence[Job], forecast: GreenForecast) -> list[float]:
    """Predicted watts consumed per slot; also validates the schedule."""
    index = _job_index(jobs)
    loads = [0.0] * forecast.horizon
    bad_slots = set()
    for job_id, start in schedule.assignments.items():
        job = index.get(job_id)
        if job is None:
            raise ScheduleValidationError(f"assignment references unknown job {job_id!r}")
        if start < 0 or start + job.duration_slots > forecast.horizon:
            raise ScheduleValidationError(
                f"job {job_id!r} at slot {start} leaves the horizon of {forecast.horizon}"
            )
        for s in range(start, start + job.duration_slots):
            loads[s] += job.predicted_watts
    for s, load in enumerate(loads):
        if load > schedule.host_cap_watts + CAP_SLACK:
            bad_slots.add(s)
    if bad_slots:
        raise ScheduleValidationError(
            f"capacity {schedule.host_cap_watts} W exceeded", violated_slots=sorted(bad_slots)
        )
    return loads


def green_utilization(schedule: Schedule, jobs: Sequence[Job], forecast: GreenForecast) -> float:
    """Fraction of consumed energy covered by green supply, in [0, 1].

    Slots are weighted by their (equal) length, so watts stand in for
    energy. An empty schedule consumes nothing and scores 1.0.
    """
    loads = slot_loads(schedule, jobs, forecast)
    consumed = sum(loads)
    if consumed == 0.0:
        return 1.0
    covered = sum(min(load, green) for load, green in zip(loads, forecast.green_watts))
    return covered / consumed


def schedule_greedy(
    jobs: Sequence[Job], forecast: GreenForecast, host_cap_watts: float
) -> tuple[Schedule, list[str]]:
    """Greedy placement: jobs by descending watts x duration (ties by id),
    each at the feasible start adding the most green coverage (ties to
    the earliest slot). Jobs with no feasible start are returned
    unassigned."""
    _job_index(jobs)
    horizon = forecast.horizon
    green = forecast.green_watts
    loads = [0.0] * horizon
    assignments: dict[str, int] = {}
    unassigned: list[str] = []
    ordered = sorted(jobs, key=lambda j: (-j.predicted_watts * j.duration_slots, j.id))
    for job in ordered:
        best_start = None
        best_gain = -1.0
        for start in range(0, horizon - job.duration_slots + 1):
            span = range(start, start + job.duration_slots)
            if any(loads[s] + job.predicted_watts > host_cap_watts + CAP_SLACK for s in span):
                continue
            gain = sum(
                min(loads[s] + job.predicted_watts, green[s]) - min(loads[s], green[s])
                for s in span
            )
            if gain > best_gain:
                best_gain = gain
                best_start = start
        if best_start is None:
            unassigned.append(job.id)
            continue
        assignments[job.id] = best_start
        for s in range(best_start, best_start + job.duration_slots):
            loads[s] += job.predicted_watts
    return Schedule(assignments, host_cap_watts), unassigned


def _fits(loads: list[float], job: Job, start: int, cap: float) -> bool:
    return all(
        loads[s] + job.predicted_watts <= cap + CAP_SLACK
        for s in range(start, start + job.duration_slots)
    )


def schedule_exact(
    jobs: Sequence[Job], forecast: GreenForecast, host_cap_watts: float
) -> tuple[Schedule, list[str]]:
    """Exhaustive optimum for small instances (<= 6 jobs, <= 12 slots).

    The search space is every maximal feasible assignment: a job may stay
    unassigned only when no start slot can seat it alongside the others,
    so no runnable work is ever dropped (and the greedy result is always
    in the space, which keeps exact >= greedy). The returned assignment
    maximizes green utilization; ties go to the lexicographically
    smallest choice by (job id, start slot), unassigned after any start.
    """
    if len(jobs) > 6:
        raise SizeError(f"exact solver handles <= 6 jobs, got {len(jobs)}")
    if forecast.horizon > 12:
        raise SizeError(f"exact solver handles <= 12 slots, got {forecast.horizon}")
    _job_index(jobs)
    ordered = sorted(jobs, key=lambda j: j.id)
    horizon = forecast.horizon
    green = forecast.green_watts
    cap = host_cap_watts

    def utilization(loads: list[float]) -> float:
        consumed = sum(loads)
        if consumed == 0.0:
            return 1.0
        covered = sum(min(load, g) for load, g in zip(loads, green))
        return covered / consumed

    best_util = -1.0
    best_assign: list[int | None] | None = None
    loads = [0.0] * horizon
    chosen: list[int | None] = []

    def recurse(i: int):
        nonlocal best_util, best_assign
        if i == len(ordered):
            # reject non-maximal leaves: an unassigned job that now fits
            for job, start in zip(ordered, chosen):
                if start is None and any(
                    _fits(loads, job, s, cap) for s in range(0, horizon - job.duration_slots + 1)
                ):
                    return
            util = utilization(loads)
            if util > best_util:
                best_util = util
                best_assign = list(chosen)
            return
        job = ordered[i]
        for start in range(0, horizon - job.duration_slots + 1):
            if not _fits(loads, job, start, cap):
                continue
            for s in range(start, start + job.duration_slots):
                loads[s] += job.predicted_watts
            chosen.append(start)
            recurse(i + 1)
            chosen.pop()
            for s in range(start, start + job.duration_slots):
                loads[s] -= job.predicted_watts
        chosen.append(None)
        recurse(i + 1)
        chosen.pop()

    recurse(0)
    assignments = {}
    unassigned = []
    for job, start in zip(ordered, best_assign):
        if start is None:
            unassigned.append(job.id)
        else:
            assignments[job.id] = start
    return Schedule(assignments, host_cap_watts), unassigned


# --- job and forecast files ----------------------------------------------


def parse_jobs_csv(text: str, path: str | None = None) -> list[Job]:
    """CSV with header ``job_id,predicted_watts,peak_watts,duration_slots``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != JOBS_CSV_HEADER:
        raise FormatError(f"expected header {JOBS_CSV_HEADER!r}", line=1, path=path)
    jobs = []
    seen = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.strip().split(",")
        if len(fields) != 4:
            raise FormatError(f"expected 4 fields, got {len(fields)}", line=lineno, path=path)
        try:
            job = Job(fields[0], float(fields[1]), float(fields[2]), int(fields[3]))
        except (ValueError, DataError, ConfigurationError) as exc:
            raise FormatError(str(exc), line=lineno, path=path) from None
        if job.id in seen:
            raise FormatError(f"duplicate job id {job.id!r}", line=lineno, path=path)
        seen.add(job.id)
        jobs.append(job)
    return jobs


def serialize_jobs_csv(jobs: Sequence[Job]) -> str:
    lines = [JOBS_CSV_HEADER]
    for job in jobs:
        lines.append(
            f"{job.id},{format(job.predicted_watts, '.17g')},"
            f"{format(job.peak_watts, '.17g')},{job.duration_slots}"
        )
    return "\n".join(lines) + "\n"


def parse_forecast_csv(text: str, slot_seconds: int = 60, path: str | None = None) -> GreenForecast:
    """CSV with header ``slot,green_watts``; slots must count up from 0."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORECAST_CSV_HEADER:
        raise FormatError(f"expected header {FORECAST_CSV_HEADER!r}", line=1, path=path)
    greens = []
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.strip().split(",")
        if len(fields) != 2:
            raise FormatError(f"expected 2 fields, got {len(fields)}", line=lineno, path=path)
        try:
            slot = int(fields[0])
            green = float(fields[1])
        except ValueError:
            raise FormatError(f"bad row {raw!r}", line=lineno, path=path) from None
        if slot != len(greens):
            raise FormatError(f"expected slot {len(greens)}, got {slot}", line=lineno, path=path)
        if not math.isfinite(green) or green < 0:
            raise FormatError(f"green watts must be finite and >= 0, got {fields[1]}", line=lineno, path=path)
        greens.append(green)
    if not greens:
        raise FormatError("forecast has no slots", line=len(lines), path=path)
    return GreenForecast(slot_seconds, tuple(greens))


def serialize_forecast_csv(forecast: GreenForecast) -> str:
    lines = [FORECAST_CSV_HEADER]
    for slot, green in enumerate(forecast.green_watts):
        lines.append(f"{slot},{format(green, '.17g')}")
    return "\n".join(lines) + "\n"


def serialize_schedule_csv(
    schedule: Schedule, jobs: Sequence[Job], utilization: float
) -> str:
    """Assigned rows sorted by (start, id), then a summary comment line."""
    index = _job_index(jobs)
    lines = [SCHEDULE_CSV_HEADER]
    for job_id, start in sorted(schedule.assignments.items(), key=lambda kv: (kv[1], kv[0])):
        job = index[job_id]
        lines.append(
            f"{job_id},{start},{format(job.predicted_watts, '.17g')},{job.duration_slots}"
        )
    lines.append(f"# green_utilization {format(utilization, '.17g')}")
    return "\n".join(lines) + "\n"
