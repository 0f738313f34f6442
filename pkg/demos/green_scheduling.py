"""Place power-hungry jobs where the renewable forecast is generous.

A toy solar day drives the forecast: six hourly slots ramping up to
midday and back down. Greedy and exhaustive placement run on the same
jobs; the printed slot map shows where each job landed and how much of
its draw the forecast covers.
"""

from greenmeter import (
    GreenForecast,
    Job,
    admit_coarse,
    green_utilization,
    schedule_exact,
    schedule_greedy,
    slot_loads,
)

CAP = 100.0
FORECAST = GreenForecast(3600, (10.0, 45.0, 90.0, 85.0, 50.0, 15.0))
JOBS = [
    Job("nightly-build", 60.0, 70.0, 2),
    Job("db-backup", 40.0, 45.0, 3),
    Job("ml-batch", 55.0, 65.0, 2),
    Job("video-encode", 90.0, 140.0, 1),  # peak blows the cap
]


def show(tag, schedule, unassigned, jobs):
    util = green_utilization(schedule, jobs, FORECAST)
    loads = slot_loads(schedule, jobs, FORECAST)
    print(f"\n{tag}: green utilization {util:.4f}")
    for job_id, start in sorted(schedule.assignments.items(), key=lambda kv: kv[1]):
        print(f"  {job_id:<14} slots {start}..{start + _dur(jobs, job_id) - 1}")
    for job_id in unassigned:
        print(f"  {job_id:<14} unassigned")
    bars = "  ".join(f"{load:5.1f}/{green:5.1f}" for load, green in zip(loads, FORECAST.green_watts))
    print(f"  load/green     {bars}")


def _dur(jobs, job_id):
    return next(j.duration_slots for j in jobs if j.id == job_id)


def main():
    admitted, rejected = admit_coarse(JOBS, CAP)
    for job in rejected:
        print(f"admission: {job.id} rejected, peak {job.peak_watts:.0f} W over cap {CAP:.0f} W")

    greedy, greedy_un = schedule_greedy(admitted, FORECAST, CAP)
    show("greedy", greedy, greedy_un, admitted)

    exact, exact_un = schedule_exact(admitted, FORECAST, CAP)
    show("exact", exact, exact_un, admitted)


if __name__ == "__main__":
    main()
