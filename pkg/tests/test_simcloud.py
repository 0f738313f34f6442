import numpy as np
import pytest
from dataclasses import replace

from greenmeter.errors import ConfigurationError, DomainError
from greenmeter.ingest import DISK_READ, DISK_WRITE, CPU_VALUE
from greenmeter.simcloud import (
    DEFAULT_HOST,
    M1_SMALL,
    DISK_BASE,
    Flavor,
    HostModel,
    Utilization,
    WorkloadKind,
    WorkloadSpec,
    default_workload,
    gen_power,
    gen_utilization,
    run_experiment,
    run_mix,
)

QUIET = replace(DEFAULT_HOST, noise_sigma_watts=0.0)
RAW = replace(QUIET, meter_step_watts=0.0)


def test_flavor_and_workload_validation():
    with pytest.raises(ConfigurationError):
        Flavor("bad", 0, 8.0, 10.0)
    with pytest.raises(ConfigurationError):
        WorkloadSpec(WorkloadKind.CPU_SPIN, 60, cpu_threads=65)
    with pytest.raises(ConfigurationError):
        WorkloadSpec(WorkloadKind.CPU_SPIN, 0)


def test_host_validation():
    with pytest.raises(ConfigurationError):
        replace(DEFAULT_HOST, noise_sigma_watts=-1.0)
    # cap below the largest single coefficient is inconsistent
    with pytest.raises(ConfigurationError):
        replace(DEFAULT_HOST, dynamic_cap_watts=30.0)


def test_idle_utilization_stays_tiny():
    workload = default_workload(WorkloadKind.IDLE, 600)
    for t in (0, 1, 57, 299, 599):
        u = gen_utilization(workload, M1_SMALL, seed=9, t=t)
        assert all(0.0 < comp < 0.02 for comp in u)


def test_cpu_spin_high_after_ramp():
    workload = default_workload(WorkloadKind.CPU_SPIN, 600)
    for t in range(10, 600, 13):
        u = gen_utilization(workload, M1_SMALL, seed=4, t=t)
        assert u.u_cpu >= 0.95


def test_gen_utilization_rejects_out_of_range_t():
    workload = default_workload(WorkloadKind.IDLE, 60)
    with pytest.raises(DomainError):
        gen_utilization(workload, M1_SMALL, seed=1, t=-1)
    with pytest.raises(DomainError):
        gen_utilization(workload, M1_SMALL, seed=1, t=60)


def test_gen_utilization_deterministic():
    workload = default_workload(WorkloadKind.STRESS_COMPOSITE, 120)
    a = [gen_utilization(workload, M1_SMALL, seed=7, t=t) for t in range(120)]
    b = [gen_utilization(workload, M1_SMALL, seed=7, t=t) for t in range(120)]
    assert a == b


def test_disk_spike_train_structure():
    # period 10s with a 3s duty burst; off samples sit exactly on the base
    workload = default_workload(WorkloadKind.DISK_IO, 600)
    us = [gen_utilization(workload, M1_SMALL, seed=11, t=t).u_disk for t in range(600)]
    high = [t for t, u in enumerate(us) if u > DISK_BASE]
    assert len(high) == 180
    phase = high[0]
    assert set(high) == {t for t in range(600) if 0 <= (t - phase) % 10 < 3}
    amplitude = min(1.0, 0.2 + 0.16 * workload.io_threads)
    for t, u in enumerate(us):
        if t in set(high):
            assert DISK_BASE + 0.9 * amplitude <= u <= DISK_BASE + amplitude
        else:
            assert u == DISK_BASE


def test_gen_power_zero_utilization_is_static():
    u = Utilization(0.0, 0.0, 0.0, 0.0)
    assert gen_power(QUIET, u) == 100.0


def test_gen_power_full_cpu_delta_in_band():
    u = Utilization(1.0, 0.0, 0.0, 0.0)
    delta = gen_power(QUIET, u) - 100.0
    assert 30.0 <= delta <= 40.0


def test_gen_power_all_ones_delta_in_band():
    u = Utilization(1.0, 1.0, 1.0, 1.0)
    delta = gen_power(QUIET, u) - 100.0
    assert 90.0 <= delta <= 100.0


def test_gen_power_monotone_in_each_component():
    rng = np.random.default_rng(301)
    for _ in range(200):
        base = rng.random(4) * 0.8
        bumped = base.copy()
        i = int(rng.integers(0, 4))
        bumped[i] = min(1.0, base[i] + rng.random() * 0.2)
        assert gen_power(QUIET, Utilization(*bumped)) >= gen_power(QUIET, Utilization(*base))


def test_gen_power_dynamic_never_exceeds_cap_plus_slack():
    rng = np.random.default_rng(302)
    for _ in range(500):
        u = Utilization(*rng.random(4))
        assert gen_power(QUIET, u) - QUIET.static_watts <= QUIET.dynamic_cap_watts + 2.0


def test_run_experiment_deterministic():
    workload = default_workload(WorkloadKind.NET_TRANSFER, 60)
    a = run_experiment(M1_SMALL, workload, seed=21)
    b = run_experiment(M1_SMALL, workload, seed=21)
    assert a.id == b.id
    assert a.marks == b.marks
    assert a.resources == b.resources
    assert a.power == b.power


def test_run_experiment_rejects_short_duration():
    with pytest.raises(ConfigurationError):
        run_experiment(M1_SMALL, default_workload(WorkloadKind.IDLE, 9))


def test_record_shape_and_grid():
    duration = 64
    record = run_experiment(M1_SMALL, default_workload(WorkloadKind.CPU_SPIN, duration), seed=3)
    assert record.marks.span_seconds == duration
    cpu = record.resources[CPU_VALUE]
    assert cpu.epochs[0] == record.marks.start_epoch
    assert cpu.epochs[-1] == record.marks.end_epoch
    assert len(cpu) == duration
    assert np.all(record.power.values % 4 == 0)
    assert record.power.epochs[0] == record.marks.start_epoch
    assert record.power.epochs[-1] == record.marks.end_epoch


def test_power_epochs_jittered_but_ordered():
    record = run_experiment(M1_SMALL, default_workload(WorkloadKind.MEM_CYCLE, 300), seed=13)
    deltas = np.diff(record.power.epochs)
    assert np.all(deltas >= 1)
    assert deltas.mean() <= 1.2


def test_idle_run_power_is_static_without_noise():
    record = run_experiment(
        M1_SMALL, default_workload(WorkloadKind.IDLE, 60), host=QUIET, seed=17
    )
    assert np.all(record.power.values == 100.0)


def test_idle_run_mean_power_near_static_with_noise():
    record = run_experiment(M1_SMALL, default_workload(WorkloadKind.IDLE, 60), seed=17)
    assert abs(record.power.values.mean() - 100.0) < 4.0


def test_cpu_spin_mean_dynamic_in_expected_band():
    record = run_experiment(M1_SMALL, default_workload(WorkloadKind.CPU_SPIN, 600), seed=42)
    dynamic = record.power.values.mean() - 100.0
    assert 30.0 <= dynamic <= 40.0


def test_mix_two_idle_vms_dynamic_below_one_step():
    vms = ((M1_SMALL, default_workload(WorkloadKind.IDLE, 60)),) * 2
    record = run_mix(QUIET, vms, seed=23)
    assert np.all(np.abs(record.power.values - 100.0) < 4.0)


def test_mix_deterministic_and_labeled():
    vms = (
        (M1_SMALL, default_workload(WorkloadKind.CPU_SPIN, 30)),
        (M1_SMALL, default_workload(WorkloadKind.DISK_IO, 30)),
    )
    a = run_mix(DEFAULT_HOST, vms, seed=5)
    b = run_mix(DEFAULT_HOST, vms, seed=5)
    assert a.kind == "mix"
    assert a.vms == vms
    assert a.resources == b.resources and a.power == b.power


def test_mix_guards():
    with pytest.raises(ConfigurationError):
        run_mix(DEFAULT_HOST, (), seed=1)
    vms = ((M1_SMALL, default_workload(WorkloadKind.IDLE, 30)),) * 17
    with pytest.raises(ConfigurationError):
        run_mix(DEFAULT_HOST, vms, seed=1)
    mismatched = (
        (M1_SMALL, default_workload(WorkloadKind.IDLE, 30)),
        (M1_SMALL, default_workload(WorkloadKind.IDLE, 40)),
    )
    with pytest.raises(ConfigurationError):
        run_mix(DEFAULT_HOST, mismatched, seed=1)


def test_mix_dynamic_sublinear_in_components():
    # clamping and the cap make the mix draw at most the sum of the parts
    rng = np.random.default_rng(303)
    for _ in range(300):
        u1 = rng.random(4)
        u2 = rng.random(4)
        mixed = np.minimum(1.0, u1 + u2)
        dyn_mix = gen_power(RAW, Utilization(*mixed)) - RAW.static_watts
        dyn_1 = gen_power(RAW, Utilization(*u1)) - RAW.static_watts
        dyn_2 = gen_power(RAW, Utilization(*u2)) - RAW.static_watts
        assert dyn_mix <= dyn_1 + dyn_2 + 1e-12


def test_mix_record_sublinear_vs_single_runs():
    cpu = default_workload(WorkloadKind.CPU_SPIN, 120)
    disk = default_workload(WorkloadKind.DISK_IO, 120)
    mix = run_mix(RAW, ((M1_SMALL, cpu), (M1_SMALL, disk)), seed=31)
    single_cpu = run_experiment(M1_SMALL, cpu, host=RAW, seed=31)
    single_disk = run_experiment(M1_SMALL, disk, host=RAW, seed=31)
    dyn = lambda r: r.power.values.mean() - RAW.static_watts
    assert dyn(mix) <= dyn(single_cpu) + dyn(single_disk) + 0.5


def test_mix_saturating_kinds_pin_dynamic_at_cap():
    host = replace(QUIET, dynamic_cap_watts=60.0)
    vms = tuple(
        (M1_SMALL, default_workload(kind, 120))
        for kind in (
            WorkloadKind.CPU_SPIN,
            WorkloadKind.MEM_CYCLE,
            WorkloadKind.DISK_IO,
            WorkloadKind.NET_TRANSFER,
        )
    )
    record = run_mix(host, vms, seed=37)
    dynamics = record.power.values - host.static_watts
    assert np.all(dynamics <= 60.0 + 2.0)
    settled = record.power.epochs - record.marks.start_epoch >= 10
    assert np.all(dynamics[settled] == 60.0)


def test_idle_additivity_to_a_mix():
    base_vms = ((M1_SMALL, default_workload(WorkloadKind.CPU_SPIN, 90)),)
    padded = base_vms + ((M1_SMALL, default_workload(WorkloadKind.IDLE, 90)),) * 2
    base = run_mix(QUIET, base_vms, seed=41)
    more = run_mix(QUIET, padded, seed=41)
    assert abs(base.power.values.mean() - more.power.values.mean()) < 4.0
