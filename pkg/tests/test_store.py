from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from greenmeter import store
from greenmeter.errors import (
    ConfigurationError,
    ConflictError,
    StorageError,
    VersionError,
)
from greenmeter.powermodel import BayesClassifier, PowerModel
from greenmeter.simcloud import (
    DEFAULT_HOST,
    FLAVORS,
    M1_SMALL,
    WorkloadKind,
    default_workload,
    run_experiment,
    run_mix,
)
from greenmeter.store import (
    ExperimentManifest,
    load_experiment,
    load_model,
    query,
    save_experiment,
    save_model,
)

KINDS = [k for k in WorkloadKind if k is not WorkloadKind.STRESS_COMPOSITE]


def _record(seed=42, kind=WorkloadKind.CPU_SPIN, duration=30):
    return run_experiment(M1_SMALL, default_workload(kind, duration), seed=seed)


def test_roundtrip_preserves_single_record_exactly(tmp_path):
    rng = np.random.default_rng(601)
    for _ in range(8):
        kind = KINDS[int(rng.integers(0, len(KINDS)))]
        record = _record(seed=int(rng.integers(0, 10_000)), kind=kind,
                         duration=int(rng.integers(10, 40)))
        root = tmp_path / record.id
        save_experiment(root, record)
        assert load_experiment(root, record.id) == record


def test_roundtrip_preserves_mix_record(tmp_path):
    vms = [
        (M1_SMALL, default_workload(WorkloadKind.CPU_SPIN, 30)),
        (M1_SMALL, default_workload(WorkloadKind.DISK_IO, 30)),
    ]
    record = run_mix(DEFAULT_HOST, vms, seed=7)
    save_experiment(tmp_path, record)
    loaded = load_experiment(tmp_path, record.id)
    assert loaded == record
    assert loaded.kind == "mix"
    assert loaded.vms == tuple(vms)


def test_roundtrip_without_ground_truth(tmp_path):
    record = replace(_record(), ground_truth=None)
    save_experiment(tmp_path, record)
    assert load_experiment(tmp_path, record.id).ground_truth is None


def test_save_returns_manifest_with_created_epoch(tmp_path):
    record = _record()
    manifest = save_experiment(tmp_path, record, created_epoch=1234)
    assert isinstance(manifest, ExperimentManifest)
    assert manifest.id == record.id
    assert manifest.flavor_name == "m1.small"
    assert manifest.workload_kind == "cpu_spin"
    assert manifest.created_epoch == 1234
    assert manifest.resources_path.exists()
    assert manifest.power_path.exists()
    assert manifest.marks_path.exists()


def test_duplicate_id_conflicts(tmp_path):
    record = _record()
    save_experiment(tmp_path, record)
    with pytest.raises(ConflictError):
        save_experiment(tmp_path, record)


def test_dot_leading_id_rejected(tmp_path):
    record = replace(_record(), id=".sneaky")
    with pytest.raises(ConfigurationError):
        save_experiment(tmp_path, record)


def test_failed_commit_leaves_no_visible_experiment(tmp_path, monkeypatch):
    record = _record()

    def boom(tmp, final):
        raise OSError("disk full")

    monkeypatch.setattr(store, "_commit_dir", boom)
    with pytest.raises(StorageError):
        save_experiment(tmp_path, record)
    assert query(tmp_path) == []
    leftovers = list((tmp_path / "experiments").iterdir())
    assert leftovers == []
    monkeypatch.undo()
    save_experiment(tmp_path, record)
    assert [m.id for m in query(tmp_path)] == [record.id]


def test_load_unknown_id_is_storage_error(tmp_path):
    with pytest.raises(StorageError):
        load_experiment(tmp_path, "nope")


def test_query_sorts_and_filters(tmp_path):
    cpu_b = replace(_record(kind=WorkloadKind.CPU_SPIN), id="bbb")
    cpu_a = replace(_record(kind=WorkloadKind.CPU_SPIN), id="aaa")
    idle = replace(_record(kind=WorkloadKind.IDLE), id="zzz")
    save_experiment(tmp_path, cpu_b, created_epoch=100)
    save_experiment(tmp_path, cpu_a, created_epoch=100)
    save_experiment(tmp_path, idle, created_epoch=50)
    rows = query(tmp_path)
    assert [m.id for m in rows] == ["zzz", "aaa", "bbb"]  # (created, id)
    assert [m.id for m in query(tmp_path, workload_kind="cpu_spin")] == ["aaa", "bbb"]
    assert [m.id for m in query(tmp_path, flavor="m1.small")] == ["zzz", "aaa", "bbb"]
    assert query(tmp_path, flavor="m9.huge") == []
    assert query(tmp_path / "missing") == []


def test_query_matches_mix_by_member_flavor(tmp_path):
    vms = [(M1_SMALL, default_workload(WorkloadKind.IDLE, 20))] * 2
    record = run_mix(DEFAULT_HOST, vms, seed=3)
    save_experiment(tmp_path, record)
    assert [m.id for m in query(tmp_path, flavor="m1.small")] == [record.id]
    assert [m.id for m in query(tmp_path, workload_kind="mix")] == [record.id]
    assert query(tmp_path, workload_kind="cpu_spin") == []


def test_query_skips_stray_entries(tmp_path):
    record = _record()
    save_experiment(tmp_path, record)
    (tmp_path / "experiments" / ".tmp-junk").mkdir()
    (tmp_path / "experiments" / "notes.txt").write_text("hi\n")
    assert [m.id for m in query(tmp_path)] == [record.id]


def _power_model():
    return PowerModel(
        p_static_watts=100.25,
        beta=(35.0, 26.5, 9.0, 27.125),
        ridge_lambda=0.0,
        residual_rmse_watts=1.5,
        r_squared=0.998,
        n_samples=120,
    )


def test_model_roundtrip_and_overwrite(tmp_path):
    model = _power_model()
    path = save_model(tmp_path, "power", model)
    assert path == Path(tmp_path) / "models" / "power"
    assert load_model(tmp_path, "power") == model
    other = replace(model, p_static_watts=90.0)
    save_model(tmp_path, "power", other)
    assert load_model(tmp_path, "power") == other


def test_bayes_model_roundtrip(tmp_path):
    model = BayesClassifier(
        classes=("idle", "cpu_spin"),
        priors=(0.5, 0.5),
        means=((0.0, 0.0, 0.0, 0.0), (0.9, 0.1, 0.0, 0.0)),
        variances=((1e-6, 1e-6, 1e-6, 1e-6), (0.01, 0.01, 1e-6, 1e-6)),
        mean_dynamic_watts=(0.5, 33.0),
    )
    save_model(tmp_path, "bayes", model)
    assert load_model(tmp_path, "bayes") == model


def test_model_name_and_version_guards(tmp_path):
    with pytest.raises(ConfigurationError):
        save_model(tmp_path, ".hidden", _power_model())
    with pytest.raises(StorageError):
        load_model(tmp_path, "absent")
    models = tmp_path / "models"
    models.mkdir()
    (models / "future").write_text("format v999\nkind power\n")
    with pytest.raises(VersionError):
        load_model(tmp_path, "future")
