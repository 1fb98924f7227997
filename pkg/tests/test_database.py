import datetime

import pytest

from src.database.models import RunManifest
from src.database.operations import get_run, get_runs, record_run


def _manifest(command, started_at, status="ok"):
    manifest = RunManifest(
        command=command,
        config_hash="0123456789abcdef",
        toolkit_version="0.3.0",
        seeds={"filters": 1, "oracle": 7},
        config_path="configs/fission_small.yaml",
        started_at=started_at,
    )
    with manifest.stage("propagate"):
        pass
    manifest.outputs = [f"runs/{command}.tsv"]
    manifest.finish(status)
    return manifest


def test_record_and_fetch_run():
    manifest = _manifest("min-noise", datetime.datetime(2024, 5, 1, 12, 30, 0))
    run_id = record_run(manifest)
    assert run_id is not None and manifest.id == run_id

    run = get_run(run_id)
    assert run["command"] == "min-noise"
    assert run["seeds"] == {"filters": 1, "oracle": 7}
    assert run["outputs"] == ["runs/min-noise.tsv"]
    assert "propagate" in run["stage_timings"]
    assert run["timestamp"] == datetime.datetime(2024, 5, 1, 12, 30, 0)


def test_get_run_missing():
    assert get_run(42) == {}


def test_filter_runs_by_date_and_command():
    record_run(_manifest("spectrum", datetime.datetime(2024, 4, 28, 9, 0, 0)))
    record_run(_manifest("min-noise", datetime.datetime(2024, 5, 2, 9, 0, 0)))
    record_run(_manifest("validate", datetime.datetime(2024, 5, 3, 9, 0, 0), status="validation_failed"))

    assert [r["command"] for r in get_runs()] == ["spectrum", "min-noise", "validate"]
    assert [r["command"] for r in get_runs(since=datetime.date(2024, 5, 1))] == ["min-noise", "validate"]
    assert [r["status"] for r in get_runs(command="validate")] == ["validation_failed"]
    assert get_runs(since=datetime.date(2024, 5, 3), command="spectrum") == []


def test_manifest_stage_timings_accumulate():
    manifest = RunManifest(command="pair-map")
    with manifest.stage("jacobian"):
        pass
    with manifest.stage("jacobian"):
        pass
    assert list(manifest.stage_timings) == ["jacobian"]
    assert manifest.stage_timings["jacobian"] >= 0.0
    assert manifest.filename == "manifest_pair-map.json"


def test_manifest_stage_records_time_on_error():
    manifest = RunManifest(command="immunity")
    with pytest.raises(RuntimeError):
        with manifest.stage("optimize"):
            raise RuntimeError("boom")
    assert "optimize" in manifest.stage_timings
    manifest.finish("failed")
    assert manifest.to_dict()["status"] == "failed"
