"""End-to-end: the search engine driven over the pipe protocol with
stubbed detections reproduces its scenario-backend result. The engine is
exercised purely through its CLI and file formats."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

FRAMESCOUT = shutil.which("framescout")

pytestmark = pytest.mark.skipif(
    FRAMESCOUT is None, reason="framescout CLI not installed"
)


def run(*argv):
    proc = subprocess.run(
        [FRAMESCOUT, *argv], capture_output=True, text=True, timeout=120
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def test_pipe_backend_reproduces_scenario_backend(tmp_path):
    scenario = tmp_path / "scenario.json"
    fixture = tmp_path / "fixture.json"
    run("gen", "spatial", "-o", str(scenario), "--n-frames", "480", "--seed", "5",
        "--detections-out", str(fixture))

    via_scenario = tmp_path / "via_scenario"
    run("search", "--scenario", str(scenario), "--out-dir", str(via_scenario),
        "--seed", "5")

    via_pipe = tmp_path / "via_pipe"
    backend = f"pipe:{sys.executable} -m detector_service --stub {fixture}"
    run("search", "--video", str(scenario), "--backend", backend,
        "--out-dir", str(via_pipe), "--seed", "5")

    results = [read_json(d / "result.json") for d in (via_scenario, via_pipe)]
    for doc in results:
        doc.pop("wall_ms")  # machine-dependent
    assert results[0] == results[1]

    traces = [(d / "trace.csv").read_bytes() for d in (via_scenario, via_pipe)]
    assert traces[0] == traces[1]


def test_pipe_backend_with_conf_floor_drops_detections(tmp_path):
    scenario = tmp_path / "scenario.json"
    fixture = tmp_path / "fixture.json"
    run("gen", "spatial", "-o", str(scenario), "--n-frames", "480", "--seed", "6",
        "--detections-out", str(fixture))

    out = tmp_path / "floored"
    backend = (
        f"pipe:{sys.executable} -m detector_service --stub {fixture} --conf-floor 0.99"
    )
    run("search", "--video", str(scenario), "--backend", backend,
        "--out-dir", str(out), "--seed", "6")
    result = read_json(out / "result.json")
    # everything filtered out: scores known but all zero
    assert all(kf["score"] == 0.0 for kf in result["keyframes"])
