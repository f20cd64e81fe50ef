import json
import socket
import sys
import threading
from pathlib import Path

import pytest

from framescout.detect import BackendUnavailable, ProtocolError
from framescout.errors import InputError
from framescout.search import SearchConfig, run_search
from framescout.synth import OracleBackend, ScenarioTemplate, generate_scenario, oracle_detect, save_scenario
from framescout.wire import (
    PipeDetectorBackend,
    ScenarioFrameSource,
    TcpDetectorBackend,
    decode_response,
    encode_request,
    open_backend,
)

RESPONDER = Path(__file__).parent / "wire_responder.py"


def pipe_cmd(mode, fixture=None):
    parts = [sys.executable, str(RESPONDER), mode]
    if fixture:
        parts.append(str(fixture))
    return " ".join(parts)


@pytest.fixture
def scenario(tmp_path):
    s = generate_scenario(ScenarioTemplate(kind="spatial", n_frames=196,
                                           event_length=6, distractor_count=1,
                                           margin=8), 5)
    path = tmp_path / "scenario.json"
    save_scenario(s, path)
    return s, path


@pytest.fixture
def fixture_file(tmp_path, scenario):
    s, _ = scenario
    vocab = s.queries[0].spec.vocabulary()
    dets = oracle_detect(s, range(s.n_frames), vocab)
    doc = {
        "detections": [
            {
                "frame_index": d.frame_index,
                "label": d.label,
                "confidence": d.confidence,
                "bbox": [d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1],
            }
            for d in dets
        ]
    }
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


class TestFrameSource:
    def test_path_entries_by_default(self, scenario):
        s, path = scenario
        entry = ScenarioFrameSource(s, str(path)).frame_entry(3)
        assert entry == {"index": 3, "path": str(path)}

    def test_send_images_attaches_png(self, scenario):
        import base64
        import io

        from PIL import Image

        s, path = scenario
        entry = ScenarioFrameSource(s, str(path), send_images=True).frame_entry(3)
        img = Image.open(io.BytesIO(base64.b64decode(entry["image_b64"])))
        assert img.size == (96, 96)


class TestEncoding:
    def test_request_shape(self):
        raw = encode_request("req-1", ["a"], [{"index": 3, "path": "v.json"}], None)
        doc = json.loads(raw)
        assert doc == {
            "id": "req-1",
            "vocabulary": ["a"],
            "frames": [{"index": 3, "path": "v.json"}],
            "grid_k": None,
        }
        assert raw.endswith(b"\n")

    def test_decode_round_trip(self):
        line = json.dumps({
            "id": "req-9",
            "detections": [
                {"frame_index": 4, "label": "person", "confidence": 0.5,
                 "bbox": [0.1, 0.1, 0.4, 0.4]}
            ],
            "error": None,
        }).encode()
        dets = decode_response(line, "req-9")
        assert dets[0].frame_index == 4 and dets[0].label == "person"

    def test_decode_rejects_wrong_id(self):
        line = json.dumps({"id": "other", "detections": [], "error": None}).encode()
        with pytest.raises(ProtocolError):
            decode_response(line, "req-1")

    def test_decode_surfaces_error_field(self):
        line = json.dumps({"id": "r", "detections": [], "error": "boom"}).encode()
        with pytest.raises(ProtocolError):
            decode_response(line, "r")

    def test_decode_rejects_bad_bbox(self):
        line = json.dumps({
            "id": "r",
            "detections": [{"frame_index": 0, "label": "x", "confidence": 0.5,
                            "bbox": [0.9, 0.1, 0.2, 0.4]}],
            "error": None,
        }).encode()
        with pytest.raises(ProtocolError):
            decode_response(line, "r")


class TestPipeBackend:
    def test_matches_oracle(self, scenario, fixture_file):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path))
        vocab = s.queries[0].spec.vocabulary()
        frames = list(range(40, 60))
        with PipeDetectorBackend(pipe_cmd("fixture", fixture_file), source) as backend:
            wire_dets = backend.detect(frames, vocab)
        oracle_dets = oracle_detect(s, frames, vocab)
        key = lambda d: (d.frame_index, d.label)  # noqa: E731
        assert sorted(wire_dets, key=key) == sorted(oracle_dets, key=key)

    def test_error_response_raises(self, scenario):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path))
        with PipeDetectorBackend(pipe_cmd("error"), source) as backend:
            with pytest.raises(ProtocolError):
                backend.detect([1], ["person"])

    def test_bad_id_raises(self, scenario):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path))
        with PipeDetectorBackend(pipe_cmd("bad-id"), source) as backend:
            with pytest.raises(ProtocolError):
                backend.detect([1], ["person"])

    def test_garbage_raises(self, scenario):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path))
        with PipeDetectorBackend(pipe_cmd("garbage"), source) as backend:
            with pytest.raises(ProtocolError):
                backend.detect([1], ["person"])

    def test_dead_process_unavailable(self, scenario):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path))
        with PipeDetectorBackend(pipe_cmd("silent-exit"), source) as backend:
            with pytest.raises(BackendUnavailable):
                backend.detect([1], ["person"])

    def test_missing_command_unavailable(self, scenario):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path))
        with pytest.raises(BackendUnavailable):
            PipeDetectorBackend("definitely-not-a-real-binary-xyz", source)

    def test_full_search_matches_oracle_backend(self, scenario, fixture_file):
        s, path = scenario
        query = s.queries[0].spec
        cfg = SearchConfig(seed=5)
        via_oracle = run_search(s.n_frames, s.duration_seconds, query,
                                OracleBackend(s), cfg)
        source = ScenarioFrameSource(s, str(path))
        with PipeDetectorBackend(pipe_cmd("fixture", fixture_file), source) as backend:
            via_wire = run_search(s.n_frames, s.duration_seconds, query, backend, cfg)
        assert via_wire.keyframes == via_oracle.keyframes
        assert via_wire.iterations_used == via_oracle.iterations_used


class _GridService(threading.Thread):
    """One-connection TCP peer that answers grid requests with detections
    placed in known tiles of the composite."""

    def __init__(self):
        super().__init__(daemon=True)
        self.sock = socket.socket()
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]

    def run(self):
        conn, _ = self.sock.accept()
        reader = conn.makefile("rb")
        for line in reader:
            req = json.loads(line)
            k = req["grid_k"]
            if k:
                # one detection centered in the last tile of the composite
                span = 1.0 / k
                x0 = (k - 1) * span + 0.2 * span
                y0 = (k - 1) * span + 0.2 * span
                dets = [{
                    "frame_index": req["frames"][0]["index"],
                    "label": "person",
                    "confidence": 0.9,
                    "bbox": [x0, y0, x0 + 0.5 * span, y0 + 0.5 * span],
                }]
            else:
                dets = []
            resp = {"id": req["id"], "detections": dets, "error": None}
            conn.sendall(json.dumps(resp).encode() + b"\n")
        conn.close()


class TestGridMode:
    def test_grid_demux_end_to_end(self, scenario):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path), send_images=True)
        service = _GridService()
        service.start()
        backend = TcpDetectorBackend("127.0.0.1", service.port, source, grid_k=2)
        try:
            frames = [10, 20, 30, 40]
            dets = backend.detect(frames, ["person"])
        finally:
            backend.close()
        # the scripted detection sits in tile (1,1) -> last frame of the chunk
        assert len(dets) == 1
        assert dets[0].frame_index == 40
        b = dets[0].bbox
        assert 0 <= b.x0 < b.x1 <= 1 and 0 <= b.y0 < b.y1 <= 1

    def test_open_backend_spec_parsing(self, scenario):
        s, path = scenario
        source = ScenarioFrameSource(s, str(path))
        with pytest.raises(InputError):
            open_backend("carrier-pigeon:foo", source)
        with pytest.raises(InputError):
            open_backend("tcp:missing-port", source)
        with pytest.raises(BackendUnavailable):
            open_backend("tcp:127.0.0.1:1", source)
