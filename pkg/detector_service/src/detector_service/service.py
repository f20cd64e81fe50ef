"""Request handling and the serve loops (stdio pipe or TCP).

One response line per request line, in order; a bad request produces an
error response, never a dead stream.
"""

from __future__ import annotations

import socketserver
import sys
import threading
from dataclasses import dataclass

from .models import StubModel, load_adapter
from .protocol import (
    ProtocolViolation,
    extract_request_id,
    make_response,
    parse_request,
    serialize_response,
)

__all__ = ["ServiceConfig", "build_model", "handle_detect", "handle_line", "serve"]


@dataclass(frozen=True)
class ServiceConfig:
    stub_fixture: str | None = None
    model: str | None = None  # dotted adapter path, e.g. "my_pkg.adapters:yolo"
    device: str = "cpu"
    conf_floor: float = 0.0
    max_batch: int = 64
    port: int | None = None  # None serves stdio

    def __post_init__(self):
        if not 0.0 <= self.conf_floor < 1.0:
            raise ValueError(f"conf_floor must be in [0, 1), got {self.conf_floor}")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


def build_model(config: ServiceConfig):
    if config.stub_fixture:
        return StubModel(config.stub_fixture)
    if config.model:
        return load_adapter(config.model, config.device)
    raise ValueError("no model configured: pass --stub FIXTURE or --model SPEC")


def handle_detect(request: dict, model, config: ServiceConfig) -> dict:
    """Run the model on a validated request and shape the response.

    Detections are filtered to the requested vocabulary and the confidence
    floor; bboxes must already be normalized corner-form (the model seam
    contract, checked here so a misbehaving adapter cannot leak garbage
    onto the wire).
    """
    if len(request["frames"]) > config.max_batch:
        return make_response(
            request["id"], [],
            f"too many frames: {len(request['frames'])} > {config.max_batch}",
        )
    vocab = {" ".join(v.split()).casefold() for v in request["vocabulary"]}
    try:
        raw = model(request["frames"], request["vocabulary"])
    except Exception as exc:  # noqa: BLE001 - must answer, not crash
        return make_response(request["id"], [], f"model failure: {exc}")
    detections = []
    for det in raw:
        x0, y0, x1, y1 = det["bbox"]
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            return make_response(
                request["id"], [], f"model produced a degenerate bbox {det['bbox']}"
            )
        if not 0.0 <= det["confidence"] <= 1.0:
            return make_response(
                request["id"], [], f"model confidence {det['confidence']} outside [0, 1]"
            )
        if det["confidence"] < config.conf_floor:
            continue
        if " ".join(det["label"].split()).casefold() not in vocab:
            continue
        detections.append(
            {
                "frame_index": det["frame_index"],
                "label": det["label"],
                "confidence": det["confidence"],
                "bbox": [x0, y0, x1, y1],
            }
        )
    return make_response(request["id"], detections, None)


def handle_line(line: str, model, config: ServiceConfig) -> bytes:
    try:
        request = parse_request(line)
    except ProtocolViolation as exc:
        return serialize_response(
            make_response(extract_request_id(line), [], str(exc))
        )
    return serialize_response(handle_detect(request, model, config))


def _serve_stdio(model, config: ServiceConfig):
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    for raw in stdin:
        line = raw.decode("utf-8", errors="replace").strip()
        if not line:
            continue
        stdout.write(handle_line(line, model, config))
        stdout.flush()


def _serve_tcp(model, config: ServiceConfig):
    inference_lock = threading.Lock()

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace").strip()
                if not line:
                    continue
                with inference_lock:
                    payload = handle_line(line, model, config)
                self.wfile.write(payload)
                self.wfile.flush()

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server(("0.0.0.0", config.port), Handler) as server:
        print(f"listening on :{server.server_address[1]}", file=sys.stderr, flush=True)
        server.serve_forever()


def serve(config: ServiceConfig):
    """Run until the input stream closes (stdio) or forever (TCP)."""
    model = build_model(config)
    if config.port is None:
        _serve_stdio(model, config)
    else:
        _serve_tcp(model, config)
