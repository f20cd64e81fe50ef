"""Client side of the detector wire protocol.

Transport is newline-delimited JSON over a byte stream (subprocess pipe or
TCP). Requests name a vocabulary and a batch of frames; frames carry either
a file path or a base64 PNG. When grid compositing is on, the client stacks
frames into a k-by-k image itself, sends the single composite, and
demultiplexes the grid-coordinate detections it gets back.
"""

from __future__ import annotations

import base64
import io
import json
import math
import shlex
import socket
import subprocess
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .detect import (
    BBox,
    Detection,
    BackendUnavailable,
    ProtocolError,
    build_grid,
    demux_detections,
)
from .errors import InputError
from .synth import Scenario, render_frame

__all__ = [
    "FrameSource",
    "ScenarioFrameSource",
    "encode_request",
    "decode_response",
    "PipeDetectorBackend",
    "TcpDetectorBackend",
    "open_backend",
]


class FrameSource(Protocol):
    """Where frames come from; decouples the wire client from decoding."""

    n_frames: int
    fps: float

    def frame_entry(self, index: int) -> dict:
        """Wire payload for one frame: {"path": ...} or {"image_b64": ...}."""
        ...

    def frame_image(self, index: int) -> np.ndarray | None:
        """Raster for grid compositing, or None when unavailable."""
        ...


@dataclass
class ScenarioFrameSource:
    """Treats a scenario file as the video. By default frames are sent as
    path references (enough for scripted services); with send_images the
    rendered raster goes along as a PNG."""

    scenario: Scenario
    path: str
    send_images: bool = False
    render_size: tuple[int, int] = (96, 96)

    @property
    def n_frames(self) -> int:
        return self.scenario.n_frames

    @property
    def fps(self) -> float:
        return self.scenario.fps

    def frame_image(self, index: int) -> np.ndarray:
        w, h = self.render_size
        return render_frame(self.scenario, index, w, h)

    def frame_entry(self, index: int) -> dict:
        if self.send_images:
            return {"index": index, "image_b64": _png_b64(self.frame_image(index))}
        return {"index": index, "path": self.path}


def _png_b64(img: np.ndarray) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_request(
    request_id: str,
    vocabulary: Sequence[str],
    frames: Sequence[dict],
    grid_k: int | None = None,
) -> bytes:
    doc = {
        "id": request_id,
        "vocabulary": list(vocabulary),
        "frames": list(frames),
        "grid_k": grid_k,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_response(line: bytes, expected_id: str) -> list[Detection]:
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"unparseable response line: {exc}") from None
    if not isinstance(doc, dict):
        raise ProtocolError("response is not a JSON object")
    if doc.get("id") != expected_id:
        raise ProtocolError(
            f"response id {doc.get('id')!r} does not match request {expected_id!r}"
        )
    if doc.get("error"):
        raise ProtocolError(f"backend error: {doc['error']}")
    detections = []
    try:
        for item in doc.get("detections", []):
            x0, y0, x1, y1 = (float(v) for v in item["bbox"])
            detections.append(
                Detection(
                    frame_index=int(item["frame_index"]),
                    label=str(item["label"]),
                    confidence=float(item["confidence"]),
                    bbox=BBox(x0, y0, x1, y1),
                )
            )
    except (KeyError, TypeError, ValueError, InputError) as exc:
        raise ProtocolError(f"malformed detection in response: {exc}") from None
    return detections


class _WireBackend:
    """Shared request/response plumbing for both transports."""

    concurrent_safe = False

    def __init__(self, source: FrameSource, grid_k: int | None = None):
        self.source = source
        self.grid_k = grid_k
        self._counter = 0

    # transport hooks
    def _send(self, payload: bytes):  # pragma: no cover - overridden
        raise NotImplementedError

    def _recv(self) -> bytes:  # pragma: no cover - overridden
        raise NotImplementedError

    def _next_id(self) -> str:
        self._counter += 1
        return f"req-{self._counter}"

    def _round_trip(self, vocabulary, frames, grid_k) -> list[Detection]:
        rid = self._next_id()
        self._send(encode_request(rid, vocabulary, frames, grid_k))
        line = self._recv()
        if not line:
            raise BackendUnavailable("backend closed the stream")
        return decode_response(line, rid)

    def detect(self, frame_indices: Sequence[int], vocabulary: Sequence[str]) -> list[Detection]:
        indices = [int(f) for f in frame_indices]
        if self.grid_k is None or self.grid_k <= 1 or len(indices) == 1:
            entries = [self.source.frame_entry(f) for f in indices]
            dets = self._round_trip(vocabulary, entries, None)
            allowed = set(indices)
            for det in dets:
                if det.frame_index not in allowed:
                    raise ProtocolError(
                        f"detection for unrequested frame {det.frame_index}"
                    )
            return dets
        return self._detect_gridded(indices, vocabulary)

    def _detect_gridded(self, indices: list[int], vocabulary) -> list[Detection]:
        """Consume the batch in perfect-square chunks so every request maps
        onto a full k-by-k composite."""
        out: list[Detection] = []
        remaining = list(indices)
        while remaining:
            k = max(1, min(self.grid_k, math.isqrt(len(remaining))))
            chunk, remaining = remaining[: k * k], remaining[k * k:]
            if k == 1:
                out.extend(self.detect(chunk, vocabulary))
                continue
            grid = build_grid(chunk, k)
            tiles = []
            for f in chunk:
                img = self.source.frame_image(f)
                if img is None:
                    raise InputError(
                        "grid compositing needs a frame source that yields images"
                    )
                tiles.append(np.asarray(img, dtype=np.uint8))
            th, tw = tiles[0].shape[:2]
            canvas = np.zeros((th * k, tw * k), dtype=np.uint8)
            for i, tile in enumerate(tiles):
                r, c = divmod(i, k)
                canvas[r * th:(r + 1) * th, c * tw:(c + 1) * tw] = tile
            entry = {"index": chunk[0], "image_b64": _png_b64(canvas)}
            grid_dets = self._round_trip(vocabulary, [entry], k)
            for frame, dets in demux_detections(grid, grid_dets).items():
                out.extend(dets)
        return out

    def close(self):  # pragma: no cover - overridden
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class PipeDetectorBackend(_WireBackend):
    """Talks to a detector subprocess over stdin/stdout."""

    def __init__(self, command: str, source: FrameSource, grid_k: int | None = None):
        super().__init__(source, grid_k)
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot start backend {command!r}: {exc}") from None

    def _send(self, payload: bytes):
        if self._proc.poll() is not None:
            raise BackendUnavailable(
                f"backend process exited with code {self._proc.returncode}"
            )
        try:
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendUnavailable(f"backend pipe broke: {exc}") from None

    def _recv(self) -> bytes:
        line = self._proc.stdout.readline()
        if not line and self._proc.poll() is not None:
            raise BackendUnavailable(
                f"backend process exited with code {self._proc.returncode}"
            )
        return line.rstrip(b"\n")

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class TcpDetectorBackend(_WireBackend):
    """Talks to a detector service over a TCP socket."""

    def __init__(self, host: str, port: int, source: FrameSource, grid_k: int | None = None):
        super().__init__(source, grid_k)
        try:
            self._sock = socket.create_connection((host, port), timeout=60)
        except OSError as exc:
            raise BackendUnavailable(f"cannot reach {host}:{port}: {exc}") from None
        self._reader = self._sock.makefile("rb")

    def _send(self, payload: bytes):
        try:
            self._sock.sendall(payload)
        except OSError as exc:
            raise BackendUnavailable(f"socket send failed: {exc}") from None

    def _recv(self) -> bytes:
        try:
            line = self._reader.readline()
        except OSError as exc:
            raise BackendUnavailable(f"socket read failed: {exc}") from None
        return line.rstrip(b"\n")

    def close(self):
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass


def open_backend(spec: str, source: FrameSource, grid_k: int | None = None):
    """Build a backend from a `pipe:CMD` or `tcp:HOST:PORT` spec string."""
    if spec.startswith("pipe:"):
        return PipeDetectorBackend(spec[len("pipe:"):], source, grid_k)
    if spec.startswith("tcp:"):
        hostport = spec[len("tcp:"):]
        host, _, port = hostport.rpartition(":")
        if not host or not port.isdigit():
            raise InputError(f"tcp backend spec needs HOST:PORT, got {hostport!r}")
        return TcpDetectorBackend(host, int(port), source, grid_k)
    raise InputError(f"unknown backend spec {spec!r} (expected pipe: or tcp:)")
