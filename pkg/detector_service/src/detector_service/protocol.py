"""Request parsing and canonical response serialization.

One JSON object per line in both directions. Responses are serialized with
sorted keys and compact separators so their byte layout is stable enough
to freeze in golden tests.
"""

from __future__ import annotations

import json

__all__ = [
    "ProtocolViolation",
    "parse_request",
    "extract_request_id",
    "make_response",
    "serialize_response",
]


class ProtocolViolation(Exception):
    """A request the service can answer only with an error response."""


def extract_request_id(line: str) -> str:
    """Best-effort id for error responses; "unknown" when the line does
    not even parse."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError:
        return "unknown"
    if isinstance(doc, dict) and isinstance(doc.get("id"), str) and doc["id"]:
        return doc["id"]
    return "unknown"


def parse_request(line: str) -> dict:
    """Validate one request line into {id, vocabulary, frames, grid_k}."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"unparseable request: {exc}") from None
    if not isinstance(doc, dict):
        raise ProtocolViolation("request must be a JSON object")
    request_id = doc.get("id")
    if not isinstance(request_id, str) or not request_id:
        raise ProtocolViolation("missing field: id")
    vocabulary = doc.get("vocabulary")
    if vocabulary is None:
        raise ProtocolViolation("missing field: vocabulary")
    if not isinstance(vocabulary, list) or not all(
        isinstance(v, str) for v in vocabulary
    ):
        raise ProtocolViolation("vocabulary must be a list of strings")
    if not vocabulary:
        raise ProtocolViolation("vocabulary must be non-empty")
    frames = doc.get("frames")
    if not isinstance(frames, list):
        raise ProtocolViolation("missing field: frames")
    for entry in frames:
        if not isinstance(entry, dict) or not isinstance(entry.get("index"), int):
            raise ProtocolViolation("every frame needs an integer index")
        if entry["index"] < 0:
            raise ProtocolViolation(f"negative frame index {entry['index']}")
        if not isinstance(entry.get("image_b64"), str) and not isinstance(
            entry.get("path"), str
        ):
            raise ProtocolViolation(
                f"frame {entry['index']} needs an image_b64 or path field"
            )
    grid_k = doc.get("grid_k")
    if grid_k is not None and (not isinstance(grid_k, int) or grid_k < 1):
        raise ProtocolViolation("grid_k must be a positive integer or null")
    return {
        "id": request_id,
        "vocabulary": vocabulary,
        "frames": frames,
        "grid_k": grid_k,
    }


def make_response(request_id: str, detections: list[dict], error: str | None) -> dict:
    return {"id": request_id, "detections": detections, "error": error}


def serialize_response(response: dict) -> bytes:
    return (
        json.dumps(response, sort_keys=True, separators=(",", ":")).encode("utf-8")
        + b"\n"
    )
