"""Model backends behind one seam: a callable taking (frame entries,
vocabulary) and returning detection dicts in frame coordinates.

The stub serves scripted detections from a fixture file, which is all that
protocol conformance and integration tests need. Real open-vocabulary
detectors plug in through a dotted-path adapter; anything that maps
(image, labels) to boxes fits.
"""

from __future__ import annotations

import importlib
import json

__all__ = ["FixtureError", "StubModel", "load_adapter"]


class FixtureError(Exception):
    pass


def _check_detection(det: dict) -> dict:
    try:
        frame_index = int(det["frame_index"])
        label = str(det["label"])
        confidence = float(det["confidence"])
        x0, y0, x1, y1 = (float(v) for v in det["bbox"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError(f"malformed detection {det!r}: {exc}") from None
    if not 0.0 <= confidence <= 1.0:
        raise FixtureError(f"confidence {confidence} outside [0, 1]")
    if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
        raise FixtureError(f"bbox {det['bbox']} violates corner ordering")
    return {
        "frame_index": frame_index,
        "label": label,
        "confidence": confidence,
        "bbox": [x0, y0, x1, y1],
    }


class StubModel:
    """Scripted detections keyed by frame index.

    Never touches image bytes, so the whole service can be exercised with
    no model download. For grid requests the fixture author scripts the
    composite-coordinate detections under the composite's frame index.
    """

    def __init__(self, fixture_path: str):
        try:
            with open(fixture_path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise FixtureError(f"cannot load fixture {fixture_path}: {exc}") from None
        self.by_frame: dict[int, list[dict]] = {}
        for det in doc.get("detections", []):
            checked = _check_detection(det)
            self.by_frame.setdefault(checked["frame_index"], []).append(checked)

    def __call__(self, frames: list[dict], vocabulary: list[str]) -> list[dict]:
        vocab = {" ".join(v.split()).casefold() for v in vocabulary}
        out = []
        for entry in frames:
            for det in self.by_frame.get(entry["index"], []):
                if " ".join(det["label"].split()).casefold() in vocab:
                    out.append(det)
        return out


def load_adapter(spec: str, device: str):
    """Import `module.path:factory` and call it with the device selector.

    The factory must return a callable with the StubModel signature."""
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise FixtureError(f"model spec {spec!r} must look like module.path:factory")
    try:
        module = importlib.import_module(module_name)
        factory = getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise FixtureError(f"cannot load model adapter {spec!r}: {exc}") from None
    return factory(device=device)
