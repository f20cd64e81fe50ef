"""Detection transport layer: bbox/detection records, k-by-k grid tiling of
sampled frames, demultiplexing grid detections back to per-frame results,
and a vocabulary-keyed detection cache.

This module is label-agnostic: matching detector labels against query
labels happens in the search layer.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Protocol, Sequence

from .errors import BackendError, InputError
from .query import normalize_label

__all__ = [
    "BBox",
    "Detection",
    "FrameGrid",
    "DetectorBackend",
    "SizeMismatch",
    "BackendUnavailable",
    "ProtocolError",
    "DetectionCache",
    "build_grid",
    "demux_detections",
    "cached_detect",
]

# Grid-boundary rule: a detection straddling tiles is assigned by bbox
# center, clipped to that tile, and dropped when the clip destroys most
# of it. Bounds double counting across tiles.
MIN_CLIP_AREA_RATIO = 0.25


class SizeMismatch(InputError):
    pass


class BackendUnavailable(BackendError):
    pass


class ProtocolError(BackendError):
    pass


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in corner form, normalized to [0, 1] of its frame."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise InputError(f"degenerate bbox {(self.x0, self.y0, self.x1, self.y1)}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BBox":
        return cls(x, y, x + w, y + h)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return self.x0, self.y0, self.x1 - self.x0, self.y1 - self.y0

    def intersection_area(self, other: "BBox") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return w * h if w > 0 and h > 0 else 0.0


@dataclass(frozen=True)
class Detection:
    frame_index: int
    label: str
    confidence: float
    bbox: BBox

    def __post_init__(self):
        if self.frame_index < 0:
            raise InputError(f"negative frame index {self.frame_index}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class FrameGrid:
    """Row-major assignment of k*k sampled frames to grid tiles."""

    k: int
    frame_indices: tuple[int, ...]
    tile_width: int = 160
    tile_height: int = 120

    def tile_of(self, frame_index: int) -> tuple[int, int]:
        i = self.frame_indices.index(frame_index)
        return divmod(i, self.k)


class DetectorBackend(Protocol):
    """Anything that can detect a label vocabulary on a set of frames.

    Implementations own frame decoding; the search core only passes frame
    indices. Results must be deterministic for identical inputs and
    backend seed. `concurrent_safe` declares whether detect() tolerates
    concurrent calls (the search core itself issues one at a time).
    """

    concurrent_safe: bool

    def detect(
        self, frame_indices: Sequence[int], vocabulary: Sequence[str]
    ) -> list[Detection]: ...


def build_grid(
    frame_indices: Sequence[int],
    k: int,
    tile_width: int = 160,
    tile_height: int = 120,
) -> FrameGrid:
    """Tile (r, c) holds frame_indices[r*k + c]."""
    if k < 1:
        raise SizeMismatch(f"grid size k must be >= 1, got {k}")
    if len(frame_indices) != k * k:
        raise SizeMismatch(
            f"need exactly {k * k} frame indices for a {k}x{k} grid, "
            f"got {len(frame_indices)}"
        )
    if len(set(frame_indices)) != len(frame_indices):
        raise SizeMismatch("grid frame indices must be distinct")
    return FrameGrid(k, tuple(int(i) for i in frame_indices), tile_width, tile_height)


def demux_detections(
    grid: FrameGrid, grid_detections: Sequence[Detection]
) -> dict[int, list[Detection]]:
    """Map detections on the composite grid image back to single frames.

    Each detection goes to the tile containing its bbox center; its bbox is
    clipped to that tile and renormalized to frame coordinates. Detections
    losing more than 75% of their area to the clip are dropped.
    """
    k = grid.k
    out: dict[int, list[Detection]] = {}
    for det in grid_detections:
        cx, cy = det.bbox.center
        col = min(int(cx * k), k - 1)
        row = min(int(cy * k), k - 1)
        tx0, ty0 = col / k, row / k
        tx1, ty1 = (col + 1) / k, (row + 1) / k
        x0 = max(det.bbox.x0, tx0)
        y0 = max(det.bbox.y0, ty0)
        x1 = min(det.bbox.x1, tx1)
        y1 = min(det.bbox.y1, ty1)
        if x1 <= x0 or y1 <= y0:
            continue
        clipped_area = (x1 - x0) * (y1 - y0)
        if clipped_area < MIN_CLIP_AREA_RATIO * det.bbox.area:
            continue
        frame_index = grid.frame_indices[row * k + col]
        frame_bbox = BBox(
            min((x0 - tx0) * k, 1.0),
            min((y0 - ty0) * k, 1.0),
            min((x1 - tx0) * k, 1.0),
            min((y1 - ty0) * k, 1.0),
        )
        out.setdefault(frame_index, []).append(
            Detection(frame_index, det.label, det.confidence, frame_bbox)
        )
    return out


def vocabulary_key(vocabulary: Sequence[str]) -> str:
    """Order-insensitive digest of a normalized vocabulary."""
    joined = "\n".join(sorted({normalize_label(v) for v in vocabulary}))
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


class DetectionCache:
    """Per-session cache of detections keyed by (frame, vocabulary digest).

    Unbounded within a session (entries are tiny relative to video size);
    supports concurrent readers with exclusive writes.
    """

    def __init__(self):
        self._entries: dict[tuple[int, str], tuple[Detection, ...]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, frame_index: int, vocab_key: str) -> tuple[Detection, ...] | None:
        return self._entries.get((frame_index, vocab_key))

    def put(self, frame_index: int, vocab_key: str, detections: Sequence[Detection]):
        with self._lock:
            self._entries[(frame_index, vocab_key)] = tuple(detections)

    def frames(self, vocab_key: str) -> list[int]:
        """All frame indices cached under a vocabulary digest, ascending."""
        return sorted(f for (f, vk) in self._entries if vk == vocab_key)

    def clear(self):
        with self._lock:
            self._entries.clear()


def cached_detect(
    backend: DetectorBackend,
    cache: DetectionCache,
    frame_indices: Sequence[int],
    vocabulary: Sequence[str],
) -> dict[int, list[Detection]]:
    """Detect on the given frames, serving repeats from the cache.

    Cache misses are batched into a single backend call. A changed
    vocabulary is a different cache key, so it forces re-detection.
    """
    if not vocabulary:
        raise InputError("vocabulary must be non-empty")
    vkey = vocabulary_key(vocabulary)
    result: dict[int, list[Detection]] = {}
    misses = []
    for f in frame_indices:
        hit = cache.get(f, vkey)
        if hit is None:
            misses.append(f)
        else:
            result[f] = list(hit)
    if misses:
        fresh: dict[int, list[Detection]] = {f: [] for f in misses}
        for det in backend.detect(misses, vocabulary):
            if det.frame_index not in fresh:
                raise ProtocolError(
                    f"backend returned detection for unrequested frame {det.frame_index}"
                )
            fresh[det.frame_index].append(det)
        for f, dets in fresh.items():
            cache.put(f, vkey, dets)
            result[f] = dets
    return result
