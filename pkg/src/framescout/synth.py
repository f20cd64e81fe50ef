"""Deterministic synthetic video scenarios.

A scenario is a scripted set of object tracks (presence intervals plus
interpolated boxes) standing in for a real video: the JSON file IS the
video at desk scale. It drives an oracle detector backend, a flat-shaded
frame renderer for image metrics, and an exhaustive reference searcher.

Templates embed exactly one kind of relation event and surround it with
distractors: extra appearances of the key object that lack the relation,
so detection-only ranking is confusable while relation checks are not.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .detect import BBox, Detection
from .errors import InputError
from .query import (
    QuerySpec,
    RelationTriplet,
    RelationType,
    WeightedObject,
    normalize_label,
    query_from_json,
    query_to_json,
)

__all__ = [
    "ObjectTrack",
    "ScenarioQuery",
    "Scenario",
    "ScenarioTemplate",
    "InfeasibleTemplate",
    "TooLarge",
    "TEMPLATE_KINDS",
    "generate_scenario",
    "oracle_detect",
    "OracleBackend",
    "render_frame",
    "brute_force_search",
    "scenario_to_json",
    "scenario_from_json",
    "load_scenario",
    "save_scenario",
]

TEMPLATE_KINDS = ("spatial", "attribute", "time", "causal", "mixed", "adversarial_empty")

BRUTE_FORCE_MAX_FRAMES = 5000


class InfeasibleTemplate(InputError):
    pass


class TooLarge(InputError):
    pass


@dataclass(frozen=True)
class ObjectTrack:
    """One object's scripted life: when it is on screen, where, and how
    confidently a detector would report it."""

    label: str
    intervals: tuple[tuple[int, int], ...]  # inclusive (start, end) frames
    bbox_keys: tuple[tuple[int, BBox], ...]  # (frame, box), piecewise linear
    confidence: float = 0.85
    jitter: float = 0.0

    def __post_init__(self):
        last_end = -1
        for start, end in self.intervals:
            if start > end:
                raise InputError(f"track {self.label!r}: interval {start}>{end}")
            if start <= last_end:
                raise InputError(f"track {self.label!r}: overlapping intervals")
            last_end = end
        if self.intervals and not self.bbox_keys:
            raise InputError(f"track {self.label!r}: needs at least one bbox keypoint")
        if not 0.0 < self.confidence - self.jitter:
            raise InputError(
                f"track {self.label!r}: confidence {self.confidence} minus "
                f"jitter {self.jitter} must stay positive"
            )
        object.__setattr__(
            self, "bbox_keys", tuple(sorted(self.bbox_keys, key=lambda kv: kv[0]))
        )

    def covers(self, frame: int) -> bool:
        return any(start <= frame <= end for start, end in self.intervals)

    def bbox_at(self, frame: int) -> BBox:
        keys = self.bbox_keys
        if len(keys) == 1:
            return keys[0][1]
        frames = [k for k, _ in keys]
        coords = []
        for i in range(4):
            values = [(b.x0, b.y0, b.x1, b.y1)[i] for _, b in keys]
            coords.append(float(np.interp(frame, frames, values)))
        return BBox(*coords)


@dataclass(frozen=True)
class ScenarioQuery:
    spec: QuerySpec
    gt_keyframes: tuple[int, ...]


@dataclass(frozen=True)
class Scenario:
    n_frames: int
    fps: float
    seed: int
    tracks: tuple[ObjectTrack, ...]
    distractor_tracks: tuple[ObjectTrack, ...] = ()
    queries: tuple[ScenarioQuery, ...] = ()

    def __post_init__(self):
        if self.n_frames < 1:
            raise InputError("scenario needs at least one frame")
        track_labels = {normalize_label(t.label) for t in self.all_tracks}
        for q in self.queries:
            for f in q.gt_keyframes:
                if not 0 <= f < self.n_frames:
                    raise InputError(f"gt keyframe {f} outside [0, {self.n_frames})")
            for rel in q.spec.relations:
                for endpoint in (rel.subject, rel.object):
                    if normalize_label(endpoint) not in track_labels:
                        raise InputError(
                            f"relation endpoint {endpoint!r} has no track in the scenario"
                        )

    @property
    def all_tracks(self) -> tuple[ObjectTrack, ...]:
        return self.tracks + self.distractor_tracks

    @property
    def duration_seconds(self) -> float:
        return self.n_frames / self.fps


def _jitter_draw(seed: int, frame: int, label: str) -> float:
    """Uniform in [-1, 1), keyed by (seed, frame, label) so detections are
    reproducible regardless of call order or caching."""
    digest = hashlib.sha256(
        f"{seed}|{frame}|{normalize_label(label)}".encode("utf-8")
    ).digest()
    u = int.from_bytes(digest[:8], "big") / float(1 << 64)
    return 2.0 * u - 1.0


def oracle_detect(scenario: Scenario, frames, vocabulary) -> list[Detection]:
    """Scripted detections: every track covering the frame whose label is in
    the vocabulary yields one detection with a seeded confidence wobble."""
    vocab = {normalize_label(v) for v in vocabulary}
    out = []
    for frame in frames:
        frame = int(frame)
        if not 0 <= frame < scenario.n_frames:
            raise InputError(f"frame {frame} outside [0, {scenario.n_frames})")
        for track in scenario.all_tracks:
            if normalize_label(track.label) not in vocab or not track.covers(frame):
                continue
            conf = track.confidence + track.jitter * _jitter_draw(
                scenario.seed, frame, track.label
            )
            conf = min(1.0, max(1e-9, conf))
            out.append(Detection(frame, track.label, conf, track.bbox_at(frame)))
    return out


class OracleBackend:
    """DetectorBackend over a scenario; pure, so concurrency-safe."""

    concurrent_safe = True

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def detect(self, frame_indices, vocabulary) -> list[Detection]:
        return oracle_detect(self.scenario, frame_indices, vocabulary)


def render_frame(scenario: Scenario, frame: int, width: int = 96, height: int = 96) -> np.ndarray:
    """Flat grayscale raster: mid-gray background, one distinct gray level
    per label, filled rectangles at the interpolated track boxes."""
    if not 0 <= frame < scenario.n_frames:
        raise InputError(f"frame {frame} outside [0, {scenario.n_frames})")
    labels = []
    for track in scenario.all_tracks:
        if track.label not in labels:
            labels.append(track.label)
    levels = {}
    for i, label in enumerate(labels):
        level = int(round(30 + 210 * (i / max(1, len(labels) - 1)))) if len(labels) > 1 else 30
        if level == 127:
            level = 128
        levels[label] = level
    img = np.full((height, width), 127, dtype=np.uint8)
    for track in scenario.all_tracks:
        if not track.covers(frame):
            continue
        b = track.bbox_at(frame)
        x0, x1 = int(round(b.x0 * width)), int(round(b.x1 * width))
        y0, y1 = int(round(b.y0 * height)), int(round(b.y1 * height))
        x1 = min(width, max(x1, x0 + 1))
        y1 = min(height, max(y1, y0 + 1))
        img[y0:y1, x0:x1] = levels[track.label]
    return img


def frame_labels(scenario: Scenario, frame: int) -> frozenset[str]:
    """Normalized labels of all tracks on screen at a frame (ground truth,
    not detections); the label-set similarity metrics feed on this."""
    return frozenset(
        normalize_label(t.label) for t in scenario.all_tracks if t.covers(frame)
    )


# --------------------------------------------------------------------------
# Template-driven generation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioTemplate:
    """Recipe for one scripted relation event plus its distractors."""

    kind: str = "spatial"
    n_frames: int = 480
    fps: float = 1.0
    event_length: int = 10
    distractor_count: int = 3
    margin: int = 10  # dead space around windows; must exceed the pair window
    noise: float = 0.05  # confidence jitter amplitude
    base_confidence: float = 0.85
    cue_confidence: float = 0.80
    pair_window: int = 5  # must match the search config's delta_t

    def __post_init__(self):
        if self.kind not in TEMPLATE_KINDS:
            raise InputError(f"unknown template kind {self.kind!r}")
        if self.event_length < 1 or self.n_frames < 1:
            raise InputError("event_length and n_frames must be >= 1")
        if self.margin <= self.pair_window:
            raise InputError("margin must exceed pair_window to isolate windows")


_SUBJECT_BOX = BBox(0.10, 0.20, 0.38, 0.82)
_OBJECT_BOX = BBox(0.58, 0.30, 0.90, 0.72)
_INNER_BOX = BBox(0.14, 0.30, 0.30, 0.62)  # nested in _SUBJECT_BOX, overlap ratio 1

_TEMPLATE_LABELS = {
    "spatial": ("person", "vase"),
    "attribute": ("person", "red shirt"),
    "time": ("dog", "cat"),
    "causal": ("cup", "puddle"),
}

_TEMPLATE_QUESTIONS = {
    "spatial": "When does the {0} appear next to the {1}?",
    "attribute": "When is the {0} wearing the {1} visible?",
    "time": "When does the {1} show up right after the {0}?",
    "causal": "What happens after the {0} falls and leaves a {1}?",
}


def _static_track(label, start, end, box, conf, jitter) -> ObjectTrack:
    return ObjectTrack(
        label=label,
        intervals=((start, end),),
        bbox_keys=((start, box), (end, box)),
        confidence=conf,
        jitter=jitter,
    )


def _merge_tracks(tracks: list[ObjectTrack]) -> list[ObjectTrack]:
    """Fuse same-label same-box tracks into one multi-interval track."""
    merged: dict[tuple, ObjectTrack] = {}
    for t in tracks:
        key = (t.label, t.bbox_keys[0][1], t.confidence, t.jitter)
        if key in merged:
            prev = merged[key]
            intervals = tuple(sorted(prev.intervals + t.intervals))
            keys = tuple(sorted(prev.bbox_keys + t.bbox_keys, key=lambda kv: kv[0]))
            merged[key] = replace(prev, intervals=intervals, bbox_keys=keys)
        else:
            merged[key] = t
    return list(merged.values())


def _pick_slots(template: ScenarioTemplate, rng, n_needed: int, slot_len: int) -> list[int]:
    """Starting frames of n_needed disjoint windows, each padded by margin."""
    stride = slot_len + 2 * template.margin
    n_slots = template.n_frames // stride
    if n_slots < n_needed:
        raise InfeasibleTemplate(
            f"{template.kind}: need {n_needed} windows of {stride} frames, "
            f"only {n_slots} fit in {template.n_frames} frames"
        )
    chosen = rng.choice(n_slots, size=n_needed, replace=False)
    return [int(s) * stride + template.margin for s in sorted(chosen)]


def _template_rng(template: ScenarioTemplate, seed: int):
    kind_salt = int.from_bytes(
        hashlib.sha256(template.kind.encode()).digest()[:4], "big"
    )
    return np.random.default_rng([seed, kind_salt, template.n_frames])


def generate_scenario(template: ScenarioTemplate, seed: int) -> Scenario:
    """Deterministic for (template, seed). The designated relation is
    satisfiable only on the returned gt keyframes; this is asserted by
    re-deriving the satisfying set from the generated tracks."""
    if template.kind == "adversarial_empty":
        return _generate_adversarial(template, seed)
    if template.kind == "mixed":
        return _generate_mixed(template, seed)

    rng = _template_rng(template, seed)
    L = template.event_length
    d = template.distractor_count
    subj, obj = _TEMPLATE_LABELS[template.kind]
    conf, cue_conf, noise = template.base_confidence, template.cue_confidence, template.noise

    tracks: list[ObjectTrack] = []
    distractors: list[ObjectTrack] = []

    if template.kind in ("spatial", "attribute"):
        n_cooccur = d if template.kind == "attribute" else 0
        starts = _pick_slots(template, rng, 2 + d + n_cooccur, L)
        order = rng.permutation(len(starts))
        slots = [starts[i] for i in order]
        event = slots.pop()
        obj_alone = slots.pop()
        cooccur = [slots.pop() for _ in range(n_cooccur)]
        subj_alone = slots

        obj_event_box = _INNER_BOX if template.kind == "attribute" else _OBJECT_BOX
        tracks.append(_static_track(subj, event, event + L - 1, _SUBJECT_BOX, conf, noise))
        tracks.append(_static_track(obj, event, event + L - 1, obj_event_box, cue_conf, noise))
        tracks.append(_static_track(obj, obj_alone, obj_alone + L - 1, _OBJECT_BOX, cue_conf, noise))
        for s in subj_alone:
            distractors.append(_static_track(subj, s, s + L - 1, _SUBJECT_BOX, conf, noise))
        for s in cooccur:
            # both labels on screen but boxes disjoint: co-occurrence without
            # the attribute overlap, the confusable case
            distractors.append(_static_track(subj, s, s + L - 1, _SUBJECT_BOX, conf, noise))
            distractors.append(_static_track(obj, s, s + L - 1, _OBJECT_BOX, cue_conf, noise))
        gt = tuple(range(event, event + L))

    elif template.kind == "time":
        n_a = (d + 1) // 2
        n_b = d - n_a
        starts = _pick_slots(template, rng, 1 + d, 2 * L)
        order = rng.permutation(len(starts))
        slots = [starts[i] for i in order]
        event = slots.pop()
        a_alone = [slots.pop() for _ in range(n_a)]
        b_alone = slots
        tracks.append(_static_track(subj, event, event + L - 1, _SUBJECT_BOX, conf, noise))
        tracks.append(_static_track(obj, event + L, event + 2 * L - 1, _OBJECT_BOX, cue_conf, noise))
        for s in a_alone:
            distractors.append(_static_track(subj, s, s + L - 1, _SUBJECT_BOX, conf, noise))
        for s in b_alone:
            distractors.append(_static_track(obj, s, s + L - 1, _OBJECT_BOX, cue_conf, noise))
        # participants: subject frames with an object frame inside the pair
        # window ahead of them, and object frames with one behind
        w = template.pair_window
        first = tuple(range(max(event, event + L - w + 1), event + L))
        second = tuple(range(event + L, min(event + 2 * L, event + L + w - 1)))
        gt = first + second

    elif template.kind == "causal":
        n_b_early = (d + 1) // 2
        n_a_late = d - n_b_early
        starts = _pick_slots(template, rng, 2 + d, L)
        # role by temporal order: stray effects first, then cause, then
        # effect, then stray causes -- keeps the ordering constraint clean
        b_early = starts[:n_b_early]
        a_event = starts[n_b_early]
        b_event = starts[n_b_early + 1]
        a_late = starts[n_b_early + 2:]
        tracks.append(_static_track(subj, a_event, a_event + L - 1, _SUBJECT_BOX, conf, noise))
        tracks.append(_static_track(obj, b_event, b_event + L - 1, _OBJECT_BOX, cue_conf, noise))
        for s in b_early:
            distractors.append(_static_track(obj, s, s + L - 1, _OBJECT_BOX, cue_conf, noise))
        for s in a_late:
            distractors.append(_static_track(subj, s, s + L - 1, _SUBJECT_BOX, conf, noise))
        gt = tuple(range(a_event, a_event + L)) + tuple(range(b_event, b_event + L))

    else:  # pragma: no cover
        raise InfeasibleTemplate(f"unhandled kind {template.kind!r}")

    rel_type = RelationType(template.kind)
    # a causal question asks about the effect as much as the cause, so both
    # endpoints are key objects there; elsewhere the object is context
    obj_role = ("key", 1.0) if template.kind == "causal" else ("cue", 0.5)
    spec = QuerySpec(
        question=_TEMPLATE_QUESTIONS[template.kind].format(subj, obj),
        objects=(
            WeightedObject(subj, 1.0, "key"),
            WeightedObject(obj, obj_role[1], obj_role[0]),
        ),
        relations=(RelationTriplet(subj, rel_type, obj),),
    )
    scenario = Scenario(
        n_frames=template.n_frames,
        fps=template.fps,
        seed=seed,
        tracks=tuple(_merge_tracks(tracks)),
        distractor_tracks=tuple(_merge_tracks(distractors)),
        queries=(ScenarioQuery(spec, tuple(sorted(gt))),),
    )
    _assert_relation_isolated(scenario, spec.relations[0], gt, template.pair_window)
    return scenario


def _generate_mixed(template: ScenarioTemplate, seed: int) -> Scenario:
    """Two relation events (spatial + attribute) sharing one key object."""
    rng = _template_rng(template, seed)
    L = template.event_length
    d = template.distractor_count
    conf, cue_conf, noise = template.base_confidence, template.cue_confidence, template.noise
    starts = _pick_slots(template, rng, 3 + d, L)
    order = rng.permutation(len(starts))
    slots = [starts[i] for i in order]
    spatial_event = slots.pop()
    attr_event = slots.pop()
    obj_alone = slots.pop()

    tracks = [
        _static_track("person", spatial_event, spatial_event + L - 1, _SUBJECT_BOX, conf, noise),
        _static_track("vase", spatial_event, spatial_event + L - 1, _OBJECT_BOX, cue_conf, noise),
        _static_track("person", attr_event, attr_event + L - 1, _SUBJECT_BOX, conf, noise),
        _static_track("red shirt", attr_event, attr_event + L - 1, _INNER_BOX, cue_conf, noise),
        _static_track("vase", obj_alone, obj_alone + L - 1, _OBJECT_BOX, cue_conf, noise),
    ]
    distractors = [
        _static_track("person", s, s + L - 1, _SUBJECT_BOX, conf, noise) for s in slots
    ]
    spec = QuerySpec(
        question="When is the person in the red shirt near the vase?",
        objects=(
            WeightedObject("person", 1.0, "key"),
            WeightedObject("vase", 0.5, "cue"),
            WeightedObject("red shirt", 0.5, "cue"),
        ),
        relations=(
            RelationTriplet("person", RelationType.SPATIAL, "vase"),
            RelationTriplet("person", RelationType.ATTRIBUTE, "red shirt"),
        ),
    )
    gt = tuple(sorted(
        list(range(spatial_event, spatial_event + L))
        + list(range(attr_event, attr_event + L))
    ))
    scenario = Scenario(
        n_frames=template.n_frames,
        fps=template.fps,
        seed=seed,
        tracks=tuple(_merge_tracks(tracks)),
        distractor_tracks=tuple(_merge_tracks(distractors)),
        queries=(ScenarioQuery(spec, gt),),
    )
    for rel, rel_gt in (
        (spec.relations[0], range(spatial_event, spatial_event + L)),
        (spec.relations[1], range(attr_event, attr_event + L)),
    ):
        _assert_relation_isolated(scenario, rel, tuple(rel_gt), template.pair_window)
    return scenario


def _generate_adversarial(template: ScenarioTemplate, seed: int) -> Scenario:
    """No query label is ever on screen: exercises termination paths."""
    rng = _template_rng(template, seed)
    L = template.event_length
    starts = _pick_slots(template, rng, max(1, template.distractor_count), L)
    decoys = [
        _static_track("bench", s, s + L - 1, _OBJECT_BOX,
                      template.cue_confidence, template.noise)
        for s in starts
    ]
    spec = QuerySpec(
        question="When does the unicorn gallop past the rainbow?",
        objects=(
            WeightedObject("unicorn", 1.0, "key"),
            WeightedObject("rainbow", 0.5, "cue"),
        ),
        relations=(RelationTriplet("unicorn", RelationType.SPATIAL, "rainbow"),),
    )
    # query labels exist as tracks but never appear on screen
    ghost = [
        ObjectTrack("unicorn", (), (), template.base_confidence, 0.0),
        ObjectTrack("rainbow", (), (), template.cue_confidence, 0.0),
    ]
    return Scenario(
        n_frames=template.n_frames,
        fps=template.fps,
        seed=seed,
        tracks=tuple(ghost),
        distractor_tracks=tuple(_merge_tracks(decoys)),
        queries=(ScenarioQuery(spec, ()),),
    )


def _presence(scenario: Scenario, label: str) -> list[int]:
    wanted = normalize_label(label)
    return [
        f
        for f in range(scenario.n_frames)
        if any(
            normalize_label(t.label) == wanted and t.covers(f)
            for t in scenario.all_tracks
        )
    ]


def _assert_relation_isolated(scenario, rel: RelationTriplet, gt, pair_window: int):
    """Generator self-check: satisfying frames == gt, derived from track
    truth rather than the generator's bookkeeping."""
    subj_frames = _presence(scenario, rel.subject)
    obj_frames = _presence(scenario, rel.object)
    satisfied: set[int] = set()
    if rel.rel_type in (RelationType.SPATIAL, RelationType.ATTRIBUTE):
        both = set(subj_frames) & set(obj_frames)
        for f in both:
            if rel.rel_type is RelationType.SPATIAL:
                satisfied.add(f)
                continue
            boxes_s = [t.bbox_at(f) for t in scenario.all_tracks
                       if normalize_label(t.label) == normalize_label(rel.subject) and t.covers(f)]
            boxes_o = [t.bbox_at(f) for t in scenario.all_tracks
                       if normalize_label(t.label) == normalize_label(rel.object) and t.covers(f)]
            for bs in boxes_s:
                for bo in boxes_o:
                    inter = bs.intersection_area(bo)
                    if inter / min(bs.area, bo.area) > 0.5:
                        satisfied.add(f)
    elif rel.rel_type is RelationType.TIME:
        obj_arr = np.asarray(obj_frames)
        subj_arr = np.asarray(subj_frames)
        for ti in subj_frames:
            if np.any((obj_arr >= ti) & (obj_arr < ti + pair_window)):
                satisfied.add(ti)
        for tj in obj_frames:
            if np.any((subj_arr <= tj) & (subj_arr > tj - pair_window)):
                satisfied.add(tj)
    elif rel.rel_type is RelationType.CAUSAL:
        if subj_frames and obj_frames:
            last_obj, first_subj = max(obj_frames), min(subj_frames)
            satisfied.update(f for f in subj_frames if f < last_obj)
            satisfied.update(f for f in obj_frames if f > first_subj)
    if satisfied != set(gt):
        raise InfeasibleTemplate(
            f"template self-check failed for {rel.rel_type.value}: satisfying "
            f"frames {sorted(satisfied)} != gt {sorted(gt)}"
        )


# --------------------------------------------------------------------------
# Reference searcher
# --------------------------------------------------------------------------

def brute_force_search(scenario: Scenario, query: QuerySpec, cfg, top_k: int):
    """Exhaustive reference: detect every frame, score with full knowledge,
    no sampling, no diffusion. Desk-scale only."""
    from .search import SearchResult, base_score, relation_participants

    if scenario.n_frames > BRUTE_FORCE_MAX_FRAMES:
        raise TooLarge(
            f"{scenario.n_frames} frames exceeds the exhaustive-search limit "
            f"of {BRUTE_FORCE_MAX_FRAMES}"
        )
    vocab = query.vocabulary()
    dets_by_frame: dict[int, list[Detection]] = {f: [] for f in range(scenario.n_frames)}
    for det in oracle_detect(scenario, range(scenario.n_frames), vocab):
        dets_by_frame[det.frame_index].append(det)

    scores = np.zeros(scenario.n_frames)
    for f in range(scenario.n_frames):
        scores[f] = base_score(dets_by_frame[f], query)
    if getattr(cfg, "relations_enabled", True):
        for rel in query.relations:
            bonus = cfg.alpha * cfg.gamma_for(rel.rel_type)
            if bonus == 0.0:
                continue
            for f in relation_participants(rel, dets_by_frame, cfg):
                scores[f] += bonus

    order = sorted(range(scenario.n_frames), key=lambda f: (-scores[f], f))
    keyframes = [(f, float(scores[f])) for f in order[:top_k]]
    return SearchResult(
        keyframes=tuple(keyframes),
        iterations_used=1,
        frames_detected=scenario.n_frames,
        trace=(),
    ), scores


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def _track_to_json(t: ObjectTrack) -> dict:
    return {
        "label": t.label,
        "intervals": [[s, e] for s, e in t.intervals],
        "bbox_keys": [[f, [b.x0, b.y0, b.x1, b.y1]] for f, b in t.bbox_keys],
        "conf": t.confidence,
        "jitter": t.jitter,
    }


def _track_from_json(doc: dict) -> ObjectTrack:
    return ObjectTrack(
        label=doc["label"],
        intervals=tuple((int(s), int(e)) for s, e in doc["intervals"]),
        bbox_keys=tuple((int(f), BBox(*map(float, b))) for f, b in doc["bbox_keys"]),
        confidence=float(doc.get("conf", 0.85)),
        jitter=float(doc.get("jitter", 0.0)),
    )


def scenario_to_json(scenario: Scenario) -> dict:
    return {
        "n_frames": scenario.n_frames,
        "fps": scenario.fps,
        "seed": scenario.seed,
        "tracks": [_track_to_json(t) for t in scenario.tracks],
        "distractor_tracks": [_track_to_json(t) for t in scenario.distractor_tracks],
        "queries": [
            {"spec": query_to_json(q.spec), "gt_keyframes": list(q.gt_keyframes)}
            for q in scenario.queries
        ],
    }


def scenario_from_json(doc: dict) -> Scenario:
    try:
        return Scenario(
            n_frames=int(doc["n_frames"]),
            fps=float(doc["fps"]),
            seed=int(doc.get("seed", 0)),
            tracks=tuple(_track_from_json(t) for t in doc.get("tracks", [])),
            distractor_tracks=tuple(
                _track_from_json(t) for t in doc.get("distractor_tracks", [])
            ),
            queries=tuple(
                ScenarioQuery(
                    query_from_json(q["spec"]),
                    tuple(int(f) for f in q.get("gt_keyframes", [])),
                )
                for q in doc.get("queries", [])
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed scenario JSON: {exc}") from None


def save_scenario(scenario: Scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_json(scenario), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"scenario file {path} is not valid JSON: {exc}") from None
    return scenario_from_json(doc)
