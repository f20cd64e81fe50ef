"""Iterative relation-guided keyframe search.

Each iteration samples a grid's worth of frames from a probability
distribution over the video, detects the query vocabulary on them, scores
every sampled frame by its best weighted detection, adds bonuses for
frames that verify the query's relation triplets, folds the result into a
global score registry, diffuses scores to temporal neighbors, and rebuilds
the sampling distribution from the registry. The loop stops when the
sampling budget is spent, every key object has been confidently located,
or the iteration cap for the video's duration is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .detect import Detection, DetectionCache, DetectorBackend, cached_detect
from .errors import InputError
from .query import QuerySpec, RelationTriplet, RelationType, normalize_label, validate_query

__all__ = [
    "SearchConfig",
    "SearchState",
    "SearchResult",
    "IterationRecord",
    "EmptyVideo",
    "iteration_cap",
    "init_state",
    "choose_grid_size",
    "sample_frames",
    "base_score",
    "check_spatial",
    "check_attribute",
    "check_time_pairs",
    "check_causal_pairs",
    "relation_participants",
    "apply_relation_bonuses",
    "commit_scores",
    "diffuse_scores",
    "refresh_distribution",
    "mark_found",
    "top_keyframes",
    "run_search",
]

P_FLOOR = 1e-6  # spline output is clamped here before normalization


class EmptyVideo(InputError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the search loop.

    alpha scales every relation bonus; the per-kind gamma weights say how
    much each relation type is worth. tau is the box-overlap threshold for
    attribute checks, delta_t the frame window for time pairs. budget
    defaults to one sampling unit per video frame when left at None."""

    top_k: int = 8
    alpha: float = 0.3
    gamma_spatial: float = 0.5
    gamma_attribute: float = 0.5
    gamma_time: float = 0.5
    gamma_causal: float = 0.5
    tau: float = 0.5
    delta_t: int = 5
    diffusion_window: int = 5
    diffusion_kernel: str = "inverse_distance"  # or "gaussian"
    diffusion_sigma: float = 2.0
    sampler: str = "score_proportional"  # or "thompson"
    thompson_alpha0: float = 1.0
    thompson_beta0: float = 1.0
    k_max: int = 8
    found_threshold: float = 0.6
    budget: int | None = None  # None: one unit per video frame
    relations_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("alpha", "gamma_spatial", "gamma_attribute", "gamma_time",
                     "gamma_causal", "tau", "found_threshold", "diffusion_sigma"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"config {name} must be finite")
        if self.top_k < 1:
            raise InputError("top_k must be >= 1")
        if not 0.0 < self.tau < 1.0:
            raise InputError("tau must be in (0, 1)")
        if self.diffusion_window < 0:
            raise InputError("diffusion_window must be >= 0")
        if self.k_max < 1:
            raise InputError("k_max must be >= 1")
        if self.diffusion_kernel not in ("inverse_distance", "gaussian"):
            raise InputError(f"unknown diffusion kernel {self.diffusion_kernel!r}")
        if self.sampler not in ("score_proportional", "thompson"):
            raise InputError(f"unknown sampler {self.sampler!r}")
        if self.budget is not None and self.budget < 1:
            raise InputError("budget override must be >= 1")

    def gamma_for(self, rel_type: RelationType) -> float:
        return {
            RelationType.SPATIAL: self.gamma_spatial,
            RelationType.ATTRIBUTE: self.gamma_attribute,
            RelationType.TIME: self.gamma_time,
            RelationType.CAUSAL: self.gamma_causal,
        }[rel_type]

    def with_gamma(self, value: float) -> "SearchConfig":
        return replace(
            self,
            gamma_spatial=value,
            gamma_attribute=value,
            gamma_time=value,
            gamma_causal=value,
        )


def iteration_cap(duration_seconds: float) -> int:
    """Hard stop: a tenth of the duration in seconds, at most 1000, and at
    least 1 so very short videos still get one look."""
    return max(1, min(1000, int(0.1 * duration_seconds)))


@dataclass
class SearchState:
    """Mutable per-session state; never shared across sessions."""

    n_frames: int
    p: np.ndarray  # sampling distribution, sums to 1
    scores: np.ndarray  # global registry S (diffusion may raise entries)
    committed: np.ndarray  # last committed value per frame: base + bonuses
    known: np.ndarray  # bool: frame was committed or diffused-to
    visited: np.ndarray  # bool: frame was committed at least once
    visit_count: np.ndarray  # reset to 0 on commit, +1 otherwise
    obs_count: np.ndarray  # number of commits, feeds the thompson sampler
    budget: int
    remaining_key_objects: set[str]  # normalized labels
    applied_bonuses: set[tuple[int, int]]  # (frame, relation index)
    iteration: int
    iteration_limit: int
    rng: np.random.Generator


@dataclass(frozen=True)
class IterationRecord:
    """One completed iteration, enough to replay the run offline.

    Carries full registry and distribution snapshots, so memory grows with
    n_frames * iterations; sized for desk-scale videos. The CSV exporter
    strides these down for anything bigger."""

    iteration: int
    sampled: tuple[int, ...]
    scores: dict[int, float]  # committed values for the sampled frames
    patched: dict[int, float]  # late relation bonuses on older frames
    touched: tuple[int, ...]  # every frame whose registry value changed
    registry_after: np.ndarray
    p_after: np.ndarray
    remaining_key_objects: frozenset[str]


@dataclass(frozen=True)
class SearchResult:
    keyframes: tuple[tuple[int, float], ...]  # (frame, score), best first
    iterations_used: int
    frames_detected: int
    trace: tuple[IterationRecord, ...]


def init_state(
    n_frames: int, duration_seconds: float, query: QuerySpec, cfg: SearchConfig
) -> SearchState:
    if n_frames < 1:
        raise EmptyVideo("video has no frames")
    budget = n_frames if cfg.budget is None else int(cfg.budget)
    return SearchState(
        n_frames=n_frames,
        p=np.full(n_frames, 1.0 / n_frames),
        scores=np.zeros(n_frames),
        committed=np.zeros(n_frames),
        known=np.zeros(n_frames, dtype=bool),
        visited=np.zeros(n_frames, dtype=bool),
        visit_count=np.zeros(n_frames, dtype=np.int64),
        obs_count=np.zeros(n_frames, dtype=np.int64),
        budget=budget,
        remaining_key_objects={normalize_label(o.label) for o in query.key_objects},
        applied_bonuses=set(),
        iteration=0,
        iteration_limit=iteration_cap(duration_seconds),
        rng=np.random.default_rng(cfg.seed),
    )


def choose_grid_size(state: SearchState, cfg: SearchConfig) -> int:
    """Grid side length: sqrt of the remaining budget, clamped by the
    detector-friendly maximum and by how many frames are still unvisited."""
    unvisited = state.n_frames - int(state.visited.sum())
    k = min(math.isqrt(max(0, state.budget)), cfg.k_max, math.isqrt(unvisited))
    return max(1, k)


def sample_frames(state: SearchState, k: int) -> list[int]:
    """Draw k*k distinct frames without replacement, proportional to the
    current distribution; k shrinks if fewer frames carry positive mass."""
    positive = int(np.count_nonzero(state.p > 0.0))
    while k > 1 and k * k > positive:
        k -= 1
    drawn = state.rng.choice(
        state.n_frames, size=k * k, replace=False, p=state.p
    )
    return sorted(int(f) for f in drawn)


def base_score(detections: Sequence[Detection], query: QuerySpec) -> float:
    """Best weighted detection on a frame: max over matches of confidence
    times the matched query object's weight; 0 when nothing matches."""
    best = 0.0
    for det in detections:
        weight = query.weight_of(det.label)
        if weight is not None:
            best = max(best, det.confidence * weight)
    return best


def _detected_labels(detections: Iterable[Detection]) -> set[str]:
    return {normalize_label(d.label) for d in detections}


def check_spatial(rel: RelationTriplet, frame_detections: Sequence[Detection]) -> bool:
    """Co-occurrence: both endpoints detected in the same frame."""
    labels = _detected_labels(frame_detections)
    return (
        normalize_label(rel.subject) in labels
        and normalize_label(rel.object) in labels
    )


def check_attribute(
    rel: RelationTriplet, frame_detections: Sequence[Detection], tau: float
) -> bool:
    """Attribute tie: some pair of endpoint detections overlaps enough,
    measured as intersection area over the smaller box's area."""
    subj = normalize_label(rel.subject)
    obj = normalize_label(rel.object)
    subj_boxes = [d.bbox for d in frame_detections if normalize_label(d.label) == subj]
    obj_boxes = [d.bbox for d in frame_detections if normalize_label(d.label) == obj]
    for bs in subj_boxes:
        for bo in obj_boxes:
            inter = bs.intersection_area(bo)
            if inter > 0 and inter / min(bs.area, bo.area) > tau:
                return True
    return False


def _label_frames(
    label: str, detections_by_frame: Mapping[int, Sequence[Detection]]
) -> np.ndarray:
    wanted = normalize_label(label)
    frames = [
        f
        for f, dets in detections_by_frame.items()
        if any(normalize_label(d.label) == wanted for d in dets)
    ]
    return np.asarray(sorted(frames), dtype=np.int64)


def check_time_pairs(
    rel: RelationTriplet,
    detections_by_frame: Mapping[int, Sequence[Detection]],
    delta_t: int,
) -> set[tuple[int, int]]:
    """All (t_i, t_j) with the subject at t_i, the object at t_j, t_i <= t_j
    and the gap under delta_t. The same frame pairs with itself when both
    endpoints are present there."""
    subj_frames = _label_frames(rel.subject, detections_by_frame)
    obj_frames = _label_frames(rel.object, detections_by_frame)
    pairs = set()
    for ti in subj_frames:
        lo = np.searchsorted(obj_frames, ti, side="left")
        hi = np.searchsorted(obj_frames, ti + delta_t, side="left")
        for tj in obj_frames[lo:hi]:
            pairs.add((int(ti), int(tj)))
    return pairs


def check_causal_pairs(
    rel: RelationTriplet, detections_by_frame: Mapping[int, Sequence[Detection]]
) -> set[tuple[int, int]]:
    """All (t_i, t_j) with the subject strictly before the object."""
    subj_frames = _label_frames(rel.subject, detections_by_frame)
    obj_frames = _label_frames(rel.object, detections_by_frame)
    pairs = set()
    for ti in subj_frames:
        lo = np.searchsorted(obj_frames, ti, side="right")
        for tj in obj_frames[lo:]:
            pairs.add((int(ti), int(tj)))
    return pairs


def relation_participants(
    rel: RelationTriplet,
    detections_by_frame: Mapping[int, Sequence[Detection]],
    cfg: SearchConfig,
) -> set[int]:
    """Frames taking part in at least one satisfying instance of the
    relation, judged against all the evidence passed in."""
    if rel.rel_type is RelationType.SPATIAL:
        return {
            f for f, dets in detections_by_frame.items() if check_spatial(rel, dets)
        }
    if rel.rel_type is RelationType.ATTRIBUTE:
        return {
            f
            for f, dets in detections_by_frame.items()
            if check_attribute(rel, dets, cfg.tau)
        }
    subj_frames = _label_frames(rel.subject, detections_by_frame)
    obj_frames = _label_frames(rel.object, detections_by_frame)
    out: set[int] = set()
    if len(subj_frames) == 0 or len(obj_frames) == 0:
        return out
    if rel.rel_type is RelationType.TIME:
        for ti in subj_frames:
            lo = np.searchsorted(obj_frames, ti, side="left")
            hi = np.searchsorted(obj_frames, ti + cfg.delta_t, side="left")
            if hi > lo:
                out.add(int(ti))
        for tj in obj_frames:
            lo = np.searchsorted(subj_frames, tj - cfg.delta_t, side="right")
            hi = np.searchsorted(subj_frames, tj, side="right")
            if hi > lo:
                out.add(int(tj))
        return out
    # causal: subject frames with any object later, object frames with any
    # subject earlier
    last_obj = int(obj_frames[-1])
    first_subj = int(subj_frames[0])
    out.update(int(t) for t in subj_frames if t < last_obj)
    out.update(int(t) for t in obj_frames if t > first_subj)
    return out


def apply_relation_bonuses(
    state: SearchState,
    sampled: Sequence[int],
    evidence: Mapping[int, Sequence[Detection]],
    query: QuerySpec,
    cfg: SearchConfig,
) -> tuple[dict[int, float], dict[int, float]]:
    """Per-relation score bonuses of alpha * gamma.

    Returns (deltas, patched): deltas[f] is the bonus total to fold into
    this iteration's commit of sampled frame f, recomputed from scratch so
    a re-visited frame keeps every bonus it has earned exactly once.
    patched maps older frames whose registry value was raised in place
    because fresh evidence completed a time/causal pair for them.

    Spatial and attribute relations score sampled frames only (their truth
    never changes once a frame's detections are cached); time and causal
    participation is judged against all accumulated evidence.
    """
    deltas = {f: 0.0 for f in sampled}
    patched: dict[int, float] = {}
    if not cfg.relations_enabled or not query.relations:
        return deltas, patched
    sampled_set = set(sampled)
    for ri, rel in enumerate(query.relations):
        bonus = cfg.alpha * cfg.gamma_for(rel.rel_type)
        if rel.rel_type is RelationType.SPATIAL:
            satisfying: Iterable[int] = [
                f for f in sampled if check_spatial(rel, evidence.get(f, ()))
            ]
        elif rel.rel_type is RelationType.ATTRIBUTE:
            satisfying = [
                f for f in sampled if check_attribute(rel, evidence.get(f, ()), cfg.tau)
            ]
        else:
            satisfying = relation_participants(rel, evidence, cfg)
        for f in satisfying:
            if f in sampled_set:
                deltas[f] += bonus
                state.applied_bonuses.add((f, ri))
            elif bonus != 0.0 and (f, ri) not in state.applied_bonuses:
                state.applied_bonuses.add((f, ri))
                state.committed[f] += bonus
                state.scores[f] = max(state.scores[f], state.committed[f])
                patched[f] = float(state.committed[f])
    return deltas, patched


def commit_scores(state: SearchState, frame_scores: Mapping[int, float]):
    """Overwrite the registry at the sampled frames with their fresh
    scores (a re-visit with weaker evidence lowers the entry), reset their
    visitation counters, and age every other frame."""
    state.visit_count += 1
    for f, score in frame_scores.items():
        state.scores[f] = score
        state.committed[f] = score
        state.visit_count[f] = 0
        state.visited[f] = True
        state.known[f] = True
        state.obs_count[f] += 1


def diffuse_scores(state: SearchState, cfg: SearchConfig, committed_frames: Sequence[int]):
    """Spread committed scores to temporal neighbors.

    inverse_distance: neighbor at offset d is raised to at least
    score / (1 + d), window cfg.diffusion_window, never lowering anything.
    gaussian: adds exp(-d^2 / (2 sigma^2)) * score for every committed
    frame within 3 sigma, additively. Both read source values as of entry,
    so committed frames do not cascade through each other.
    """
    if not len(committed_frames):
        return
    frames = np.asarray(sorted(committed_frames), dtype=np.int64)
    source = state.scores[frames].copy()
    n = state.n_frames
    if cfg.diffusion_kernel == "inverse_distance":
        for delta in range(1, cfg.diffusion_window + 1):
            spread = source / (1.0 + delta)
            for offset in (-delta, delta):
                idx = frames + offset
                ok = (idx >= 0) & (idx < n)
                np.maximum.at(state.scores, idx[ok], spread[ok])
                state.known[idx[ok]] = True
        return
    sigma = cfg.diffusion_sigma
    radius = int(math.ceil(3.0 * sigma))
    gain = np.zeros(n)
    for delta in range(-radius, radius + 1):
        idx = frames + delta
        ok = (idx >= 0) & (idx < n)
        weight = math.exp(-(delta * delta) / (2.0 * sigma * sigma))
        np.add.at(gain, idx[ok], weight * source[ok])
        state.known[idx[ok]] = True
    state.scores += gain


def refresh_distribution(state: SearchState, cfg: SearchConfig):
    """Rebuild the sampling distribution from the registry.

    score_proportional: a shape-preserving monotone cubic through the
    (frame, score) knots of every known frame, evaluated everywhere,
    floored at a small epsilon and normalized; plain linear interpolation
    when there are fewer than 4 knots. thompson: per-frame Beta draws with
    pseudo-counts grown from scores and observation counts. A registry
    with no positive mass falls back to uniform for either sampler.
    """
    n = state.n_frames
    knots = np.flatnonzero(state.known)
    degenerate = len(knots) == 0 or float(state.scores[knots].max()) <= 0.0
    if degenerate:
        state.p = np.full(n, 1.0 / n)
        return
    if cfg.sampler == "thompson":
        a = cfg.thompson_alpha0 + state.scores * state.obs_count
        b = cfg.thompson_beta0 + state.obs_count * (1.0 - np.minimum(state.scores, 1.0))
        draws = state.rng.beta(a, b)
        total = draws.sum()
        if total <= 0.0:
            state.p = np.full(n, 1.0 / n)
            return
        state.p = draws / total
        return
    values = state.scores[knots]
    grid = np.arange(n, dtype=np.float64)
    if len(knots) < 4:
        dense = np.interp(grid, knots.astype(np.float64), values)
    else:
        # constant extension outside the outermost knots: cubic
        # extrapolation is unbounded and would swamp the distribution
        dense = PchipInterpolator(knots, values, extrapolate=False)(grid)
        dense[: knots[0]] = values[0]
        dense[knots[-1] + 1:] = values[-1]
    dense = np.clip(dense, P_FLOOR, None)
    state.p = dense / dense.sum()


def top_keyframes(state: SearchState, k: int) -> list[tuple[int, float]]:
    """Best-known frames by registry score, ties broken by lower index.
    Only frames with a known score participate, so fewer than k rows come
    back early in a run."""
    idx = np.flatnonzero(state.known)
    if len(idx) == 0:
        return []
    order = np.lexsort((idx, -state.scores[idx]))
    return [(int(idx[i]), float(state.scores[idx[i]])) for i in order[:k]]


def mark_found(
    state: SearchState,
    evidence: Mapping[int, Sequence[Detection]],
    query: QuerySpec,
    cfg: SearchConfig,
):
    """Cross a key object off once a current top-k frame holds a detection
    of it at or above the found threshold."""
    if not state.remaining_key_objects:
        return
    for frame, _ in top_keyframes(state, cfg.top_k):
        for det in evidence.get(frame, ()):
            label = normalize_label(det.label)
            if label in state.remaining_key_objects and det.confidence >= cfg.found_threshold:
                state.remaining_key_objects.discard(label)


def run_search(
    n_frames: int,
    duration_seconds: float,
    query: QuerySpec,
    backend: DetectorBackend,
    cfg: SearchConfig,
) -> SearchResult:
    """Run the full search loop against a detector backend.

    Deterministic for a fixed config seed and deterministic backend. The
    budget drops by the number of frames sampled each iteration whether or
    not they were cache hits: it meters sampling effort, not detector
    calls.
    """
    query = validate_query(query)
    vocabulary = query.vocabulary()
    state = init_state(n_frames, duration_seconds, query, cfg)
    cache = DetectionCache()
    evidence: dict[int, list[Detection]] = {}
    trace: list[IterationRecord] = []

    while (
        state.budget > 0
        and state.remaining_key_objects
        and state.iteration < state.iteration_limit
    ):
        before = state.scores.copy()
        k = choose_grid_size(state, cfg)
        sampled = sample_frames(state, k)
        evidence.update(cached_detect(backend, cache, sampled, vocabulary))
        frame_scores = {f: base_score(evidence[f], query) for f in sampled}
        deltas, patched = apply_relation_bonuses(state, sampled, evidence, query, cfg)
        for f in sampled:
            frame_scores[f] += deltas[f]
        commit_scores(state, frame_scores)
        diffuse_scores(state, cfg, sampled)
        refresh_distribution(state, cfg)
        state.budget -= len(sampled)
        state.iteration += 1
        mark_found(state, evidence, query, cfg)
        touched = np.flatnonzero(state.scores != before)
        trace.append(
            IterationRecord(
                iteration=state.iteration,
                sampled=tuple(sampled),
                scores={f: float(frame_scores[f]) for f in sampled},
                patched=patched,
                touched=tuple(int(t) for t in touched),
                registry_after=state.scores.copy(),
                p_after=state.p.copy(),
                remaining_key_objects=frozenset(state.remaining_key_objects),
            )
        )

    return SearchResult(
        keyframes=tuple(top_keyframes(state, cfg.top_k)),
        iterations_used=state.iteration,
        frames_detected=len(evidence),
        trace=tuple(trace),
    )
