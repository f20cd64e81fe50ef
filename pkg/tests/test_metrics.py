import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from framescout.metrics import (
    DimensionMismatch,
    EmptyGroundTruth,
    EmptySet,
    TooSmall,
    label_jaccard_similarity,
    metrics_report,
    set_precision,
    set_recall,
    ssim,
    temporal_coverage,
)
from framescout.errors import InputError
from framescout.synth import ScenarioTemplate, generate_scenario, render_frame


class TestTemporalCoverage:
    def test_exact_match(self):
        assert temporal_coverage([10, 20], [10, 20], 0.0) == 1.0

    def test_half_covered(self):
        assert temporal_coverage([11], [10, 20], 1.0) == 0.5

    def test_empty_predictions(self):
        assert temporal_coverage([], [10, 20], 5.0) == 0.0

    def test_empty_gt_raises(self):
        with pytest.raises(EmptyGroundTruth):
            temporal_coverage([1.0], [], 5.0)

    def test_negative_delta_rejected(self):
        with pytest.raises(InputError):
            temporal_coverage([1.0], [1.0], -1.0)

    def test_inclusive_threshold(self):
        assert temporal_coverage([15], [10], 5.0) == 1.0


class TestSsim:
    def _noise(self, seed=0, shape=(32, 32)):
        return np.random.default_rng(seed).integers(0, 256, size=shape, dtype=np.uint8)

    def test_identity(self):
        x = self._noise()
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-9)

    def test_inverted_stays_in_range(self):
        x = (self._noise() > 127).astype(np.uint8) * 255
        value = ssim(x, 255 - x)
        assert -1.0 <= value <= 1.0

    def test_equal_constants(self):
        x = np.full((16, 16), 100, dtype=np.uint8)
        assert ssim(x, x.copy()) == pytest.approx(1.0)

    def test_symmetry(self):
        a, b = self._noise(1), self._noise(2)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ssim(self._noise(), self._noise(shape=(16, 16)))

    def test_too_small(self):
        with pytest.raises(TooSmall):
            ssim(np.zeros((8, 8), dtype=np.uint8), np.zeros((8, 8), dtype=np.uint8))

    def test_rgb_reduces_to_luma(self):
        rng = np.random.default_rng(3)
        rgb = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        gray = (rgb.astype(np.float64) @ [0.299, 0.587, 0.114])
        assert ssim(rgb, rgb) == pytest.approx(1.0, abs=1e-9)
        assert ssim(rgb, np.stack([gray] * 3, axis=2).astype(np.uint8)) <= 1.0

    def test_different_content_below_one(self):
        a = np.zeros((32, 32), dtype=np.uint8)
        b = a.copy()
        b[8:24, 8:24] = 200
        assert ssim(a, b) < 1.0


def brute_precision_recall(pred, gt, phi):
    """Full similarity-matrix reference for the set metrics."""
    matrix = [[phi(p, g) for g in gt] for p in pred]
    precision = sum(max(row) for row in matrix) / len(pred)
    recall = sum(max(matrix[i][j] for i in range(len(pred))) for j in range(len(gt))) / len(gt)
    return precision, recall


class TestSetMetrics:
    def test_identical_sets(self):
        pred = gt = [frozenset({"a"}), frozenset({"b"})]
        assert set_precision(pred, gt, label_jaccard_similarity) == 1.0
        assert set_recall(pred, gt, label_jaccard_similarity) == 1.0

    def test_mean_of_maxes(self):
        table = {("p1", "g1"): 0.8, ("p1", "g2"): 0.2,
                 ("p2", "g1"): 0.1, ("p2", "g2"): 0.4}
        phi = lambda a, b: table.get((a, b), table.get((b, a), 0.0))  # noqa: E731
        assert set_precision(["p1", "p2"], ["g1", "g2"], phi) == pytest.approx(0.6)

    def test_singletons(self):
        phi = lambda a, b: 0.37  # noqa: E731
        assert set_precision(["p"], ["g"], phi) == pytest.approx(0.37)
        assert set_recall(["p"], ["g"], phi) == pytest.approx(0.37)

    def test_empty_raises(self):
        with pytest.raises(EmptySet):
            set_precision([], ["g"], lambda a, b: 1.0)
        with pytest.raises(EmptySet):
            set_recall(["p"], [], lambda a, b: 1.0)

    def test_far_singleton(self):
        phi = lambda a, b: 0.1  # noqa: E731
        assert set_recall(["p"], ["g1", "g2"], phi) == pytest.approx(0.1)

    def test_matches_brute_force_small_sets(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n_pred = int(rng.integers(1, 5))
            n_gt = int(rng.integers(1, 5))
            pred = [f"p{i}" for i in range(n_pred)]
            gt = [f"g{j}" for j in range(n_gt)]
            table = {
                (a, b): float(rng.random())
                for a, b in itertools.product(pred + gt, pred + gt)
            }
            phi = lambda a, b: table[(a, b)] if (a, b) in table else table[(b, a)]  # noqa: E731
            # symmetrize so phi(g, p) lookups agree with phi(p, g)
            for a, b in list(table):
                table[(b, a)] = table[(a, b)]
            expected_p, expected_r = brute_precision_recall(pred, gt, phi)
            assert set_precision(pred, gt, phi) == pytest.approx(expected_p)
            assert set_recall(pred, gt, phi) == pytest.approx(expected_r)


class TestLabelJaccard:
    def test_identical(self):
        assert label_jaccard_similarity({"person", "dog"}, {"person", "dog"}) == 1.0

    def test_disjoint(self):
        assert label_jaccard_similarity({"person"}, {"dog"}) == 0.0

    def test_partial(self):
        assert label_jaccard_similarity({"person", "dog"}, {"dog", "cat"}) == pytest.approx(1 / 3)

    def test_both_empty(self):
        assert label_jaccard_similarity(set(), set()) == 1.0


@settings(max_examples=150, deadline=None)
@given(
    gt=st.lists(st.floats(0, 100), min_size=1, max_size=8),
    pred=st.lists(st.floats(0, 100), min_size=0, max_size=8),
    extra=st.floats(0, 100),
    d1=st.floats(0, 20),
    d2=st.floats(0, 20),
)
def test_coverage_monotonicity(gt, pred, extra, d1, d2):
    lo, hi = sorted((d1, d2))
    assert temporal_coverage(pred, gt, lo) <= temporal_coverage(pred, gt, hi)
    assert temporal_coverage(pred, gt, d1) <= temporal_coverage(pred + [extra], gt, d1)


@settings(max_examples=150, deadline=None)
@given(
    pred=st.lists(st.integers(0, 30), min_size=1, max_size=6),
    gt=st.lists(st.integers(0, 30), min_size=1, max_size=6),
    extra=st.integers(0, 30),
)
def test_recall_grows_with_predictions(pred, gt, extra):
    phi = lambda a, b: 1.0 / (1.0 + abs(a - b))  # noqa: E731
    assert set_recall(pred, gt, phi) <= set_recall(pred + [extra], gt, phi)


def test_metrics_on_rendered_frames():
    scenario = generate_scenario(ScenarioTemplate(kind="spatial", n_frames=480), 2)
    gt = scenario.queries[0].gt_keyframes
    inside = render_frame(scenario, gt[0])
    inside2 = render_frame(scenario, gt[1])
    outside = render_frame(scenario, 0)
    assert ssim(inside, inside2) == pytest.approx(1.0, abs=1e-9)  # same static scene
    assert ssim(inside, outside) < 1.0
    assert set_precision([inside], [inside, outside], ssim) == pytest.approx(1.0, abs=1e-9)


def test_report_schema():
    report = metrics_report(tc=0.5, delta=5.0, precision=0.7, recall=0.9,
                            phi_name="label_jaccard", n_pred=8, n_gt=4)
    assert set(report) == {
        "temporal_coverage", "delta_seconds", "precision", "recall",
        "phi", "n_pred", "n_gt",
    }
