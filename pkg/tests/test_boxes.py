import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeped.core.boxes import corners, intersection_area, iou, iou_matrix, non_max_suppress
from edgeped.core.errors import ContractError
from tests.conftest import box

coords = st.floats(min_value=0, max_value=100, allow_nan=False)
sizes = st.floats(min_value=0.5, max_value=50, allow_nan=False)
boxes = st.builds(box, coords, coords, sizes, sizes)


def test_iou_examples():
    assert iou(box(0, 0, 10, 10), box(5, 0, 10, 10)) == pytest.approx(50 / 150)
    assert iou(box(0, 0, 10, 10), box(10, 0, 10, 10)) == 0.0
    assert iou(box(0, 0, 10, 10), box(2.5, 2.5, 5, 5)) == pytest.approx(0.25)
    assert intersection_area(box(0, 0, 4, 4), box(2, 2, 4, 4)) == 4.0


@settings(max_examples=200)
@given(boxes, boxes)
def test_iou_is_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0


def test_iou_symmetry_identity_and_scale_over_random_pairs():
    rng = np.random.default_rng(2024)
    n = 10_000
    a = np.hstack([rng.uniform(0, 100, (n, 2)), rng.uniform(0.5, 50, (n, 2))])
    b = np.hstack([rng.uniform(0, 100, (n, 2)), rng.uniform(0.5, 50, (n, 2))])
    scale = rng.uniform(0.1, 10, n)
    for i in range(n):
        first, second = box(*a[i]), box(*b[i])
        value = iou(first, second)
        assert value == iou(second, first)
        assert iou(first, first) == 1.0
        scaled = iou(box(*(a[i] * scale[i])), box(*(b[i] * scale[i])))
        assert scaled == pytest.approx(value, abs=1e-9)


@settings(max_examples=200)
@given(boxes, boxes, st.floats(min_value=0.1, max_value=10))
def test_iou_ignores_a_common_scale(a, b, s):
    scaled = iou(box(a.x * s, a.y * s, a.w * s, a.h * s), box(b.x * s, b.y * s, b.w * s, b.h * s))
    assert scaled == pytest.approx(iou(a, b), abs=1e-9)


def test_iou_matrix_matches_pairwise_iou():
    rng = np.random.default_rng(3)
    left = [box(*rng.uniform(0, 40, 2), *rng.uniform(2, 20, 2)) for _ in range(7)]
    right = [box(*rng.uniform(0, 40, 2), *rng.uniform(2, 20, 2)) for _ in range(5)]
    matrix = iou_matrix(corners(left), corners(right))
    assert matrix.shape == (7, 5)
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            assert matrix[i, j] == iou(a, b)
    assert iou_matrix(corners([]), corners(right)).shape == (0, 5)


@given(boxes)
def test_iou_with_itself_is_one(a):
    assert iou(a, a) == 1.0


def test_nms_keeps_the_most_confident_of_an_overlapping_pair():
    strong = box(0, 0, 10, 10, conf=0.9)
    weak = box(1, 0, 10, 10, conf=0.8)
    assert non_max_suppress([weak, strong], 0.6) == [strong]


def test_nms_box_at_exactly_the_threshold_survives():
    a = box(0, 0, 10, 10, conf=0.9)
    b = box(5, 0, 10, 10, conf=0.8)
    threshold = iou(a, b)
    assert non_max_suppress([a, b], threshold) == [a, b]


def test_nms_stable_on_confidence_ties():
    a = box(0, 0, 10, 10, conf=0.5)
    b = box(50, 50, 10, 10, conf=0.5)
    assert non_max_suppress([b, a], 0.6) == [b, a]


@settings(max_examples=100)
@given(st.lists(st.builds(box, coords, coords, sizes, sizes, st.floats(0, 1)), max_size=10))
def test_nms_is_idempotent(candidates):
    kept = non_max_suppress(candidates, 0.6)
    assert non_max_suppress(kept, 0.6) == kept


def test_nms_needs_confidence():
    with pytest.raises(ContractError):
        non_max_suppress([box(0, 0, 5, 5)], 0.5)
    assert non_max_suppress([], 0.5) == []


def _reference_nms(corners, scores, threshold):
    x1, y1, x2, y2 = corners.T
    areas = (x2 - x1) * (y2 - y1)
    order = np.argsort(-scores, kind="stable")
    keep = []
    while order.size:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        w = np.maximum(0.0, np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest]))
        h = np.maximum(0.0, np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest]))
        inter = w * h
        overlap = inter / (areas[i] + areas[rest] - inter)
        order = rest[overlap <= threshold + 1e-12]
    return keep


def test_nms_matches_reference_on_random_sets():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        n = int(rng.integers(0, 13))
        xy = rng.uniform(0, 60, size=(n, 2))
        wh = rng.uniform(5, 30, size=(n, 2))
        scores = rng.uniform(0, 1, size=n)
        candidates = [box(*xy[i], *wh[i], conf=float(scores[i])) for i in range(n)]
        corners = np.array([[b.x, b.y, b.x2, b.y2] for b in candidates]).reshape(n, 4)
        expected = [candidates[i] for i in _reference_nms(corners, scores, 0.6)]
        assert non_max_suppress(candidates, 0.6) == expected


@settings(max_examples=100)
@given(st.lists(st.builds(box, coords, coords, sizes, sizes, st.floats(0, 1)), max_size=10))
def test_nms_survivors_never_overlap_too_much(candidates):
    kept = non_max_suppress(candidates, 0.6)
    assert len(kept) <= len(candidates)
    for i, a in enumerate(kept):
        for b in kept[i + 1:]:
            assert iou(a, b) <= 0.6
