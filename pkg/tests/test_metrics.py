import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from softpress.errors import LengthMismatch, ShapeMismatch
from softpress.metrics import (contact_iou, evaluate_sequence, mae, temporal_accuracy,
                               volumetric_iou)
from softpress.pressure import Frame, PressureImage

C = np.array([[2000.0]])
N = np.array([[0.0]])

pairs = st.integers(1, 8).flatmap(lambda n: st.tuples(
    arrays(np.float64, (n, n), elements=st.floats(0, 1e4, allow_nan=False)),
    arrays(np.float64, (n, n), elements=st.floats(0, 1e4, allow_nan=False))))


class TestTemporalAccuracy:
    def test_identical(self):
        assert temporal_accuracy([C, N, C], [C, N, C]) == 1.0

    def test_count(self):
        assert temporal_accuracy([C, C, N, N], [C, N, N, N]) == 0.75

    def test_all_empty(self):
        assert temporal_accuracy([N, N], [N, N]) == 1.0

    def test_lengths(self):
        with pytest.raises(LengthMismatch):
            temporal_accuracy([C], [C, C])
        with pytest.raises(LengthMismatch):
            temporal_accuracy([], [])


class TestContactIou:
    def test_identical_and_disjoint(self):
        a = np.array([[2000.0, 0.0]])
        b = np.array([[0.0, 2000.0]])
        assert contact_iou(a, a) == 1.0
        assert contact_iou(a, b) == 0.0
        assert contact_iou(N, N) == 1.0

    def test_set_count(self):
        gt = np.array([[2000.0, 2000.0, 2000.0, 0.0]])
        est = np.array([[2000.0, 0.0, 0.0, 2000.0]])
        assert contact_iou(gt, est) == 0.25

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            contact_iou(np.zeros((2, 2)), np.zeros((2, 3)))


class TestVolumetricIou:
    def test_hand_case(self):
        assert volumetric_iou([[2, 0], [0, 0]], [[1, 0], [0, 1]]) == 1 / 3

    def test_identity_and_disjoint(self):
        a = np.array([[3.0, 0.0]])
        assert volumetric_iou(a, a) == 1.0
        assert volumetric_iou(a, a[:, ::-1]) == 0.0
        assert volumetric_iou(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0

    def test_accepts_pressure_images(self):
        p = PressureImage([[1.0, 2.0]], Frame.IMAGE)
        assert volumetric_iou(p, p) == 1.0

    @given(pairs, st.floats(0.01, 100))
    def test_symmetric_bounded_scale_invariant(self, pair, s):
        a, b = pair
        v = volumetric_iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == volumetric_iou(b, a)
        assert volumetric_iou(s * a, s * b) == pytest.approx(v, rel=1e-9, abs=1e-12)

    @given(pairs)
    def test_one_iff_identical(self, pair):
        a, b = pair
        if np.array_equal(a, b):
            assert volumetric_iou(a, b) == 1.0
        elif np.maximum(a, b).sum() > 0 and volumetric_iou(a, b) == 1.0:
            # only possible when differences are below float resolution of the sums
            assert np.abs(a - b).sum() <= 1e-12 * np.maximum(a, b).sum()


class TestMae:
    def test_examples(self):
        a = np.ones((3, 3))
        assert mae(a, a) == 0.0
        assert mae([[10.0]], [[4.0]]) == 6.0

    def test_oracle(self):
        rng = np.random.default_rng(5)
        a, b = rng.uniform(0, 1e4, (2, 17, 23))
        expected = math.fsum(abs(x - y) for x, y in zip(a.ravel(), b.ravel())) / a.size
        assert mae(a, b) == pytest.approx(expected, rel=1e-12)

    @given(pairs, st.data())
    def test_is_a_metric(self, pair, data):
        a, b = pair
        c = data.draw(arrays(np.float64, a.shape, elements=st.floats(0, 1e4, allow_nan=False)))
        assert mae(a, a) == 0.0
        assert mae(a, b) == mae(b, a)
        assert mae(a, c) <= mae(a, b) + mae(b, c) + 1e-9


class TestEvaluate:
    def test_single_perfect_frame(self):
        r = evaluate_sequence([C], [C])
        assert (r.temporal_accuracy, r.contact_iou, r.volumetric_iou, r.mae) == (1.0, 1.0, 1.0, 0.0)

    def test_half_temporal(self):
        r = evaluate_sequence([C, C], [C, N])
        assert r.temporal_accuracy == 0.5
        assert r.contact_iou == 0.5
        assert r.n_frames == 2

    def test_serialisation(self):
        r = evaluate_sequence([C, N], [C, C])
        d = json.loads(r.to_json())
        assert d["conventions"]["empty_iou"] == 1.0
        assert d["conventions"]["frame_averaging"] == "macro"
        assert "per_frame" not in d
        lines = r.to_csv().splitlines()
        assert lines[0].startswith("frame,") and len(lines) == 3
