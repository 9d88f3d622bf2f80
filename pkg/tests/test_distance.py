import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfx.distance import (DistanceParams, dist, dist_batch, feature_deltas,
                          score, score_batch)
from cfx.schema import KIND_CAT, KIND_CONT, KIND_ORD


class TestParams:
    def test_defaults_are_pure_l1(self):
        p = DistanceParams()
        assert (p.alpha, p.beta, p.gamma) == (0.0, 1.0, 0.0)

    @pytest.mark.parametrize("a,b,g", [(0.5, 0.5, 0.0), (1 / 3, 1 / 3, 1 / 3)])
    def test_valid_mixes(self, a, b, g):
        DistanceParams(a, b, g)

    def test_sum_must_be_one(self):
        with pytest.raises(ValueError, match="must be 1"):
            DistanceParams(0.5, 0.4, 0.0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            DistanceParams(-0.5, 1.5, 0.0)


class TestFeatureDeltas:
    def test_categorical_indicator(self):
        kinds = np.array([KIND_CAT], dtype=np.int8)
        w = np.array([5.0])  # range ignored for categoricals
        x = np.array([2.0])
        assert feature_deltas(x, np.array([2.0]), kinds, w)[0] == 0.0
        assert feature_deltas(x, np.array([3.0]), kinds, w)[0] == 1.0

    def test_numeric_range_normalized(self):
        kinds = np.array([KIND_ORD, KIND_CONT], dtype=np.int8)
        w = np.array([50.0, 100.0])
        d = feature_deltas(np.array([20.0, 0.0]), np.array([30.0, 25.0]), kinds, w)
        assert d.tolist() == [0.2, 0.25]

    def test_out_of_domain_clamped_to_one(self):
        kinds = np.array([KIND_CONT], dtype=np.int8)
        d = feature_deltas(np.array([0.0]), np.array([250.0]), kinds, np.array([100.0]))
        assert d[0] == 1.0

    def test_degenerate_range_is_indicator(self):
        kinds = np.array([KIND_CONT], dtype=np.int8)
        w = np.array([0.0])
        assert feature_deltas(np.array([7.0]), np.array([7.0]), kinds, w)[0] == 0.0
        assert feature_deltas(np.array([7.0]), np.array([9.0]), kinds, w)[0] == 1.0


class TestDist:
    KINDS = np.array([KIND_ORD, KIND_CONT], dtype=np.int8)
    W = np.array([50.0, 1000.0])

    def test_self_distance_zero(self):
        x = np.array([20.0, 100.0])
        for p in (DistanceParams(), DistanceParams(0.5, 0.5, 0.0),
                  DistanceParams(1 / 3, 1 / 3, 1 / 3)):
            assert dist(x, x, self.KINDS, self.W, p) == 0.0

    def test_single_changed_feature_l1(self):
        # age moves 10 of range 50 -> delta 0.2; two features -> 0.2/2
        x = np.array([20.0, 100.0])
        y = np.array([30.0, 100.0])
        assert dist(x, y, self.KINDS, self.W) == pytest.approx(0.1)

    def test_l0_counts_changed_features(self):
        kinds = np.array([KIND_ORD] * 12, dtype=np.int8)
        w = np.full(12, 100.0)
        x = np.zeros(12)
        y = x.copy()
        y[[2, 5, 7]] = 50.0
        assert dist(x, y, kinds, w, DistanceParams(1.0, 0.0, 0.0)) == pytest.approx(3 / 12)

    def test_linf_not_divided_by_n(self):
        kinds = np.array([KIND_ORD] * 4, dtype=np.int8)
        w = np.full(4, 100.0)
        x = np.zeros(4)
        y = np.array([10.0, 80.0, 0.0, 0.0])
        assert dist(x, y, kinds, w, DistanceParams(0.0, 0.0, 1.0)) == pytest.approx(0.8)

    def test_symmetry(self, rng):
        kinds = np.array([KIND_ORD, KIND_CONT, KIND_CAT], dtype=np.int8)
        w = np.array([10.0, 5.0, 1.0])
        for _ in range(50):
            x = rng.uniform(0, 10, size=3)
            y = rng.uniform(0, 10, size=3)
            p = DistanceParams(0.2, 0.3, 0.5)
            assert dist(x, y, kinds, w, p) == pytest.approx(dist(y, x, kinds, w, p))

    def test_batch_matches_scalar(self, rng):
        kinds = np.array([KIND_ORD, KIND_CONT, KIND_CAT, KIND_ORD], dtype=np.int8)
        w = np.array([10.0, 5.0, 1.0, 0.0])
        x = rng.uniform(0, 10, size=4)
        Y = rng.uniform(0, 10, size=(32, 4))
        p = DistanceParams(0.25, 0.25, 0.5)
        batch = dist_batch(x, Y, kinds, w, p)
        for r in range(32):
            assert batch[r] == pytest.approx(dist(x, Y[r], kinds, w, p))

    @given(
        deltas=st.lists(st.floats(0, 1), min_size=1, max_size=16),
        mix=st.sampled_from([(0.0, 1.0, 0.0), (1.0, 0.0, 0.0),
                             (0.5, 0.5, 0.0), (1 / 3, 1 / 3, 1 / 3)]),
    )
    @settings(max_examples=200, deadline=None)
    def test_dist_bounded_unit_interval(self, deltas, mix):
        n = len(deltas)
        kinds = np.array([KIND_CONT] * n, dtype=np.int8)
        w = np.ones(n)
        x = np.zeros(n)
        y = np.array(deltas)
        v = dist(x, y, kinds, w, DistanceParams(*mix))
        assert 0.0 <= v <= 1.0 + 1e-12


class TestScore:
    def test_counterfactual_is_plain_distance(self):
        assert score(0.3, 0.8) == 0.3

    def test_boundary_half_is_not_counterfactual(self):
        assert score(0.3, 0.5) == pytest.approx(1.8)

    def test_worst_case_non_cf(self):
        assert score(0.0, 0.0) == 2.0

    @given(d=st.floats(0, 1), m=st.floats(0, 1))
    @settings(max_examples=500, deadline=None)
    def test_separation(self, d, m):
        s = score(d, m)
        if m > 0.5:
            assert s <= 1.0
        else:
            assert s >= 1.5

    def test_monotone_in_dist_and_margin(self):
        assert score(0.2, 0.4) < score(0.3, 0.4)   # dist up -> score up
        assert score(0.2, 0.45) < score(0.2, 0.4)  # margin up -> score down
        assert score(0.2, 0.9) < score(0.3, 0.9)

    def test_batch_matches_scalar(self, rng):
        d = rng.uniform(0, 1, size=1000)
        m = rng.uniform(0, 1, size=1000)
        b = score_batch(d, m)
        for i in range(0, 1000, 97):
            assert b[i] == score(d[i], m[i])

    def test_sorted_population_never_interleaves(self, rng):
        d = rng.uniform(0, 1, size=512)
        m = rng.uniform(0, 1, size=512)
        s = score_batch(d, m)
        order = np.argsort(s, kind="stable")
        is_cf = m[order] > 0.5
        first_non_cf = np.argmax(~is_cf) if (~is_cf).any() else len(is_cf)
        assert is_cf[:first_non_cf].all() and not is_cf[first_non_cf:].any()
