import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confcoreset.errors import SelectionError
from confcoreset.strategies import (
    StrategySpec,
    confident_kcenter,
    entropy_scores,
    euclidean_distance,
    init_min_distances,
    kcenter_greedy,
    minmax_normalize,
    random_select,
    rank_fusion_select,
    sequential_select,
    top_b_select,
    update_min_distances,
)

from oracles import brute_kcenter, brute_min_distances, brute_top_b


def _instance(rng, n_max=60, d_max=6):
    n = int(rng.integers(5, n_max))
    d = int(rng.integers(1, d_max))
    x = rng.normal(size=(n, d))
    m = int(rng.integers(1, n // 2 + 1))
    labeled = rng.choice(n, size=m, replace=False).tolist()
    budget = int(rng.integers(1, n - m + 1))
    return x, labeled, budget


class TestDistance:
    def test_values(self):
        assert euclidean_distance([0, 0], [3, 4]) == 5.0
        assert euclidean_distance([1.5, -2], [1.5, -2]) == 0.0

    def test_symmetry(self, np_rng):
        for _ in range(20):
            a, b = np_rng.normal(size=(2, 7))
            assert euclidean_distance(a, b) == euclidean_distance(b, a)

    def test_mismatch(self):
        with pytest.raises(SelectionError):
            euclidean_distance([1, 2], [1, 2, 3])


class TestMinDistances:
    def test_hand_values(self, line_features):
        state = init_min_distances(line_features, [0])
        assert state.dist.tolist() == [0.0, 4.0, 10.0]

    def test_all_labeled(self, line_features):
        assert init_min_distances(line_features, [0, 1, 2]).dist.tolist() == [0, 0, 0]

    def test_empty(self, line_features):
        with pytest.raises(SelectionError):
            init_min_distances(line_features, [])

    def test_update_hand_trace(self, line_features):
        state = update_min_distances(init_min_distances(line_features, [0]), line_features, 2)
        assert state.dist.tolist() == [0.0, 4.0, 0.0]

    def test_update_twice_rejected(self, line_features):
        state = update_min_distances(init_min_distances(line_features, [0]), line_features, 2)
        with pytest.raises(SelectionError):
            update_min_distances(state, line_features, 2)
        with pytest.raises(SelectionError):
            update_min_distances(state, line_features, 7)

    def test_matches_brute_force(self, np_rng):
        for _ in range(20):
            x, labeled, _ = _instance(np_rng)
            got = init_min_distances(x, labeled).dist
            np.testing.assert_allclose(got, brute_min_distances(x, set(labeled)), atol=1e-12)

    def test_incremental_equals_full(self, np_rng):
        for _ in range(20):
            x, labeled, budget = _instance(np_rng)
            state = init_min_distances(x, labeled)
            extra = [i for i in np_rng.permutation(len(x)).tolist() if i not in labeled][:budget]
            for k, idx in enumerate(extra, 1):
                state = update_min_distances(state, x, idx)
                full = init_min_distances(x, labeled + extra[:k])
                np.testing.assert_array_equal(state.dist, full.dist)


class TestMinMax:
    def test_values(self):
        np.testing.assert_array_equal(minmax_normalize([2, 4, 6]), [0, 0.5, 1])

    def test_constant(self):
        np.testing.assert_array_equal(minmax_normalize([3, 3, 3]), [0.5, 0.5, 0.5])

    def test_empty(self):
        with pytest.raises(SelectionError):
            minmax_normalize([])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
    def test_range(self, values):
        out = minmax_normalize(values)
        if len(set(values)) > 1:
            assert out.min() == 0.0 and out.max() == 1.0
        assert np.all((out >= 0) & (out <= 1))


class TestKCenter:
    def test_hand_trace(self, line_features):
        assert kcenter_greedy(line_features, [0], 2).tolist() == [2, 1]

    def test_all_remaining_is_permutation(self, np_rng):
        x = np_rng.normal(size=(12, 3))
        out = kcenter_greedy(x, [4, 7], 10)
        assert sorted(out.tolist()) == sorted(set(range(12)) - {4, 7})

    def test_budget_exceeds_pool(self, line_features):
        with pytest.raises(SelectionError):
            kcenter_greedy(line_features, [0], 3)

    def test_empty_labeled(self, line_features):
        with pytest.raises(SelectionError):
            kcenter_greedy(line_features, [], 1)

    def test_ties_break_to_lowest_index(self):
        x = np.array([[0.0], [-2.0], [2.0], [1.0]])
        assert kcenter_greedy(x, [0], 1).tolist() == [1]

    def test_matches_brute_force(self, np_rng):
        for _ in range(25):
            x, labeled, budget = _instance(np_rng)
            budget = min(budget, 15)
            assert kcenter_greedy(x, labeled, budget).tolist() == brute_kcenter(x, labeled, budget)


class TestConfidentKCenter:
    x = np.array([[0.0], [1.0], [6.0], [10.0]])
    g = np.array([np.nan, 0.9, 0.5, 0.1])

    def test_product_hand_trace(self):
        assert confident_kcenter(self.x, [0], self.g, 1, alpha=0.5).tolist() == [2]
        # scores over candidates {1, 2, 3}: N(dist) = [0, 5/9, 1], N(G) = [1, 0.5, 0]
        assert math.isclose(math.sqrt(5 / 9 * 0.5), 0.527046276694730, rel_tol=1e-12)

    def test_sum_hand_trace(self):
        assert confident_kcenter(self.x, [0], self.g, 1, alpha=0.5, combiner="sum").tolist() == [2]

    def test_missing_score(self):
        g = self.g.copy()
        g[3] = np.nan
        with pytest.raises(SelectionError):
            confident_kcenter(self.x, [0], g, 1)
        with pytest.raises(SelectionError):
            confident_kcenter(self.x, [0], None, 1)

    def test_budget(self):
        with pytest.raises(SelectionError):
            confident_kcenter(self.x, [0], self.g, 4)

    def test_alpha_one_is_kcenter(self, np_rng):
        for _ in range(25):
            x, labeled, budget = _instance(np_rng)
            g = np_rng.normal(size=len(x))
            expect = kcenter_greedy(x, labeled, budget).tolist()
            assert confident_kcenter(x, labeled, g, budget, alpha=1.0).tolist() == expect

    def test_alpha_zero_is_top_uncertainty(self, np_rng):
        for _ in range(25):
            x, labeled, budget = _instance(np_rng)
            g = np_rng.normal(size=len(x))
            cand = [i for i in range(len(x)) if i not in labeled]
            got = confident_kcenter(x, labeled, g, budget, alpha=0.0)
            assert set(got.tolist()) == set(brute_top_b(g, cand, budget))

    def test_per_round_switch(self, np_rng):
        x, labeled, budget = _instance(np_rng)
        g = np_rng.normal(size=len(x))
        out = confident_kcenter(x, labeled, g, budget, 0.5, renorm_uncertainty="per_round")
        assert len(set(out.tolist())) == budget and not set(out.tolist()) & set(labeled)

    def test_result_disjoint_and_unique(self, np_rng):
        for combiner in ("product", "sum"):
            for _ in range(10):
                x, labeled, budget = _instance(np_rng)
                g = np_rng.uniform(size=len(x))
                out = confident_kcenter(x, labeled, g, budget, 0.25, combiner).tolist()
                assert len(out) == budget == len(set(out))
                assert not set(out) & set(labeled)


class TestRankFusion:
    def test_hand_trace(self):
        assert rank_fusion_select([10, 6, 1], [0.5, 0.9, 0.1], 1).tolist() == [0]

    def test_everything(self):
        assert sorted(rank_fusion_select([1, 2, 3], [3, 1, 2], 3).tolist()) == [0, 1, 2]

    def test_candidates_mapping(self):
        assert rank_fusion_select([10, 6, 1], [0.5, 0.9, 0.1], 2, [4, 8, 9]).tolist() == [4, 8]

    def test_length_mismatch(self):
        with pytest.raises(SelectionError):
            rank_fusion_select([1, 2], [1], 1)

    @settings(max_examples=60, deadline=None)
    @given(
        data=st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=2, max_size=25),
        budget_frac=st.floats(0.01, 1.0),
    )
    def test_monotone_invariance(self, data, budget_frac):
        dist = np.array([a for a, _ in data], dtype=float)
        unc = np.array([b for _, b in data], dtype=float)
        budget = max(1, int(budget_frac * len(data)))
        base = set(rank_fusion_select(dist, unc, budget).tolist())
        assert set(rank_fusion_select(np.exp(dist / 5), unc, budget).tolist()) == base
        assert set(rank_fusion_select(dist, unc ** 3 - 7, budget).tolist()) == base


class TestSequential:
    def test_split_of_two(self):
        x = np.array([[0.0], [1.0], [5.0], [9.0]])
        g = np.array([0.0, 0.8, 0.1, 0.2])
        # 1 uncertainty pick (index 1), then K-center from {0, 1}: farthest is 9.0
        assert sequential_select(x, [0], g, 2).tolist() == [1, 3]

    def test_odd_budget_favours_uncertainty(self, np_rng):
        x = np_rng.normal(size=(20, 2))
        g = np.arange(20, dtype=float)
        out = sequential_select(x, [0], g, 5).tolist()
        assert out[:3] == [19, 18, 17]
        assert len(set(out)) == 5 and 0 not in out

    def test_uniform_uncertainty(self, np_rng):
        x = np_rng.normal(size=(15, 3))
        labeled = [3, 9]
        g = np.ones(15)
        out = sequential_select(x, labeled, g, 4).tolist()
        assert out[:2] == [0, 1]
        assert out[2:] == kcenter_greedy(x, labeled + [0, 1], 2).tolist()

    def test_budget_too_small(self, line_features):
        with pytest.raises(SelectionError):
            sequential_select(line_features, [0], np.zeros(3), 1)


class TestEntropy:
    def test_values(self):
        h = entropy_scores([[0.25] * 4, [1.0, 0, 0, 0], [0.5, 0.5, 0, 0]])
        np.testing.assert_allclose(h, [math.log(4), 0.0, 0.6931471805599453], atol=1e-15)

    def test_not_distribution(self):
        with pytest.raises(SelectionError):
            entropy_scores([[0.5, 0.6]])
        with pytest.raises(SelectionError):
            entropy_scores([[1.5, -0.5]])


class TestTopB:
    def test_values(self):
        assert top_b_select([0.1, 0.9, 0.5], 2).tolist() == [1, 2]

    def test_ties(self):
        assert top_b_select([1.0] * 5, 3).tolist() == [0, 1, 2]

    def test_zero_budget(self):
        with pytest.raises(SelectionError):
            top_b_select([1.0, 2.0], 0)
        with pytest.raises(SelectionError):
            StrategySpec("random", budget=0)


class TestRandom:
    def test_permutation(self):
        assert sorted(random_select([3, 5, 8], 3, 1).tolist()) == [3, 5, 8]

    def test_deterministic(self):
        assert random_select(range(50), 7, 4).tolist() == random_select(range(50), 7, 4).tolist()

    def test_uniform_frequency(self):
        counts = np.zeros(4)
        for seed in range(10000):
            counts[random_select([0, 1, 2, 3], 1, seed)[0]] += 1
        np.testing.assert_allclose(counts / 10000, 0.25, atol=0.02)

    def test_too_many(self):
        with pytest.raises(SelectionError):
            random_select([1, 2], 3, 0)


def test_strategy_spec_parse():
    spec = StrategySpec.parse("confident-coreset@0.5")
    assert spec.id == "confident-coreset" and spec.alpha == 0.5
    assert spec.label == "confident-coreset@0.5"
    assert StrategySpec.parse("coreset").label == "coreset"
    with pytest.raises(SelectionError):
        StrategySpec.parse("vaal")
    with pytest.raises(SelectionError):
        StrategySpec("confident-coreset", alpha=1.5)
