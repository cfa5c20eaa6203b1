import numpy as np
import pytest

from tarsim.classifier import Model, predict_proba
from tarsim.strategies import (
    STRATEGIES,
    select_batch,
    select_random,
    select_relevance,
    select_uncertainty,
)


def random_pool(rng, max_id=5000):
    n = int(rng.integers(2, 60))
    ids = rng.choice(max_id, size=n, replace=False).tolist()
    features = {d: {0: float(rng.normal()), 1: float(rng.normal())} for d in ids}
    model = Model({0: float(rng.normal()), 1: float(rng.normal())}, float(rng.normal() * 0.1))
    return ids, features, model


class TestSelectRandom:
    def test_truncated_batch(self):
        rng = np.random.default_rng(0)
        assert select_random([42], 100, rng) == [42]

    def test_deterministic_given_seed(self):
        pool = list(range(1, 11))
        a = select_random(pool, 3, np.random.default_rng(99))
        b = select_random(pool, 3, np.random.default_rng(99))
        assert a == b

    def test_pool_order_irrelevant(self):
        pool = [5, 3, 9, 1, 7]
        a = select_random(pool, 2, np.random.default_rng(4))
        b = select_random(pool[::-1], 2, np.random.default_rng(4))
        assert a == b

    def test_empty_pool(self):
        with pytest.raises(ValueError, match="pool exhausted"):
            select_random([], 5, np.random.default_rng(0))

    def test_distinct_and_from_pool(self):
        rng = np.random.default_rng(8)
        pool = list(range(100, 160))
        for _ in range(50):
            batch = select_random(pool, 10, rng)
            assert len(batch) == 10
            assert len(set(batch)) == 10
            assert set(batch) <= set(pool)

    def test_uniform_within_3_sigma(self):
        rng = np.random.default_rng(1234)
        pool = list(range(1, 11))
        counts = {d: 0 for d in pool}
        for _ in range(10000):
            counts[select_random(pool, 1, rng)[0]] += 1
        # binomial(10000, 0.1): mean 1000, sigma = sqrt(900) = 30
        for d, c in counts.items():
            assert 910 <= c <= 1090, f"doc {d} drawn {c} times"


class TestSelectUncertainty:
    def test_closest_to_half(self):
        # scores chosen so probabilities land at 0.95, 0.52, 0.08, 0.49
        def score_for(p):
            return float(np.log(p / (1 - p)))

        features = {1: {0: score_for(0.95)}, 2: {0: score_for(0.52)},
                    3: {0: score_for(0.08)}, 4: {0: score_for(0.49)}}
        model = Model({0: 1.0})
        batch = select_uncertainty(model, [1, 2, 3, 4], 2, features)
        assert set(batch) == {4, 2}

    def test_all_tied_takes_lowest_ids(self):
        features = {d: {0: 1.0} for d in (8, 3, 5, 1)}
        assert select_uncertainty(Model(), [8, 3, 5, 1], 2, features) == [1, 3]

    def test_empty_pool(self):
        with pytest.raises(ValueError, match="pool exhausted"):
            select_uncertainty(Model(), [], 2, {})

    def test_matches_brute_force(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            ids, features, model = random_pool(rng)
            k = int(rng.integers(1, len(ids) + 2))
            got = select_uncertainty(model, ids, k, features)
            want = sorted(
                ids,
                key=lambda d: (abs(predict_proba(model, features[d]) - 0.5), d),
            )[: min(k, len(ids))]
            assert got == want


class TestSelectRelevance:
    def test_top_two(self):
        def score_for(p):
            return float(np.log(p / (1 - p)))

        features = {1: {0: score_for(0.9)}, 2: {0: score_for(0.2)}, 3: {0: score_for(0.6)}}
        assert select_relevance(Model({0: 1.0}), [1, 2, 3], 2, features) == [1, 3]

    def test_whole_pool(self):
        features = {d: {0: float(d)} for d in (4, 2, 9)}
        batch = select_relevance(Model({0: 1.0}), [4, 2, 9], 3, features)
        assert batch == [9, 4, 2]

    def test_empty_pool(self):
        with pytest.raises(ValueError, match="pool exhausted"):
            select_relevance(Model(), [], 2, {})

    def test_matches_full_sort(self):
        rng = np.random.default_rng(63)
        for _ in range(100):
            ids, features, model = random_pool(rng)
            k = int(rng.integers(1, len(ids) + 2))
            got = select_relevance(model, ids, k, features)
            want = sorted(
                ids, key=lambda d: (-model.score(features[d]), d)
            )[: min(k, len(ids))]
            assert got == want


class TestSelectBatch:
    def test_dispatch(self):
        features = {d: {0: float(d)} for d in (1, 2, 3)}
        model = Model({0: 1.0})
        rng = np.random.default_rng(0)
        assert set(STRATEGIES) == {"random", "uncertainty", "relevance"}
        assert select_batch("relevance", model, [1, 2, 3], 1, features) == [3]
        assert len(select_batch("random", None, [1, 2, 3], 2, features, rng)) == 2
        assert select_batch("uncertainty", Model(), [1, 2, 3], 1, features) == [1]

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown strategy"):
            select_batch("oracle", None, [1], 1, {}, np.random.default_rng(0))

    def test_missing_requirements(self):
        with pytest.raises(ValueError):
            select_batch("random", None, [1], 1, {})
        with pytest.raises(ValueError):
            select_batch("uncertainty", None, [1], 1, {})

    def test_batch_size_validated(self):
        with pytest.raises(ValueError):
            select_random([1, 2], 0, np.random.default_rng(0))
