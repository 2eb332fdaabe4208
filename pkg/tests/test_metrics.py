import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from jointinfluence.exceptions import DomainError
from jointinfluence.metrics import (
    accuracy_top1,
    critical_value,
    mrr,
    ndcg,
    rank_labels,
    rbo,
    wilcoxon_signed_rank,
)

# Fixed sample with ten distinct non-zero differences.
PAIRS_A = np.array([3.1, 2.4, 5.0, 1.2, 4.4, 3.9, 2.2, 6.1, 0.7, 3.3])
PAIRS_B = np.array([2.0, 2.9, 3.1, 1.0, 2.1, 4.6, 1.1, 3.0, 0.1, 1.8])


def enumerate_null(ranks):
    # Exact null of W+ by listing all sign assignments.
    sums = []
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        sums.append(sum(r for r, s in zip(ranks, signs) if s))
    return np.array(sums)


class TestRanking:
    def test_rank_ties_keep_label_order(self):
        r = rank_labels(["a", "b", "c"], [1.0, 3.0, 1.0])
        assert r.items == ("b", "a", "c")

    def test_accuracy(self):
        assert accuracy_top1([1, 2, 3], [1, 2, 3]) == 1.0
        assert accuracy_top1([1, 2], [3, 4]) == 0.0

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1),
           st.randoms())
    def test_accuracy_permutation(self, pairs, rnd):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        a = accuracy_top1([p for p, _ in pairs], [q for _, q in pairs])
        b = accuracy_top1([p for p, _ in shuffled], [q for _, q in shuffled])
        assert a == pytest.approx(b)

    def test_ndcg_hand_example(self):
        gains = {"A": 3, "B": 2, "C": 1}
        dcg = 2 + 3 / math.log2(3) + 0.5
        idcg = 3 + 2 / math.log2(3) + 0.5
        val = ndcg(["B", "A", "C"], gains)
        assert val == pytest.approx(dcg / idcg, abs=1e-12)
        assert val == pytest.approx(0.9224944, abs=1e-6)

    def test_ndcg_edges(self):
        assert ndcg(["A", "B", "C"], {"A": 3, "B": 2, "C": 1}) == 1.0
        assert ndcg(["A"], {"A": 5}) == 1.0
        assert ndcg(["A", "B"], {"A": 0, "B": 0}) == 1.0
        with pytest.raises(DomainError):
            ndcg(["A", "Z"], {"A": 1})

    def test_rbo_examples(self):
        assert rbo(["A", "B"], ["B", "A"], 0.9) == pytest.approx(0.09, abs=1e-12)
        assert rbo(["A", "B"], ["C", "D"]) == 0.0

    @given(st.integers(1, 30), st.floats(0.05, 0.95))
    def test_rbo_identical(self, depth, p):
        x = list(range(depth))
        assert rbo(x, x, p) == pytest.approx(1 - p ** depth, abs=1e-12)

    @given(st.lists(st.integers(0, 100).map(float), min_size=2, max_size=8),
           st.lists(st.floats(0, 100), min_size=8, max_size=8))
    def test_monotone_invariance(self, scores, gains):
        labels = list("abcdefgh")[:len(scores)]
        g = dict(zip(labels, gains))
        base = rank_labels(labels, scores)
        moved = rank_labels(labels, np.exp(np.asarray(scores) / 10) * 3 + 1)
        assert moved.items == base.items
        assert ndcg(moved, g) == ndcg(base, g)
        actual = rank_labels(labels, [g[l] for l in labels]).items
        assert rbo(moved.items, actual) == rbo(base.items, actual)
        assert 0 <= ndcg(base, g) <= 1 and 0 <= rbo(base.items, actual) <= 1

    def test_mrr(self):
        assert mrr([1.0, 1.0, 1.0]) == 1.0
        assert mrr([1.0, 0.5]) == 0.75


class TestWilcoxon:
    def test_equal_samples(self):
        r = wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
        assert r.statistic == 0 and not r.significant

    def test_dominance(self):
        a = np.arange(30) + 100.0
        assert wilcoxon_signed_rank(a, np.arange(30.0)).significant

    def test_too_few_pairs(self):
        r = wilcoxon_signed_rank([10, 20, 30, 40, 50], [0, 0, 0, 0, 0])
        assert not r.significant

    def test_enumeration_oracle(self):
        diff = PAIRS_A - PAIRS_B
        ranks = stats.rankdata(np.abs(diff))
        w_plus = ranks[diff > 0].sum()
        w = min(w_plus, ranks.sum() - w_plus)
        null = enumerate_null(list(ranks))
        assert null.size == 2 ** 10
        p_two = 2 * np.mean(null <= w)
        res = wilcoxon_signed_rank(PAIRS_A, PAIRS_B)
        assert res.statistic == w
        assert res.significant == (p_two <= 0.05)
        # critical value agrees with the enumerated null
        c = critical_value(10)
        assert 2 * np.mean(null <= c) <= 0.05 < 2 * np.mean(null <= c + 1)

    @pytest.mark.parametrize("n,expected", [(6, 0), (7, 2), (8, 3), (9, 5), (10, 8),
                                            (20, 52), (25, 89)])
    def test_critical_table(self, n, expected):
        assert critical_value(n) == expected

    def test_large_sample_matches_scipy(self):
        rng = np.random.default_rng(3)
        a = rng.normal(0.3, 1, 40)
        b = rng.normal(0.0, 1, 40)
        ours = wilcoxon_signed_rank(a, b)
        ref = stats.wilcoxon(a, b, correction=True, method="approx")
        assert ours.statistic == ref.statistic
        assert ours.significant == (ref.pvalue <= 0.05)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            wilcoxon_signed_rank([1, 2], [1])
