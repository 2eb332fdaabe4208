import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointinfluence import ModelParams, PointSequence, SimConfig, simulate
from jointinfluence.exceptions import ConfigError, InsufficientDataError
from jointinfluence.forecasting import (
    AutoRegression,
    ForecastConfig,
    ForecastFrame,
    NaiveFrequency,
    VectorAutoRegression,
    _decayed_shares,
    baseline_ar,
    baseline_nf,
    baseline_var,
    bin_counts,
    bin_query_counts,
    compare_methods,
    jim_scores,
    predict_scores,
    qac_rank,
    query_level_scores,
    run_task,
    split_bin,
)
from jointinfluence.intensity import intensity_trace

from conftest import random_params, random_sequence


def frame_of(series):
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    return ForecastFrame(series, tuple(range(series.shape[1])), 0.0)


def hawkes_data(seed, window=300.0):
    p = ModelParams(eta=[.3, .2, .25], alpha=[1., 1., 1.],
                    mic=[[.6, .05, .05], [.05, .6, .05], [.05, .05, .6]],
                    rho=[3.] * 3, mu=[2.] * 3, phi=[1.] * 3, psi=[.5] * 3)
    seq = simulate(p, SimConfig(0, window, seed=seed))
    words = ["alpha one", "alpha two", "beta one", "gamma"]
    rng = np.random.default_rng(seed)
    texts = [words[(d + rng.integers(2)) % 4] for d in seq.events]
    return p, seq, texts


class TestBinning:
    def test_single_point(self):
        f = bin_counts(PointSequence([2.5], [1], [0], 0, 5, 2))
        assert f.series.sum() == 1 and f.series[2, 1] == 1

    def test_same_hour(self):
        f = bin_counts(PointSequence([2.1, 2.7], [0, 0], [0, 0], 0, 5, 1))
        assert f.series[2, 0] == 2

    @given(st.integers(1, 4), st.integers(0, 200), st.integers(0, 2**32 - 1))
    def test_totals(self, k, n, seed):
        seq = random_sequence(np.random.default_rng(seed), k, n)
        f = bin_counts(seq, 2.0)
        assert f.series.sum() == len(seq)
        np.testing.assert_array_equal(f.series.sum(axis=0), seq.counts())

    def test_query_counts(self):
        seq = PointSequence([0.5, 0.7, 1.5], [0, 1, 0], [1, 1, 1], 0, 2, 2)
        f = bin_query_counts(seq, ["a", "b", "a"])
        assert f.labels == ("a", "b")
        np.testing.assert_array_equal(f.series, [[1, 1], [1, 0]])


class TestJimScores:
    def test_no_history(self, rng):
        p = random_params(rng, 3)
        seq = PointSequence([], [], [], 0, 10, 3)
        np.testing.assert_array_equal(jim_scores(p, seq, 5.0), p.eta)

    def test_matches_trace(self, rng):
        p = random_params(rng, 2)
        seq = random_sequence(rng, 2, 40, horizon=20.0)
        tr = intensity_trace(p, seq, 1.0)
        for t in (3.0, 7.0, 12.0):
            row = tr.values[np.flatnonzero(tr.times == t)[0]]
            # the trace holds left limits; no point sits on an integer hour here
            np.testing.assert_allclose(jim_scores(p, seq, t), row, atol=1e-9)
            assert np.all(jim_scores(p, seq, t) >= p.eta)


class TestQueryScores:
    def test_single_query_takes_all(self):
        p = random_params(np.random.default_rng(1), 1)
        seq = PointSequence([1.0, 2.0], [0, 0], [1, 1], 0, 5, 1)
        sc = query_level_scores(p, seq, ["q", "q"], 3.0)
        assert sc == {"q": pytest.approx(jim_scores(p, seq, 3.0)[0])}

    def test_equal_counts_split(self):
        p = random_params(np.random.default_rng(2), 1)
        seq = PointSequence([1.0, 1.0 + 1e-12], [0, 0], [1, 1], 0, 5, 1)
        sc = query_level_scores(p, seq, ["a", "b"], 3.0, decay_half_life=1e9)
        lam = jim_scores(p, seq, 3.0)[0]
        assert sc["a"] == pytest.approx(lam / 2) and sc["b"] == pytest.approx(lam / 2)

    @given(st.integers(0, 2**32 - 1))
    def test_shares_normalized(self, seed):
        rng = np.random.default_rng(seed)
        seq = random_sequence(rng, 3, 50)
        texts = [f"q{rng.integers(6)}" for _ in range(len(seq))]
        for shares in _decayed_shares(seq, texts, 30.0, 24.0).values():
            assert sum(shares.values()) == pytest.approx(1.0, abs=1e-9)


class TestBaselines:
    def test_nf(self):
        f = frame_of([[0, 0], [1, 2], [3, 4]])
        np.testing.assert_array_equal(baseline_nf(f, 0), [0, 0])
        np.testing.assert_array_equal(baseline_nf(f, 2), [3, 4])
        const = frame_of(np.full((5, 2), 7.0))
        np.testing.assert_array_equal(baseline_nf(const, 3), [7, 7])

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_ar_constant(self, order):
        f = frame_of(np.full(30, 4.0))
        np.testing.assert_allclose(baseline_ar(f, order), 4.0, atol=1e-6)

    def test_ar_exact_recursion(self):
        y = [3.0]
        for _ in range(40):
            y.append(0.5 * y[-1] + 1)
        y = np.array(y)
        pred = baseline_ar(frame_of(y), order=1)
        np.testing.assert_allclose(pred[:-1, 0], 0.5 * y[:-1] + 1, atol=1e-6)

    def test_ard_ramp(self):
        y = 3.0 * np.arange(30)
        pred = baseline_ar(frame_of(y), order=2, differenced=True)
        np.testing.assert_allclose(pred[2:, 0], y[2:] + 3.0, atol=1e-6)

    def test_var_constants(self):
        Y = np.tile([2.0, 5.0], (30, 1))
        np.testing.assert_allclose(baseline_var(frame_of(Y), 1), Y, atol=1e-6)

    def test_var_exact_recursion(self):
        A = np.array([[0.4, 0.2], [0.1, 0.3]])
        c = np.array([1.0, 2.0])
        Y = [np.array([5.0, 1.0])]
        for _ in range(40):
            Y.append(A @ Y[-1] + c)
        Y = np.array(Y)
        pred = baseline_var(frame_of(Y), 1)
        np.testing.assert_allclose(pred[:-1], Y[:-1] @ A.T + c, atol=1e-6)

    def test_var_reduces_to_ar(self):
        y = np.random.default_rng(0).poisson(3.0, 60).astype(float)
        np.testing.assert_allclose(baseline_var(frame_of(y), 3),
                                   baseline_ar(frame_of(y), 3), atol=1e-9)

    def test_estimator_api(self):
        Y = np.random.default_rng(1).poisson(2.0, (50, 3)).astype(float)
        est = VectorAutoRegression(order=2).fit(Y)
        assert est.get_params() == {"order": 2, "differenced": False}
        assert est.predict(Y).shape == Y.shape
        assert np.all(est.predict(Y) >= 0)
        assert np.array_equal(NaiveFrequency().fit(Y).predict(Y), Y)
        assert AutoRegression(order=1).fit(Y).predict(Y).shape == Y.shape

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            VectorAutoRegression(order=3).fit(np.ones((5, 2)))


class TestQac:
    def test_ranks(self):
        scores = {"apple pie": 5, "apple tv": 3, "apple store": 1, "apple juice": 0.5,
                  "banana": 9}
        assert qac_rank(scores, "apple", "apple pie") == 1.0
        assert qac_rank(scores, "apple", "apple juice") == 0.25
        assert qac_rank(scores, "apple", "apple watch") == 0.0


class TestRunTask:
    def test_oracle_is_perfect(self):
        _, seq, texts = hawkes_data(0)
        for task in (1, 2, 3, 4):
            run = run_task(task, "ORACLE", seq, texts)
            for metric, value, _ in run.summary:
                assert value == pytest.approx(1.0), (task, metric)

    def test_nf_constant_frame(self):
        # one point per hour, always channel 1
        seq = PointSequence(np.arange(0.5, 40), np.ones(40, int), np.ones(40), 0, 40, 2)
        run = run_task(1, "NF", seq)
        assert run.summary[0][:2] == ("accuracy", 1.0)

    def test_zero_predictor_tie_break(self):
        _, seq, _ = hawkes_data(1)
        p0 = ModelParams(eta=[0.] * 3, alpha=[1.] * 3, mic=np.zeros((3, 3)),
                         rho=[3.] * 3, mu=[1.] * 3, phi=[1.] * 3, psi=[0.] * 3)
        run = run_task(1, "JIM", seq, params=p0)
        # all-zero scores rank channel 0 first; actual top uses the same tie rule
        actual_top = [int(np.argmax(a)) for a in run.actual]
        assert run.summary[0][1] == pytest.approx(np.mean(np.array(actual_top) == 0))

    def test_nf_routes_baseline(self):
        _, seq, _ = hawkes_data(2)
        run = run_task(2, "NF", seq)
        frame = bin_counts(seq)
        for r, b in enumerate(run.bins):
            np.testing.assert_array_equal(run.predicted[r], baseline_nf(frame, b))

    def test_no_lookahead(self):
        p, seq, texts = hawkes_data(3)
        cfg = ForecastConfig()
        frame = bin_counts(seq)
        first = split_bin(frame, cfg.split_fraction)
        full = predict_scores("JIM", frame, first, cfg, p, seq)
        for r, b in enumerate([first - 1, first + 10, frame.n_bins - 2]):
            cut = seq.before(frame.bin_end(b))
            trunc = predict_scores("JIM", frame, first, cfg, p, cut)
            row = b - (first - 1)
            np.testing.assert_array_equal(trunc[row], full[row])
        for method in ("AR", "VAR"):
            full = predict_scores(method, frame, first, cfg)
            b = first + 5
            cut = ForecastFrame(np.where(np.arange(frame.n_bins)[:, None] <= b,
                                         frame.series, 0), frame.labels, frame.t0)
            trunc = predict_scores(method, cut, first, cfg)
            np.testing.assert_array_equal(trunc[b - first + 1], full[b - first + 1])

    @pytest.mark.parametrize("method", ["NF", "AR", "ARD", "VAR", "JIM"])
    def test_scores_non_negative_and_deterministic(self, method):
        p, seq, texts = hawkes_data(4)
        for task in (2, 4, 5):
            a = run_task(task, method, seq, texts, params=p)
            b = run_task(task, method, seq, texts, params=p)
            assert np.all(a.predicted >= 0)
            assert a.rows == b.rows and a.summary == b.summary

    def test_qac_task(self):
        p, seq, texts = hawkes_data(5)
        run = run_task(5, "JIM", seq, texts, params=p)
        name, value, n = run.summary[0]
        assert name == "mrr" and 0 <= value <= 1 and n > 0

    def test_compare(self):
        p, seq, texts = hawkes_data(6)
        a = run_task(2, "NF", seq)
        b = run_task(2, "JIM", seq, params=p)
        names = [name for name, _ in compare_methods(a, b)]
        assert names == ["ndcg", "rbo"]

    def test_errors(self):
        _, seq, texts = hawkes_data(7)
        with pytest.raises(ConfigError):
            run_task(6, "NF", seq)
        with pytest.raises(ConfigError):
            run_task(1, "XYZ", seq)
        with pytest.raises(ConfigError):
            run_task(3, "NF", seq)
        with pytest.raises(ConfigError):
            run_task(1, "JIM", seq)
        with pytest.raises(ConfigError):
            ForecastConfig(split_fraction=1.0)
