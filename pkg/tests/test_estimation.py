import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointinfluence import ModelParams, PointSequence, SimConfig, simulate
from jointinfluence.core import pareto_sample
from jointinfluence.estimation import (
    RHO_MAX,
    MU_MIN,
    FitConfig,
    FitResult,
    fit,
    fit_marks,
    initial_params,
    parameter_norm,
    penalized_objective,
    stability_barrier,
    transform_from_unconstrained,
    transform_to_unconstrained,
)
from jointinfluence.exceptions import (
    ConfigError,
    DegenerateDataError,
    InsufficientDataError,
)
from jointinfluence.intensity import log_likelihood, spectral_radius

from conftest import one_channel, random_params

MOVIES = ModelParams(eta=[0.1961], alpha=[0.8697], mic=[[0.5]], rho=[4.9706],
                     mu=[3.0197], phi=[1.0], psi=[0.5])


def marks_seq(x):
    x = np.asarray(x, float)
    return PointSequence(np.arange(1, x.size + 1.0), np.zeros(x.size, int), x,
                         0.0, x.size + 1.0, 1)


def grid_oracle(x, rho_lo=2.0 + 1e-6, rho_hi=RHO_MAX):
    # Brute 2-D grid over (log(rho - 2), log mu), zoomed in four passes.
    a_min, a_max = math.log(rho_lo - 2), math.log(rho_hi - 2)
    a_lo, a_hi = a_min, a_max
    b_lo, b_hi = math.log(1e-3), math.log(1e4)
    for _ in range(4):
        a = np.linspace(a_lo, a_hi, 301)
        b = np.linspace(b_lo, b_hi, 301)
        R = (2 + np.exp(a))[:, None]
        M = np.exp(b)[None, :]
        logs = np.log(x[None, None, :] + M[..., None]).sum(axis=2)
        vals = x.size * np.log(R) + x.size * R * np.log(M) - (R + 1) * logs
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        da, db = (a_hi - a_lo) / 30, (b_hi - b_lo) / 30
        a_lo, a_hi = max(a[i] - da, a_min), min(a[i] + da, a_max)
        b_lo, b_hi = b[j] - db, b[j] + db
    return 2 + math.exp(a[i]), math.exp(b[j]), float(vals[i, j])


def pareto_ll(x, rho, mu):
    return float(np.sum(np.log(rho) + rho * np.log(mu) - (rho + 1) * np.log(x + mu)))


class TestFitMarks:
    def test_zero_marks_hit_bounds(self):
        rho, mu = fit_marks(marks_seq([0.0, 0.0, 0.0]), 0)
        assert rho == RHO_MAX
        assert mu == pytest.approx(MU_MIN)

    def test_recovers_sampled(self):
        x = pareto_sample(np.random.default_rng(5), 4.0, 3.0, 10_000)
        rho, mu = fit_marks(marks_seq(x), 0)
        assert abs(rho - 4) / 4 < 0.10
        assert abs(mu - 3) / 3 < 0.15

    def test_two_marks_match_grid(self):
        # Marks lighter-tailed than exponential push rho to its upper clamp.
        x = np.array([1.0, 2.0])
        rho, mu = fit_marks(marks_seq(x), 0)
        g_rho, g_mu, g_ll = grid_oracle(x)
        assert round(pareto_ll(x, rho, mu), 2) == round(g_ll, 2)
        assert round(rho, 2) == round(g_rho, 2)
        assert mu == pytest.approx(g_mu, rel=1e-2)

    def test_interior_optimum_matches_grid(self):
        x = pareto_sample(np.random.default_rng(11), 4.0, 3.0, 60)
        rho, mu = fit_marks(marks_seq(x), 0)
        g_rho, g_mu, g_ll = grid_oracle(x)
        assert 2.01 < rho < 100
        assert round(rho, 2) == pytest.approx(round(g_rho, 2), abs=0.011)
        assert round(mu, 2) == pytest.approx(round(g_mu, 2), abs=0.011)
        assert pareto_ll(x, rho, mu) >= g_ll - 1e-9

    def test_needs_two_points(self):
        with pytest.raises(InsufficientDataError):
            fit_marks(marks_seq([1.0]), 0)


class TestTransform:
    def test_roundtrip_reference(self):
        back = transform_from_unconstrained(transform_to_unconstrained(MOVIES), 1)
        np.testing.assert_allclose(back.as_vector(), MOVIES.as_vector(), rtol=1e-12)

    def test_anchors(self):
        p = one_channel(eta=1.0, rho=3.0)
        v = transform_to_unconstrained(p)
        assert v[0] == 0.0            # eta slot
        assert v[3] == 0.0            # rho slot

    @given(st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_roundtrip_property(self, k, seed):
        p = random_params(np.random.default_rng(seed), k)
        p = p.replace(phi=np.maximum(p.phi, 1e-3))
        back = transform_from_unconstrained(transform_to_unconstrained(p), k)
        np.testing.assert_allclose(back.as_vector(), p.as_vector(), rtol=1e-10)


class TestObjective:
    def seq(self):
        return simulate(one_channel(nu=0.5, psi=0.5), SimConfig(0, 100, seed=1))

    def test_no_penalty_is_likelihood(self):
        p = one_channel(nu=0.5, psi=0.5)
        s = self.seq()
        assert penalized_objective(p, s, FitConfig(reg_weight=0.0)) == log_likelihood(p, s)

    def test_norm_of_sparse_vector(self):
        v = np.zeros(13)
        v[4] = -2.5
        assert parameter_norm(v) == 2.5

    def test_norm_unsquared(self):
        p = one_channel()
        assert parameter_norm(p) == pytest.approx(np.sqrt(np.sum(p.as_vector() ** 2)))

    def test_barrier_lowers_objective(self):
        s = self.seq()
        cfg = FitConfig(reg_weight=0.0)
        ok = one_channel(nu=0.5, psi=0.5)
        bad = ok.replace(mic=[[1.5]])
        assert stability_barrier(bad, 0.99) == pytest.approx(1e6 * 0.51 ** 2)
        assert stability_barrier(ok, 0.99) == 0.0
        assert penalized_objective(bad, s, cfg) < log_likelihood(bad, s)


def simulate_one(seed, nu=0.5, window=2000.0):
    truth = ModelParams(eta=[.5], alpha=[1.], mic=[[nu]], rho=[3.], mu=[2.],
                        phi=[1.], psi=[.5])
    return truth, simulate(truth, SimConfig(0, window, seed=seed))


class TestFit:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_recovers_one_channel(self, seed):
        truth, seq = simulate_one(seed)
        r = fit(seq, FitConfig(seed=seed))
        for name in ("eta", "alpha", "mic"):
            est, true = getattr(r.params, name).ravel()[0], getattr(truth, name).ravel()[0]
            assert abs(est - true) / true < 0.3, name
        assert r.converged

    def test_no_excitation_shrinks(self):
        _, seq = simulate_one(4, nu=0.0)
        r = fit(seq, FitConfig(seed=0))
        assert spectral_radius(r.params.mic) < 0.2

    def test_improves_on_start_and_is_stable(self):
        _, seq = simulate_one(5, window=300)
        cfg = FitConfig(seed=1, restarts=1)
        r = fit(seq, cfg)
        start, _ = initial_params(seq, cfg)
        assert r.objective >= penalized_objective(start, seq, cfg)
        assert spectral_radius(r.params.mic) < cfg.stability_margin
        assert r.objective == pytest.approx(penalized_objective(r.params, seq, cfg))

    def test_deterministic(self):
        _, seq = simulate_one(6, window=300)
        a = fit(seq, FitConfig(seed=3, restarts=1))
        b = fit(seq, FitConfig(seed=3, restarts=1))
        assert a.to_json() == b.to_json()

    def test_restarts_dominate(self):
        _, seq = simulate_one(7, window=300)
        one = fit(seq, FitConfig(seed=2, restarts=0))
        more = fit(seq, FitConfig(seed=2, restarts=2))
        assert more.objective >= one.objective

    def test_two_stage_keeps_marks(self):
        truth = ModelParams(eta=[.4, .3], alpha=[1., .5], mic=[[.4, .1], [.1, .3]],
                            rho=[3., 4.], mu=[2., 1.], phi=[1., 1.], psi=[.5, .5])
        seq = simulate(truth, SimConfig(0, 300, seed=1))
        r = fit(seq, FitConfig(restarts=0, max_iters=3000))
        for j in range(2):
            assert (r.params.rho[j], r.params.mu[j]) == fit_marks(seq, j)

    def test_shared_alpha(self):
        truth = ModelParams(eta=[.4, .3], alpha=[1., .5], mic=[[.4, .1], [.1, .3]],
                            rho=[3., 4.], mu=[2., 1.], phi=[1., 1.], psi=[.5, .5])
        seq = simulate(truth, SimConfig(0, 300, seed=2))
        r = fit(seq, FitConfig(shared_alpha=True, restarts=0, max_iters=3000))
        assert r.params.alpha[0] == r.params.alpha[1]
        assert r.variant == "JIM-G"

    def test_iim_restrictions(self):
        truth = ModelParams(eta=[.4, .3], alpha=[1., .5], mic=[[.4, .1], [.1, .3]],
                            rho=[3., 4.], mu=[2., 1.], phi=[1., 1.], psi=[.5, .5])
        seq = simulate(truth, SimConfig(0, 300, seed=3))
        r = fit(seq, FitConfig.iim(restarts=0, max_iters=3000))
        p = r.params
        assert p.mic[0, 1] == 0 and p.mic[1, 0] == 0
        assert p.eta[0] == p.eta[1] and p.alpha[0] == p.alpha[1]
        np.testing.assert_array_equal(p.phi, 0.0)
        np.testing.assert_array_equal(p.psi, 1.0)
        assert r.variant == "IIM-approx"

    def test_sparse_channel_is_pinned(self):
        seq = PointSequence([1.0, 2.0, 3.0, 4.0, 5.0], [0, 0, 0, 0, 1],
                            [1.0, 2.0, 0.5, 3.0, 1.0], 0.0, 10.0, 2)
        r = fit(seq, FitConfig(restarts=0, max_iters=2000))
        assert r.params.eta[1] == pytest.approx(0.1)
        assert r.params.mic[1, 1] == 0.01

    def test_single_stage(self):
        _, seq = simulate_one(8, window=300)
        r = fit(seq, FitConfig(two_stage=False, restarts=0, max_iters=4000))
        assert r.params.rho[0] > 2

    def test_degenerate_data(self):
        with pytest.raises(DegenerateDataError):
            fit(PointSequence([1.0], [0], [1.0], 0, 2, 1))

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            FitConfig(stability_margin=1.0)
        with pytest.raises(ConfigError):
            FitConfig(tolerance=0.0)


class TestFitResult:
    def test_json_roundtrip(self):
        r = FitResult(MOVIES, objective=-123.456789012345, iterations=10,
                      converged=True)
        doc = json.loads(r.to_json())
        assert set(doc) >= {"k", "eta", "alpha", "mic", "rho", "mu", "phi", "psi",
                            "objective", "converged", "iterations"}
        assert doc["objective"] == -123.456789012
        back = FitResult.from_json(r.to_json())
        np.testing.assert_allclose(back.params.as_vector(), MOVIES.as_vector())
        assert back.to_json() == r.to_json()
