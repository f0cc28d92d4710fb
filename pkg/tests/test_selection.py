"""Posterior summarization, SNC thresholding, refit likelihood, selection."""

from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.stats import lognorm, norm

from aftgl.data import GroupStructure, SurvivalDataset
from aftgl.dists import RngStream
from aftgl.sampler import SamplerConfig, run_chains
from aftgl.selection import (
    CandidateModel,
    CoefficientTable,
    SelectionError,
    candidate_grid,
    compute_snc,
    refit_univariable_aft,
    selection_metrics,
    snc_bic_select,
    summarize_posterior,
)
from aftgl.selection import _refit_objective

from helpers import fd_grad, rel_err


def make_dataset(rng, n=200, beta=(1.0, -0.5), sigma=0.6, censor_frac=0.3,
                 truncate_frac=0.0, q=0):
    """Exact + right-censored log-normal data with optional left truncation."""
    p = len(beta)
    X = rng.standard_normal((n, p))
    Z = rng.standard_normal((n, q))
    gamma = np.full(q, -0.4)
    eta = 1.0 + X @ np.asarray(beta, dtype=float) + (Z @ gamma if q else 0.0)
    t = np.exp(eta + sigma * rng.standard_normal(n))
    lower = t.copy()
    upper = t.copy()
    if censor_frac > 0:
        cstar = np.quantile(t, 1.0 - censor_frac)
        cens = t > cstar
        lower[cens] = cstar
        upper[cens] = np.inf
    entry = np.zeros(n)
    if truncate_frac > 0:
        entry = rng.uniform(0.0, truncate_frac * lower)
    groups = GroupStructure.singletons(p)
    d = SurvivalDataset(entry=entry, lower=lower, upper=upper, X=X, Z=Z, groups=groups,
                        x_names=tuple(f"x{j+1}" for j in range(p)),
                        z_names=tuple(f"z{j+1}" for j in range(q)))
    return d, eta


class TestComputeSnc:
    def test_all_zero_draws(self):
        assert compute_snc(np.zeros(100)) == 0.0

    def test_standard_normal_tail(self):
        # [DERIVED] P(|X| > sd) for standard normal draws is 2(1 - Phi(1))
        rng = RngStream(301).generator()
        snc = compute_snc(rng.standard_normal(10 ** 6))
        assert abs(snc - 2.0 * (1.0 - norm.cdf(1.0))) < 0.005

    def test_far_from_zero_is_one(self):
        rng = RngStream(302).generator()
        assert compute_snc(10.0 + 0.01 * rng.standard_normal(1000)) == 1.0

    def test_too_few_draws(self):
        with pytest.raises(ValueError, match="at least 2"):
            compute_snc(np.array([1.0]))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_sign_flip_invariance(self, seed):
        rng = RngStream(303, seed).generator()
        draws = rng.standard_normal(500) + rng.uniform(-2, 2)
        assert compute_snc(draws) == compute_snc(-draws)


class TestCandidateGrid:
    def test_two_coefficient_enumeration(self):
        cands = candidate_grid(np.array([0.9, 0.4]), M=10)
        assert [c.support for c in cands] == [(0, 1), (0,), ()]
        assert (cands[0].kappa_lo, cands[0].kappa_hi) == (0.1, pytest.approx(0.3))
        assert (cands[1].kappa_lo, cands[1].kappa_hi) == (0.4, pytest.approx(0.8))
        assert (cands[2].kappa_lo, cands[2].kappa_hi) == (0.9, 1.0)

    def test_all_zero_snc_single_empty_candidate(self):
        cands = candidate_grid(np.zeros(5), M=1000)
        assert len(cands) == 1
        assert cands[0].support == ()
        assert cands[0].p_m == 0

    def test_default_grid_size(self):
        import inspect

        assert inspect.signature(candidate_grid).parameters["M"].default == 1000

    def test_bad_grid_size(self):
        with pytest.raises(ValueError, match="at least 1"):
            candidate_grid(np.array([0.5]), M=0)

    @given(
        snc=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=12),
        M=st.integers(min_value=1, max_value=200),
    )
    @settings(max_examples=80, deadline=None)
    def test_supports_nested_nonincreasing(self, snc, M):
        cands = candidate_grid(np.array(snc), M=M)
        assert len(cands) >= 1
        for a, b in zip(cands, cands[1:]):
            assert set(b.support) < set(a.support)
            assert b.kappa_lo > a.kappa_hi
        # kappa ranges tile the grid exactly
        assert cands[0].kappa_lo == pytest.approx(1.0 / M)
        assert cands[-1].kappa_hi == 1.0


class TestRefitObjectiveGradient:
    def test_matches_finite_differences(self):
        # [DERIVED] central finite differences on 30 random states
        rng = RngStream(304).generator()
        worst = 0.0
        for _ in range(30):
            d, eta = make_dataset(rng, n=40, censor_frac=0.35, truncate_frac=0.5)
            w = eta + 0.1 * rng.standard_normal(d.n)
            log_lower = np.log(d.lower)
            with np.errstate(divide="ignore"):
                log_upper = np.log(d.upper)
                log_entry = np.log(d.entry)
            args = (w, log_lower, log_upper, log_entry, d.lower == d.upper, d.entry > 0)
            x = np.array([rng.uniform(-1, 2), rng.uniform(-1, 2), rng.uniform(-1.0, 0.5)])
            f, g = _refit_objective(x, *args)
            g_fd = fd_grad(lambda v: _refit_objective(v, *args)[0], x)
            worst = max(worst, rel_err(g, g_fd))
        assert worst < 1e-5


class TestRefitUnivariable:
    def test_empty_predictor_matches_direct_two_parameter_mle(self):
        # independent oracle: derivative-free optimization of a scipy.stats
        # lognormal likelihood in (intercept, log scale) only
        rng = RngStream(305).generator()
        d, _ = make_dataset(rng, n=120, censor_frac=0.3, truncate_frac=0.4)
        res = refit_univariable_aft(np.zeros(d.n), d)

        cens = ~np.isfinite(d.upper)
        trunc = d.entry > 0

        def nll(params):
            a, ls = params
            s = np.exp(ls)
            scale = np.exp(a)
            ll = np.sum(lognorm.logpdf(d.lower[~cens], s, scale=scale))
            ll += np.sum(lognorm.logsf(d.lower[cens], s, scale=scale))
            ll -= np.sum(lognorm.logsf(d.entry[trunc], s, scale=scale))
            return -ll

        direct = minimize(nll, np.array([np.mean(np.log(d.lower)), 0.0]),
                          method="Nelder-Mead",
                          options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
        assert abs(res.loglik - (-direct.fun)) < 1e-6

    def test_slope_recovery_on_true_predictor(self):
        # [DERIVED] with w equal to the generating linear predictor the
        # refit slope is a consistent estimate of 1
        rng = RngStream(306).generator()
        d, eta = make_dataset(rng, n=1000, beta=(1.2, -0.8, 0.5), sigma=0.5,
                              censor_frac=0.3)
        res = refit_univariable_aft(eta, d)
        assert 0.8 < res.slope < 1.2
        assert 0.35 < res.scale < 0.7

    def test_maximality_over_truth(self):
        rng = RngStream(307).generator()
        sigma = 0.5
        d, eta = make_dataset(rng, n=300, sigma=sigma, censor_frac=0.25)
        res = refit_univariable_aft(eta, d)
        log_lower = np.log(d.lower)
        with np.errstate(divide="ignore"):
            log_upper = np.log(d.upper)
            log_entry = np.log(d.entry)
        args = (eta, log_lower, log_upper, log_entry, d.lower == d.upper, d.entry > 0)
        at_truth = -_refit_objective(np.array([0.0, 1.0, np.log(sigma)]), *args)[0]
        assert res.loglik >= at_truth - 1e-9

    def test_rejects_bad_predictor(self):
        rng = RngStream(308).generator()
        d, _ = make_dataset(rng, n=30)
        with pytest.raises(ValueError, match="finite"):
            refit_univariable_aft(np.full(d.n, np.nan), d)
        with pytest.raises(ValueError, match="shape"):
            refit_univariable_aft(np.zeros(d.n + 1), d)


def fake_outputs(beta_chunks, gamma_chunks, x_names, z_names):
    outs = []
    for b, g in zip(beta_chunks, gamma_chunks):
        outs.append(SimpleNamespace(samples={"beta": np.asarray(b, dtype=float),
                                             "gamma": np.asarray(g, dtype=float)},
                                    meta={"x_names": x_names, "z_names": z_names}))
    return outs


class TestSummarizePosterior:
    def test_pools_chains_with_hand_computed_stats(self):
        # [DERIVED] pooled draws are (0, 2, 4, 6): mean 3, median 3,
        # sd sqrt(20/3); linear-interpolation quantiles 0.15 and 5.85
        outs = fake_outputs(
            beta_chunks=[[[0.0], [2.0]], [[4.0], [6.0]]],
            gamma_chunks=[np.zeros((2, 0)), np.zeros((2, 0))],
            x_names=("x1",), z_names=(),
        )
        s = summarize_posterior(outs)
        assert s.n_draws == 4
        assert s.beta.mean[0] == pytest.approx(3.0)
        assert s.beta.median[0] == pytest.approx(3.0)
        assert s.beta.sd[0] == pytest.approx(np.sqrt(20.0 / 3.0))
        assert s.beta.q025[0] == pytest.approx(0.15)
        assert s.beta.q975[0] == pytest.approx(5.85)
        assert s.gamma.median.shape == (0,)

    def test_quantiles_ordered_and_snc_in_range(self):
        rng = RngStream(309).generator()
        draws = rng.standard_normal((500, 4)) + np.array([0.0, 1.0, -2.0, 5.0])
        outs = fake_outputs([draws[:250], draws[250:]],
                            [rng.standard_normal((250, 1)), rng.standard_normal((250, 1))],
                            ("a", "b", "c", "d"), ("z1",))
        s = summarize_posterior(outs)
        assert np.all(s.beta.q025 <= s.beta.median)
        assert np.all(s.beta.median <= s.beta.q975)
        assert np.all((s.beta.snc >= 0) & (s.beta.snc <= 1))
        assert s.gamma.names == ("z1",)

    def test_empty_outputs(self):
        with pytest.raises(ValueError, match="no chain outputs"):
            summarize_posterior([])


def hand_summary(snc, medians, gamma_medians=(), x_names=None, z_names=None):
    """Build a PosteriorSummary directly, bypassing sampling."""
    from aftgl.selection import PosteriorSummary

    p, q = len(snc), len(gamma_medians)
    x_names = x_names or tuple(f"x{j+1}" for j in range(p))
    z_names = z_names or tuple(f"z{j+1}" for j in range(q))
    med = np.asarray(medians, dtype=float)
    gmed = np.asarray(gamma_medians, dtype=float)
    beta = CoefficientTable(names=x_names, median=med, mean=med, sd=np.ones(p),
                            q025=med - 1, q975=med + 1, snc=np.asarray(snc, dtype=float))
    gamma = CoefficientTable(names=z_names, median=gmed, mean=gmed, sd=np.ones(q),
                             q025=gmed - 1, q975=gmed + 1, snc=np.full(q, 0.5))
    return PosteriorSummary(beta=beta, gamma=gamma, n_draws=100)


class TestSncBicSelect:
    def test_criterion_arithmetic(self, monkeypatch):
        # (L, p) = (-100, 2) against (-120, 0) at n = 500:
        # -100 - 2 log 500 = -112.43 beats -120, so the 2-variable model wins
        rng = RngStream(310).generator()
        d, _ = make_dataset(rng, n=500)
        by_size = {2: -100.0, 1: -1e9, 0: -120.0}

        def stub(w, dataset):
            size = by_size[stub.sizes.pop(0)]
            return SimpleNamespace(loglik=size)

        summary = hand_summary(snc=[0.95, 0.9], medians=[1.0, -1.0])
        cands = candidate_grid(summary.beta.snc, M=10)
        stub.sizes = [c.p_m for c in cands]
        monkeypatch.setattr("aftgl.selection.refit_univariable_aft", stub)
        result = snc_bic_select(summary, d, M=10)
        assert result.winner.p_m == 2
        assert result.winner.criterion == pytest.approx(-100.0 - 2.0 * np.log(500))
        assert result.support == (0, 1)
        np.testing.assert_array_equal(result.beta, [1.0, -1.0])

    def test_equal_loglik_prefers_smaller_support(self, monkeypatch):
        rng = RngStream(311).generator()
        d, _ = make_dataset(rng, n=100)
        monkeypatch.setattr("aftgl.selection.refit_univariable_aft",
                            lambda w, dataset: SimpleNamespace(loglik=-50.0))
        summary = hand_summary(snc=[0.9, 0.5], medians=[1.0, 1.0])
        result = snc_bic_select(summary, d, M=10)
        assert result.winner.support == ()

    def test_single_candidate_selected_by_default(self):
        rng = RngStream(312).generator()
        d, _ = make_dataset(rng, n=80, censor_frac=0.2)
        summary = hand_summary(snc=[0.0, 0.0], medians=[0.3, -0.3])
        result = snc_bic_select(summary, d, M=50)
        assert len(result.candidates) == 1
        assert result.winner.support == ()
        assert np.all(result.beta == 0.0)
        assert np.isfinite(result.winner.loglik)

    def test_failed_refit_dropped_with_warning(self, monkeypatch):
        rng = RngStream(313).generator()
        d, _ = make_dataset(rng, n=100)

        def flaky(w, dataset):
            if flaky.calls == 0:
                flaky.calls += 1
                raise SelectionError("synthetic failure")
            flaky.calls += 1
            return SimpleNamespace(loglik=-10.0)

        flaky.calls = 0
        monkeypatch.setattr("aftgl.selection.refit_univariable_aft", flaky)
        summary = hand_summary(snc=[0.9, 0.4], medians=[1.0, 1.0])
        with pytest.warns(RuntimeWarning, match="dropping candidate"):
            result = snc_bic_select(summary, d, M=10)
        assert len(result.candidates) == 2

    def test_all_refits_failed(self, monkeypatch):
        rng = RngStream(314).generator()
        d, _ = make_dataset(rng, n=50)

        def broken(w, dataset):
            raise SelectionError("nope")

        monkeypatch.setattr("aftgl.selection.refit_univariable_aft", broken)
        summary = hand_summary(snc=[0.9, 0.4], medians=[1.0, 1.0])
        with pytest.warns(RuntimeWarning):
            with pytest.raises(SelectionError, match="every candidate"):
                snc_bic_select(summary, d, M=10)

    def test_shape_mismatch_rejected(self):
        rng = RngStream(315).generator()
        d, _ = make_dataset(rng, n=50)
        summary = hand_summary(snc=[0.9], medians=[1.0])
        with pytest.raises(ValueError, match="disagree"):
            snc_bic_select(summary, d, M=10)

    def test_rerun_is_deterministic(self):
        rng = RngStream(316).generator()
        d, _ = make_dataset(rng, n=150, beta=(1.5, 0.0), censor_frac=0.25)
        summary = hand_summary(snc=[0.95, 0.2], medians=[1.4, 0.05])
        a = snc_bic_select(summary, d, M=100)
        b = snc_bic_select(summary, d, M=100)
        assert a.winner == b.winner
        np.testing.assert_array_equal(a.beta, b.beta)
        assert [c.criterion for c in a.candidates] == [c.criterion for c in b.candidates]

    @pytest.mark.slow
    def test_end_to_end_single_strong_coefficient(self):
        # [DERIVED] n=400, one coefficient at 2, nine at zero: the strong
        # coefficient alone should survive thresholding plus the refit penalty
        rng = RngStream(317).generator()
        n, p = 400, 10
        X = rng.standard_normal((n, p))
        beta = np.zeros(p)
        beta[0] = 2.0
        t = np.exp(1.0 + X @ beta + 0.6 * rng.standard_normal(n))
        d = SurvivalDataset(entry=np.zeros(n), lower=t, upper=t.copy(), X=X,
                            Z=np.zeros((n, 0)), groups=GroupStructure.singletons(p),
                            x_names=tuple(f"x{j+1}" for j in range(p)))
        cfg = SamplerConfig(n_iter=4000, n_chains=2, seed=99)
        outputs, summary = run_chains(d, cfg=cfg)
        assert summary.max_psrf < 1.2
        post = summarize_posterior(outputs)
        result = snc_bic_select(post, d, M=1000)
        assert result.support == (0,)
        assert abs(result.beta[0] - 2.0) < 0.2
        assert np.all(result.beta[1:] == 0.0)


class TestSelectionMetrics:
    def test_direct_count_example(self):
        m = selection_metrics({0}, {0, 1}, p=4)
        assert (m.tpr, m.fpr, m.ppv) == (0.5, 0.0, 1.0)
        assert m.npv == pytest.approx(2.0 / 3.0)
        assert not m.empty_selection

    def test_perfect_selection(self):
        m = selection_metrics({1, 3}, {1, 3}, p=6)
        assert (m.tpr, m.fpr, m.ppv, m.npv) == (1.0, 0.0, 1.0, 1.0)

    def test_complement_selection(self):
        m = selection_metrics({2, 3}, {0, 1}, p=4)
        assert (m.tpr, m.ppv) == (0.0, 0.0)
        assert (m.fpr, m.npv) == (1.0, 0.0)

    def test_empty_selection_flagged(self):
        m = selection_metrics(set(), {0}, p=3)
        assert m.ppv == 1.0
        assert m.empty_selection
        assert m.tpr == 0.0
        assert m.npv == pytest.approx(2.0 / 3.0)

    def test_everything_selected(self):
        m = selection_metrics({0, 1, 2}, {0}, p=3)
        assert m.npv == 1.0
        assert m.fpr == 1.0

    def test_empty_truth_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            selection_metrics({0}, set(), p=3)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="0..3"):
            selection_metrics({4}, {0}, p=4)
