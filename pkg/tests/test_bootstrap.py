import numpy as np
import pytest

import rankgarch.bootstrap as bt
from rankgarch import (
    BootstrapRun,
    FitConfig,
    ParamVector,
    Score,
    WeightScheme,
    bootstrap_distribution,
    bootstrap_replicate,
    confidence_intervals,
    draw_weights,
    fit_r_estimator,
    rank_central_sequence,
    weight_variance,
    weighted_central_sequence,
)
from rankgarch.errors import ExcessiveFailures, InsufficientReplicates, SingularInformation
from rankgarch.simulate import derive_rng


class TestWeights:
    @pytest.mark.parametrize("scheme", [WeightScheme.E, WeightScheme.U])
    def test_normalized_schemes_sum_to_n(self, scheme):
        for n in (2, 17, 1000):
            w = draw_weights(scheme, n, derive_rng(1, n))
            assert w.sum() == pytest.approx(n, abs=1e-9)
            assert np.all(w >= 0)

    def test_multinomial_support(self):
        w = draw_weights(WeightScheme.M, 3, derive_rng(2, 0))
        assert w.sum() == 3.0
        assert np.all(w == np.round(w))
        assert np.all(w >= 0)

    def test_uniform_scheme_bounds(self):
        for k in range(50):
            w = draw_weights(WeightScheme.U, 40, derive_rng(3, k))
            assert np.all(w > 1.0 / 3.0) and np.all(w < 3.0)

    def test_mean_one(self):
        w = draw_weights(WeightScheme.E, 5000, derive_rng(4, 0))
        assert w.mean() == pytest.approx(1.0, abs=1e-12)


class TestWeightVariance:
    def test_theoretical_values(self):
        assert weight_variance(WeightScheme.M, 100) == pytest.approx(0.99)
        assert weight_variance(WeightScheme.E, 10**6) == 1.0
        assert weight_variance(WeightScheme.U, 10**6) == pytest.approx(1.0 / 12.0)

    def test_empirical_all_ones_is_zero(self):
        assert weight_variance(WeightScheme.U, weights=np.ones(50)) == 0.0

    @pytest.mark.parametrize(
        "scheme,target",
        [(WeightScheme.M, 1 - 1 / 500), (WeightScheme.E, 1.0), (WeightScheme.U, 1 / 12)],
        ids=["m", "e", "u"],
    )
    def test_theory_matches_simulation(self, scheme, target):
        n, reps = 500, 2000
        firsts = np.array([draw_weights(scheme, n, derive_rng(5, k))[0] for k in range(reps)])
        assert np.var(firsts, ddof=1) == pytest.approx(target, rel=0.12)


class TestWeightedSequence:
    def test_unit_weights_degenerate_exactly(self, theta_ref, path_ref):
        w = np.ones(path_ref.size)
        for score in Score:
            a = weighted_central_sequence(theta_ref, path_ref, score, w)
            b = rank_central_sequence(theta_ref, path_ref, score)
            np.testing.assert_array_equal(a, b)

    def test_extreme_single_term_weight(self):
        theta = ParamVector.garch(0.1, 0.2, 0.5)
        x = np.array([1.0, -1.0, 2.0, -0.5, 1.0])
        n = x.size
        w = np.zeros(n)
        w[0] = n
        got = weighted_central_sequence(theta, x, Score.SIGN, w)
        # direct single-term evaluation
        from rankgarch.model import filter_variance_gradient
        from rankgarch.scores import compute_ranks, score_eval

        v, dv = filter_variance_gradient(theta, x)
        ranks = compute_ranks(x / np.sqrt(v))
        phi = score_eval(Score.SIGN, ranks / (n + 1.0))
        term = dv[0] / v[0] * (1.0 - phi[0] * x[0] / np.sqrt(v[0])) * n
        np.testing.assert_allclose(got, term / np.sqrt(n), rtol=1e-12)

    def test_exchangeability_of_weighted_sum(self):
        theta = ParamVector.garch(0.1, 0.2, 0.5)
        x = np.array([1.0, -1.0, 2.0, -0.5, 1.0, 0.7])
        from rankgarch.model import filter_variance_gradient
        from rankgarch.scores import compute_ranks, score_eval

        v, dv = filter_variance_gradient(theta, x)
        ranks = compute_ranks(x / np.sqrt(v))
        phi = score_eval(Score.WILCOXON, ranks / (x.size + 1.0))
        terms = dv / v[:, None] * (1.0 - phi * x / np.sqrt(v))[:, None]
        w = draw_weights(WeightScheme.U, x.size, derive_rng(6, 0))
        perm = np.random.default_rng(1).permutation(x.size)
        direct = (w[:, None] * terms).sum(axis=0)
        permuted = (w[perm, None] * terms[perm]).sum(axis=0)
        np.testing.assert_allclose(direct, permuted, atol=1e-12)

    def test_weight_length_guard(self, theta_ref, path_ref):
        with pytest.raises(ValueError):
            weighted_central_sequence(theta_ref, path_ref, Score.SIGN, np.ones(3))


class TestReplicates:
    def test_unit_weights_reproduce_point_estimate(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        rep = bootstrap_replicate(
            fit.theta_raw, path_ref, Score.SIGN, np.ones(path_ref.size), k_star=3, scale=fit.scale
        )
        rel = np.abs(rep.values - fit.theta.values) / np.abs(fit.theta.values)
        assert rel.max() < 1e-6

    def test_unit_weights_vdw_within_cycle_tolerance(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.VDW))
        rep = bootstrap_replicate(
            fit.theta_raw, path_ref, Score.VDW, np.ones(path_ref.size), k_star=3, scale=fit.scale
        )
        rel = np.abs(rep.values - fit.theta.values) / np.abs(fit.theta.values)
        assert rel.max() < 1e-3

    def test_rescaling_uses_original_scale(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        w = draw_weights(WeightScheme.U, path_ref.size, derive_rng(7, 0))
        raw = bootstrap_replicate(fit.theta_raw, path_ref, Score.SIGN, w, 2, scale=1.0)
        scaled = bootstrap_replicate(fit.theta_raw, path_ref, Score.SIGN, w, 2, scale=fit.scale)
        np.testing.assert_allclose(scaled.values[:2], raw.values[:2] / fit.scale, rtol=1e-14)
        assert scaled.values[2] == raw.values[2]


class TestBootstrapDistribution:
    def test_single_replicate_matches_direct_call(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        run = bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 1, k_star=2, seed=50)
        w = draw_weights(WeightScheme.U, path_ref.size, derive_rng(50, 0))
        direct = bootstrap_replicate(fit.theta_raw, path_ref, Score.SIGN, w, 2, fit.scale)
        assert run.replicates.shape == (1, 3)
        np.testing.assert_array_equal(run.replicates[0], direct.values)

    def test_bit_reproducibility(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        a = bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 25, k_star=2, seed=8)
        b = bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 25, k_star=2, seed=8)
        np.testing.assert_array_equal(a.replicates, b.replicates)
        assert a.weight_sd == b.weight_sd

    def test_seed_sensitivity_and_stability(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        a = bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 200, k_star=2, seed=1)
        b = bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 200, k_star=2, seed=2)
        assert not np.array_equal(a.replicates, b.replicates)
        # replicate means agree within 3 joint MC standard errors
        se = a.replicates.std(axis=0, ddof=1) / np.sqrt(a.replicates.shape[0])
        diff = np.abs(a.replicates.mean(axis=0) - b.replicates.mean(axis=0))
        assert np.all(diff < 3.0 * np.sqrt(2.0) * se)

    def test_schemes_give_positive_interval_lengths(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        for scheme in (WeightScheme.M, WeightScheme.U):
            run = bootstrap_distribution(fit, path_ref, Score.SIGN, scheme, 60, k_star=2, seed=3)
            ci = confidence_intervals(run, [0.9])
            widths = ci[0.9][:, 1] - ci[0.9][:, 0]
            assert np.all(widths > 0)

    def test_empirical_sigma_mode(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        run = bootstrap_distribution(
            fit, path_ref, Score.SIGN, WeightScheme.U, 30, k_star=2, seed=4, sigma_mode="empirical"
        )
        assert run.weight_sd == pytest.approx(np.sqrt(1.0 / 12.0), rel=0.2)

    def test_failure_counting_and_excess(self, path_ref, monkeypatch):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        real = bt.bootstrap_replicate
        calls = {"k": -1}

        def flaky(*args, **kwargs):
            calls["k"] += 1
            if calls["k"] % 20 == 19:
                raise SingularInformation("synthetic failure")
            return real(*args, **kwargs)

        monkeypatch.setattr(bt, "bootstrap_replicate", flaky)
        run = bt.bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 40, k_star=1, seed=5)
        assert len(run.failed) == 2
        assert run.replicates.shape[0] == 38

        def always_fail(*args, **kwargs):
            raise SingularInformation("synthetic failure")

        monkeypatch.setattr(bt, "bootstrap_replicate", always_fail)
        with pytest.raises(ExcessiveFailures):
            bt.bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 20, k_star=1, seed=5)


def _dummy_run(replicates: np.ndarray, theta: ParamVector, weight_sd: float = 1.0) -> BootstrapRun:
    return BootstrapRun(
        replicates=replicates,
        theta_hat=theta,
        scheme=WeightScheme.U,
        weight_sd=weight_sd,
        n_boot=replicates.shape[0],
        k_star=1,
        master_seed=0,
        stream_keys=list(range(replicates.shape[0])),
        failed=[],
    )


class TestConfidenceIntervals:
    def test_degenerate_replicates_zero_width(self):
        theta = ParamVector.garch(0.1, 0.2, 0.5)
        reps = np.tile(theta.values, (40, 1))
        ci = confidence_intervals(_dummy_run(reps, theta), [0.9])
        np.testing.assert_allclose(ci[0.9][:, 0], theta.values, rtol=1e-14)
        np.testing.assert_allclose(ci[0.9][:, 1], theta.values, rtol=1e-14)

    def test_symmetric_two_point_distribution(self):
        theta = ParamVector.garch(0.1, 0.2, 0.5)
        delta = np.array([0.01, 0.02, 0.03])
        reps = np.vstack([np.tile(theta.values + delta, (100, 1)), np.tile(theta.values - delta, (100, 1))])
        sd = 0.5
        ci = confidence_intervals(_dummy_run(reps, theta, weight_sd=sd), [0.9, 0.95])
        for level in (0.9, 0.95):
            np.testing.assert_allclose(ci[level][:, 0], theta.values - delta / sd, rtol=1e-12)
            np.testing.assert_allclose(ci[level][:, 1], theta.values + delta / sd, rtol=1e-12)

    def test_nested_levels(self, path_ref):
        fit = fit_r_estimator(path_ref, FitConfig(score=Score.SIGN))
        run = bootstrap_distribution(fit, path_ref, Score.SIGN, WeightScheme.U, 80, k_star=2, seed=6)
        ci = confidence_intervals(run, [0.5, 0.9, 0.99])
        for j in range(3):
            assert ci[0.5][j, 0] >= ci[0.9][j, 0] >= ci[0.99][j, 0]
            assert ci[0.5][j, 1] <= ci[0.9][j, 1] <= ci[0.99][j, 1]

    def test_insufficient_replicates(self):
        theta = ParamVector.garch(0.1, 0.2, 0.5)
        reps = np.tile(theta.values, (10, 1))
        with pytest.raises(InsufficientReplicates):
            confidence_intervals(_dummy_run(reps, theta), [0.9])

    def test_level_guard(self):
        theta = ParamVector.garch(0.1, 0.2, 0.5)
        reps = np.tile(theta.values, (30, 1))
        with pytest.raises(ValueError):
            confidence_intervals(_dummy_run(reps, theta), [1.5])
