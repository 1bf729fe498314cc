import math

import numpy as np
import pytest

from conftest import make_excesses
from tailcast.bayes import PosteriorSample, SamplerConfig, default_prior, sample_posterior
from tailcast.errors import DomainError, LevelRuleError
from tailcast.estimation import GpFit, exceedances_from_excesses, fit_pwm
from tailcast.gpd import GpParams, LevelPair
from tailcast.predict import (
    bayes_predictive,
    extreme_level_from_c,
    extreme_level_from_return_period,
    freq_predictive,
    prediction_grid,
    predictive_interval,
    tail_equivalence_ratio,
    unconditional_tail_cdf,
)

MILAN_ML = GpFit(GpParams(-0.34, 1.65), "ml", 169, 34.0, True)
MILAN_PWM = GpFit(GpParams(-0.29, 1.59), "pwm", 169, 34.0, True)
MILAN_TAU_I = 0.9462


def collapsed_posterior(gamma, sigma, m=500, threshold=0.0):
    return PosteriorSample(
        gammas=np.full(m, gamma),
        sigmas=np.full(m, sigma),
        acceptance_rate=0.3,
        burn_in=0,
        thin=1,
        seed=0,
        ess=(float(m), float(m)),
        threshold=threshold,
        shape_support=(-0.5, math.inf),
    )


class TestFrequentistIntervals:
    def test_milan_ml_intermediate_interval(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        band = predictive_interval(model, 0.05)
        assert band.lower == pytest.approx(34.1, abs=0.1)
        assert band.upper == pytest.approx(37.5, abs=0.1)

    def test_milan_pwm_intermediate_interval(self):
        model = freq_predictive(MILAN_PWM, LevelPair.intermediate(MILAN_TAU_I))
        band = predictive_interval(model, 0.05)
        assert band.lower == pytest.approx(34.1, abs=0.1)
        assert band.upper == pytest.approx(37.6, abs=0.1)

    def test_exponential_closed_form(self):
        fit = GpFit(GpParams(0.0, 1.0), "ml", 10, 0.0, True)
        model = freq_predictive(fit, LevelPair.intermediate(0.9))
        band = predictive_interval(model, 0.05)
        assert band.lower == pytest.approx(-math.log(0.975), abs=1e-10)
        assert band.upper == pytest.approx(-math.log(0.025), abs=1e-10)
        assert band.lower == pytest.approx(0.02532, abs=1e-5)
        assert band.upper == pytest.approx(3.6889, abs=1e-4)

    def test_width_shrinks_as_alpha_grows(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        widths = [predictive_interval(model, a).width for a in (0.01, 0.05, 0.2, 0.5)]
        assert widths == sorted(widths, reverse=True)

    def test_monte_carlo_quantile_oracle(self):
        from tailcast.gpd import gp_sample, predictive_shift_scale

        p = GpParams(0.3, 1.0)
        levels = LevelPair.from_tau_star(0.95, 0.2)
        fit = GpFit(p, "ml", 100, 5.0, True)
        model = freq_predictive(fit, levels)
        m, s = predictive_shift_scale(p, levels)
        rng = np.random.default_rng(88)
        draws = 5.0 + m + s * gp_sample(p, 1_000_000, rng)
        for prob in (0.1, 0.5, 0.9):
            assert model.quantile(prob) == pytest.approx(
                float(np.quantile(draws, prob)), abs=3e-3 * max(1.0, model.quantile(prob))
            )


class TestBayesianMixture:
    def test_collapsed_mixture_matches_frequentist(self):
        levels = LevelPair.from_tau_star(0.9, 0.3)
        ps = collapsed_posterior(0.2, 1.5, threshold=4.0)
        mixture = bayes_predictive(ps, 4.0, levels)
        single = freq_predictive(GpFit(GpParams(0.2, 1.5), "ml", 100, 4.0, True), levels)
        for y in np.linspace(4.0, 20.0, 25):
            assert mixture.cdf(y) == pytest.approx(single.cdf(y), abs=1e-12)
            assert mixture.pdf(y) == pytest.approx(single.pdf(y), abs=1e-12)
        for prob in (0.05, 0.5, 0.95):
            assert mixture.quantile(prob) == pytest.approx(single.quantile(prob), abs=1e-8)

    def test_mixture_cdf_monotone(self):
        e = exceedances_from_excesses(make_excesses(0.3, 1.0, 800, seed=15), threshold=2.0)
        ps = sample_posterior(
            default_prior(fit_pwm(e).params.sigma),
            e,
            SamplerConfig(seed=5, burn_in=500, draws=1_200),
        )
        model = bayes_predictive(ps, 2.0, LevelPair.from_tau_star(0.9, 0.25))
        grid = np.linspace(model.support_lower(), model.quantile(0.999), 1_000)
        vals = model.cdf(grid)
        assert np.all(np.diff(vals) >= -1e-12)
        interior = (grid > model.quantile(0.01)) & (grid < model.quantile(0.99))
        assert np.all(np.diff(vals[interior]) > 0.0)

    def test_quantile_cdf_consistency_both_kinds(self):
        e = exceedances_from_excesses(make_excesses(0.2, 1.0, 600, seed=25), threshold=1.0)
        ps = sample_posterior(
            default_prior(fit_pwm(e).params.sigma),
            e,
            SamplerConfig(seed=2, burn_in=400, draws=1_000),
        )
        mixture = bayes_predictive(ps, 1.0, LevelPair.from_tau_star(0.9, 0.5))
        single = freq_predictive(
            GpFit(GpParams(0.2, 1.0), "ml", 100, 1.0, True),
            LevelPair.from_tau_star(0.9, 0.5),
        )
        for model, tol in ((mixture, 1e-6), (single, 1e-6)):
            for prob in np.arange(0.01, 1.0, 0.07):
                assert model.cdf(model.quantile(prob)) == pytest.approx(prob, abs=tol)

    def test_interval_mass_check(self):
        ps = collapsed_posterior(0.1, 1.0, threshold=0.0)
        model = bayes_predictive(ps, 0.0, LevelPair.intermediate(0.9))
        band = predictive_interval(model, 0.1)
        assert model.cdf(band.upper) - model.cdf(band.lower) == pytest.approx(0.9, abs=1e-4)

    def test_needs_enough_draws(self):
        with pytest.raises(DomainError):
            bayes_predictive(collapsed_posterior(0.1, 1.0, m=50), 0.0, LevelPair.intermediate(0.9))


class TestLevelRules:
    def test_endpoint_gap_published_levels_ml(self):
        for c, tau_e in ((2.0, 0.99293), (3.0, 0.99784), (4.0, 0.99907)):
            levels = extreme_level_from_c(-0.34, MILAN_TAU_I, c)
            assert levels.tau_e == pytest.approx(tau_e, abs=1e-3)
            assert levels.tau_star == pytest.approx(c ** (1.0 / -0.34), rel=1e-12)

    def test_endpoint_gap_published_levels_pwm(self):
        for c, tau_e in ((2.0, 0.99503), (3.0, 0.99877), (4.0, 0.99954)):
            levels = extreme_level_from_c(-0.29, MILAN_TAU_I, c)
            assert levels.tau_e == pytest.approx(tau_e, abs=1e-3)

    def test_gap_factor_roundtrip(self):
        levels = extreme_level_from_c(-0.27, 0.93, 3.0)
        assert levels.tau_star ** -0.27 == pytest.approx(3.0, rel=1e-12)

    def test_identity_at_unit_factor(self):
        levels = extreme_level_from_c(-0.2, 0.9, 1.0)
        assert levels.tau_e == levels.tau_i
        assert levels.tau_star == 1.0

    def test_inapplicable_for_heavy_tail(self):
        with pytest.raises(LevelRuleError):
            extreme_level_from_c(0.2, 0.9, 2.0)

    def test_return_period_ratio_exact(self):
        for T, n in ((37, 3140), (365, 3140), (1825, 10_000)):
            rule = extreme_level_from_return_period(T, n)
            assert rule.levels.tau_star == 0.25
            assert rule.levels.tau_e == pytest.approx(1.0 - 1.0 / T, rel=1e-15)

    def test_return_period_rounding(self):
        rule = extreme_level_from_return_period(365, 3140)
        assert rule.k == round(4 * 3140 / 365)  # 34.4 -> 34

    def test_return_period_infeasible(self):
        with pytest.raises(LevelRuleError):
            extreme_level_from_return_period(2 * 3140, 3140)  # 4n/T == 2


class TestTailComposition:
    def test_threshold_limit(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        just_above = unconditional_tail_cdf(model, 34.0 + 1e-9)
        assert just_above == pytest.approx(MILAN_TAU_I, abs=1e-6)

    def test_tends_to_one(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        assert unconditional_tail_cdf(model, 38.8) > 0.999

    def test_below_threshold_rejected(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        with pytest.raises(DomainError):
            unconditional_tail_cdf(model, 33.0)

    def test_requires_unit_ratio(self):
        model = freq_predictive(MILAN_ML, LevelPair.from_tau_star(MILAN_TAU_I, 0.5))
        with pytest.raises(DomainError):
            unconditional_tail_cdf(model, 35.0)

    def test_matches_true_law_on_exact_tail(self):
        # true GP tail: composed cdf equals the unconditional cdf above t
        from tailcast.gpd import gp_cdf, threshold_shift

        p = GpParams(0.3, 1.0)
        tau_i = 0.95
        t = np.quantile(make_excesses(0.3, 1.0, 400_000, seed=61), tau_i)
        fit = GpFit(threshold_shift(p, float(t)), "ml", 100, float(t), True)
        model = freq_predictive(fit, LevelPair.intermediate(tau_i))
        for y in (t * 1.05, t * 1.3, t * 2.0):
            composed = unconditional_tail_cdf(model, float(y))
            assert composed == pytest.approx(gp_cdf(p, float(y)), abs=0.01)


class TestTailEquivalence:
    def test_exact_model_ratio_is_one(self):
        from tailcast.gpd import gp_quantile, threshold_shift

        p = GpParams(0.25, 1.0)
        tau_i, tau_star = 0.95, 0.2
        t = gp_quantile(p, tau_i)
        fit = GpFit(threshold_shift(p, t), "ml", 100, t, True)
        model = freq_predictive(fit, LevelPair.intermediate(tau_i))
        q_true = gp_quantile(p, 1.0 - tau_star * (1.0 - tau_i))
        assert tail_equivalence_ratio(model, q_true, tau_star) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_unit_ratio(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        q0 = model.quantile(0.0)
        assert tail_equivalence_ratio(model, q0, 1.0) == pytest.approx(1.0)


class TestGridExport:
    def test_monotone_cdf_column(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        grid = prediction_grid(model, 34.0, 38.5, 200)
        assert grid.shape == (200, 3)
        assert np.all(np.diff(grid[:, 2]) >= 0.0)

    def test_rejects_bad_range(self):
        model = freq_predictive(MILAN_ML, LevelPair.intermediate(MILAN_TAU_I))
        with pytest.raises(DomainError):
            prediction_grid(model, 35.0, 34.0, 10)
