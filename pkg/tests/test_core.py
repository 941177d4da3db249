"""Domain types: mixture evaluation, gradients, ensembles, chains, ladders."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smcmix import sequences
from smcmix.core import (
    DensitySpec,
    FiniteChain,
    Ladder,
    ParticleEnsemble,
    TargetMixture,
    check_gradient,
    eval_mixture_logdensity,
    mixture_grad_logdensity,
    validate_ladder,
)
from smcmix.gaussians import GaussianComponent

# log pdf of a standard normal at its mean
LOG_PHI_0 = -0.5 * math.log(2.0 * math.pi)
# log(0.3*phi(3) + 0.7*phi(-3)) = log(phi(3)) for the symmetric two-mode target
LOG_BIMODAL_AT_0 = LOG_PHI_0 - 4.5


def scalar_normal_pdf(x, mean, var):
    return math.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2.0 * math.pi * var)


class TestMixtureLogDensity:
    def test_single_standard_normal_at_origin(self):
        m = TargetMixture.gaussian([1.0], [[0.0]], [[[1.0]]])
        assert eval_mixture_logdensity(m, np.array([0.0])) == pytest.approx(
            LOG_PHI_0, abs=1e-14
        )

    def test_two_identical_components_match_single(self):
        single = TargetMixture.gaussian([1.0], [[0.3]], [[[1.2]]])
        double = TargetMixture.gaussian([0.5, 0.5], [[0.3], [0.3]], [[[1.2]], [[1.2]]])
        x = np.array([0.7])
        assert eval_mixture_logdensity(double, x) == pytest.approx(
            eval_mixture_logdensity(single, x), abs=1e-14
        )

    def test_bimodal_value_from_scalar_arithmetic(self):
        m = TargetMixture.gaussian([0.3, 0.7], [[-3.0], [3.0]], [[[1.0]], [[1.0]]])
        expected = math.log(
            0.3 * scalar_normal_pdf(0.0, -3.0, 1.0) + 0.7 * scalar_normal_pdf(0.0, 3.0, 1.0)
        )
        got = eval_mixture_logdensity(m, np.array([0.0]))
        assert got == pytest.approx(expected, rel=1e-14)
        assert got == pytest.approx(LOG_BIMODAL_AT_0, abs=1e-12)

    def test_vectorized_batch_matches_loop(self):
        m = TargetMixture.gaussian([0.4, 0.6], [[-1.0, 0.0], [2.0, 1.0]],
                                   [np.eye(2), 0.5 * np.eye(2)])
        xs = np.random.default_rng(0).normal(size=(50, 2))
        batch = eval_mixture_logdensity(m, xs)
        singles = np.array([eval_mixture_logdensity(m, x) for x in xs])
        np.testing.assert_allclose(batch, singles, rtol=1e-14)

    def test_unnormalized_component_rejected(self):
        spec = DensitySpec(log_density=lambda x: np.zeros(np.shape(x)[0]))
        m = TargetMixture(components=(spec,), weights=np.array([1.0]))
        with pytest.raises(ValueError, match="unnormalized mixture component"):
            eval_mixture_logdensity(m, np.zeros((2, 1)))

    @given(
        weights=st.lists(st.floats(0.05, 1.0), min_size=1, max_size=4),
        means=st.lists(st.floats(-5.0, 5.0), min_size=4, max_size=4),
        x=st.floats(-6.0, 6.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_logsumexp_matches_naive_summation(self, weights, means, x):
        w = np.array(weights[: len(weights)])
        w = w / w.sum()
        mus = means[: len(w)]
        m = TargetMixture.gaussian(w, [[mu] for mu in mus], [[[1.0]]] * len(w))
        naive = sum(
            wi * scalar_normal_pdf(x, mu, 1.0) for wi, mu in zip(w, mus)
        )
        if naive <= 0:  # underflow: the log-sum-exp path is the whole point
            return
        got = eval_mixture_logdensity(m, np.array([x]))
        assert got == pytest.approx(math.log(naive), rel=1e-12)


class TestGradients:
    def test_mixture_gradient_matches_finite_differences(self, bimodal_target, rng):
        spec = DensitySpec(
            log_density=lambda x: eval_mixture_logdensity(bimodal_target, x),
            grad_log_density=lambda x: mixture_grad_logdensity(bimodal_target, x),
        )
        probes = rng.normal(scale=3.0, size=(100, 2))
        worst = check_gradient(spec, probes, rtol=1e-5, step=1e-5)
        assert worst <= 1e-5

    def test_wrong_gradient_is_caught(self):
        spec = DensitySpec(
            log_density=lambda x: -0.5 * np.sum(np.atleast_2d(x) ** 2, axis=-1),
            grad_log_density=lambda x: -2.0 * np.asarray(x),  # off by a factor 2
        )
        with pytest.raises(ValueError, match="gradient mismatch"):
            check_gradient(spec, np.ones((5, 1)))


class TestEnsembles:
    def test_fresh_ensemble_nu_scale_is_one(self):
        ens = ParticleEnsemble(1, np.zeros((4, 2)))
        assert ens.nu_scale == 1.0
        assert np.array_equal(ens.lane_ids, np.arange(4))

    def test_level_one_nu_scale_enforced(self):
        with pytest.raises(ValueError, match="nu_scale"):
            ParticleEnsemble(1, np.zeros((4, 2)), nu_scale=2.0)

    def test_lane_ids_must_match_size(self):
        with pytest.raises(ValueError, match="lane_ids"):
            ParticleEnsemble(1, np.zeros((4, 2)), lane_ids=np.arange(3))


class TestFiniteChain:
    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(ValueError, match="rows must sum to 1"):
            FiniteChain(P=np.array([[0.5, 0.4], [0.5, 0.5]]))

    def test_rejects_non_stationary_pi(self):
        P = np.array([[0.9, 0.1], [0.5, 0.5]])
        with pytest.raises(ValueError, match="not stationary"):
            FiniteChain(P=P, pi=np.array([0.5, 0.5]))

    def test_computes_stationary_and_detects_reversibility(self):
        P = np.array([[0.9, 0.1], [0.5, 0.5]])
        chain = FiniteChain(P=P)
        np.testing.assert_allclose(chain.pi @ P, chain.pi, atol=1e-12)
        assert chain.reversible  # every 2-state chain is reversible

    def test_three_cycle_is_not_reversible(self):
        P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        assert not FiniteChain(P=P).reversible


class TestValidateLadder:
    def test_identical_levels_max_ratio_one(self, finite_ladder):
        _, pmf1, _ = finite_ladder
        from smcmix.kernels import glauber_transition_matrix

        chain = glauber_transition_matrix(pmf1, 2)
        ladder = sequences.build_finite_ladder([pmf1, pmf1], [None, chain])
        report = validate_ladder(ladder, np.arange(4))
        assert report.checks[0].max_ratio == pytest.approx(1.0, abs=1e-15)
        assert not report.flagged

    def test_convolution_ladder_within_paper_bound(self, rng):
        target = TargetMixture.gaussian([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]],
                                        [np.eye(2), np.eye(2)])
        schedule = sequences.TemperingSchedule(betas=(0.25, 1.0), d=2, sigma=1.0)
        ladder = sequences.build_gaussian_convolution(target, schedule)
        probes = np.vstack([rng.normal(scale=4.0, size=(5000, 2)),
                            target.sample(rng, 5000)])
        report = validate_ladder(ladder, probes)
        noised = report.checks[0]  # the beta 0.25 -> 1.0 transition
        assert noised.bound == pytest.approx(4.0)
        assert noised.max_ratio <= 4.0 * (1 + 1e-9)
        assert not report.flagged

    def test_miset_bound_raises_flag(self, rng):
        # same ladder but with the uniform bound forced down to 1.0
        target = TargetMixture.gaussian([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]],
                                        [np.eye(2), np.eye(2)])
        schedule = sequences.TemperingSchedule(betas=(0.25, 1.0), d=2, sigma=1.0)
        built = sequences.build_gaussian_convolution(target, schedule)
        import dataclasses

        levels = tuple(dataclasses.replace(lv, ratio_bound=None) for lv in built.levels)
        ladder = Ladder(levels=levels, gamma_bound=1.0)
        probes = target.sample(rng, 2000)
        assert validate_ladder(ladder, probes).flagged

    def test_empty_probes_rejected(self, finite_ladder):
        ladder, _, _ = finite_ladder
        with pytest.raises(ValueError, match="non-empty"):
            validate_ladder(ladder, np.empty((0,), dtype=np.int64))


class TestGaussianComponent:
    def test_lambda_max_matches_eigendecomposition(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        comp = GaussianComponent([0.0, 0.0], cov)
        assert comp.lambda_max == pytest.approx(np.linalg.eigvalsh(cov)[-1], abs=1e-10)

    def test_rejects_non_spd_covariance(self):
        with pytest.raises(ValueError, match="positive definite"):
            GaussianComponent([0.0, 0.0], np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_logpdf_matches_scalar_formula(self):
        comp = GaussianComponent([1.5], [[0.7]])
        x = 0.3
        assert comp.logpdf(np.array([x])) == pytest.approx(
            math.log(scalar_normal_pdf(x, 1.5, 0.7)), rel=1e-14
        )
