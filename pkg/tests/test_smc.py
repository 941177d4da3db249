"""The sampler: resampling law, determinism, estimators, and their statistics."""

import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from smcmix import sequences
from smcmix.core import DegenerateWeightsError, ParticleEnsemble, TargetMixture
from smcmix.kernels import glauber_transition_matrix
from smcmix.oracle import semigroup
from smcmix.smc import (
    SmcConfig,
    mse_over_runs,
    multinomial_resample,
    nu_estimate,
    replicate_seed,
    run_replicates,
    run_smc,
)
from tests.conftest import two_level_finite_ladder


def indicator_state0(x):
    return (np.asarray(x) == 0).astype(float)


def finite_config(ladder, n_particles=64, seed=7, f=indicator_state0):
    return SmcConfig(ladder=ladder, n_particles=n_particles, master_seed=seed, estimand=f)


class TestMultinomialResample:
    def test_point_mass(self, rng):
        np.testing.assert_array_equal(
            multinomial_resample([1.0, 0.0, 0.0], 5, rng), np.zeros(5, dtype=np.int64)
        )

    def test_uniform_chi_square(self, rng):
        draws = multinomial_resample(np.ones(5), 100_000, rng)
        counts = np.bincount(draws, minlength=5)
        assert stats.chisquare(counts).pvalue > 0.01

    def test_one_three_weights_frequency(self, rng):
        n = 100_000
        draws = multinomial_resample([1.0, 3.0], n, rng)
        freq = draws.mean()  # frequency of index 1
        se = math.sqrt(0.75 * 0.25 / n)
        assert abs(freq - 0.75) <= 3 * se

    @pytest.mark.parametrize(
        "weights", [[0.0, 0.0], [1.0, -0.5], [np.nan, 1.0], [np.inf, 1.0]]
    )
    def test_degenerate_weights_rejected(self, weights, rng):
        with pytest.raises(DegenerateWeightsError, match="degenerate weights"):
            multinomial_resample(weights, 3, rng)


class TestDeterminism:
    def test_identical_config_bit_identical_result(self, finite_ladder):
        ladder, _, _ = finite_ladder
        config = finite_config(ladder)
        a, b = run_smc(config), run_smc(config)
        assert a.eta_estimate == b.eta_estimate
        assert a.nu_estimate == b.nu_estimate
        assert a.ess_per_level == b.ess_per_level
        assert a.weight_sums_per_level == b.weight_sums_per_level
        np.testing.assert_array_equal(
            a.final_ensemble.particles, b.final_ensemble.particles
        )

    def test_different_seeds_differ(self, finite_ladder):
        ladder, _, _ = finite_ladder
        a = run_smc(finite_config(ladder, seed=1))
        b = run_smc(finite_config(ladder, seed=2))
        assert not np.array_equal(a.final_ensemble.particles, b.final_ensemble.particles)

    def test_replicate_seeds_are_stable(self):
        assert replicate_seed(123, 0) == replicate_seed(123, 0)
        assert replicate_seed(123, 0) != replicate_seed(123, 1)
        assert replicate_seed(123, 5) != replicate_seed(124, 5)


class TestExchangeability:
    def test_permuted_ensemble_reproduces_run(self, bimodal_target, rng):
        ladder = sequences.build_power_tempering(
            bimodal_target, sequences.geometric_schedule(4, 0.1, 2), time_budget=0.5
        )
        config = SmcConfig(
            ladder=ladder, n_particles=256, master_seed=3,
            estimand=lambda x: (np.atleast_2d(x)[:, 0] > 0).astype(float),
        )
        ens = sequences.sample_initial(ladder, 256, np.random.default_rng(50))
        perm = rng.permutation(256)
        shuffled = ParticleEnsemble(
            1, ens.particles[perm], lane_ids=ens.lane_ids[perm],
            init_acceptance_rate=ens.init_acceptance_rate,
        )
        a = run_smc(config, initial_ensemble=ens)
        b = run_smc(config, initial_ensemble=shuffled)
        assert a.eta_estimate == b.eta_estimate
        np.testing.assert_array_equal(
            a.final_ensemble.particles, b.final_ensemble.particles
        )

    def test_single_level_permutation(self, finite_ladder, rng):
        ladder, pmf1, _ = finite_ladder
        single = sequences.build_finite_ladder([pmf1], [None])
        config = finite_config(single, n_particles=128)
        ens = sequences.sample_initial(single, 128, np.random.default_rng(8))
        perm = rng.permutation(128)
        shuffled = ParticleEnsemble(1, ens.particles[perm], lane_ids=ens.lane_ids[perm])
        a = run_smc(config, initial_ensemble=ens)
        b = run_smc(config, initial_ensemble=shuffled)
        assert a.eta_estimate == b.eta_estimate
        np.testing.assert_array_equal(
            a.final_ensemble.particles, b.final_ensemble.particles
        )


class TestEstimators:
    def test_single_level_is_plain_monte_carlo(self, finite_ladder):
        ladder, pmf1, _ = finite_ladder
        single = sequences.build_finite_ladder([pmf1], [None])
        config = finite_config(single, n_particles=512, seed=21)
        result = run_smc(config)
        # no resampling, no smoothing: eta is the mean over the initializer draw
        expected = indicator_state0(result.final_ensemble.particles).mean()
        assert result.eta_estimate == pytest.approx(expected, abs=1e-15)
        assert result.nu_estimate == result.eta_estimate  # empty product
        assert result.ess_per_level == ()

    @pytest.mark.parametrize("c", [3.0, 0.5, -2.25, 0.3, 1.0 / 7.0])
    def test_constant_estimand_exact(self, finite_ladder, c):
        ladder, _, _ = finite_ladder
        config = finite_config(ladder, n_particles=37,
                               f=lambda x, _c=c: np.full(np.shape(x)[0], _c))
        assert run_smc(config).eta_estimate == c

    def test_ess_range_and_degenerate_identity_ladder(self, finite_ladder):
        ladder, pmf1, _ = finite_ladder
        chain1 = glauber_transition_matrix(pmf1, 2)
        identity = sequences.build_finite_ladder([pmf1, pmf1], [None, chain1], 0.0)
        result = run_smc(finite_config(identity, n_particles=50))
        assert result.ess_per_level == (50.0,)
        result2 = run_smc(finite_config(ladder, n_particles=50))
        assert all(1.0 <= e <= 50.0 for e in result2.ess_per_level)

    def test_degenerate_weights_name_the_level(self):
        pmf1 = np.array([0.5, 0.5, 0.0, 0.0])
        pmf2 = np.array([0.0, 0.0, 0.5, 0.5])
        chain2 = np.tile(pmf2, (4, 1))
        from smcmix.core import FiniteChain

        ladder = sequences.build_finite_ladder(
            [pmf1, pmf2], [None, FiniteChain(P=chain2, pi=pmf2)]
        )
        with pytest.raises(DegenerateWeightsError, match="level 2"):
            run_smc(finite_config(ladder))

    def test_one_dim_two_mode_recovers_tail_mass(self):
        target = TargetMixture.gaussian([0.25, 0.75], [[-2.0], [2.0]],
                                        [[[1.0]], [[1.0]]])
        ladder = sequences.build_power_tempering(
            target, sequences.geometric_schedule(5, 0.1, 1), time_budget=0.5
        )
        config = SmcConfig(
            ladder=ladder, n_particles=400, master_seed=31,
            estimand=lambda x: (np.atleast_2d(x)[:, 0] > 0).astype(float),
        )
        etas = np.array([r.eta_estimate for r in run_replicates(config, 60)])
        exact = 0.25 * stats.norm.cdf(-2.0) + 0.75 * stats.norm.sf(-2.0)
        se = etas.std(ddof=1) / math.sqrt(len(etas))
        assert abs(etas.mean() - exact) <= 3 * se

    def test_eta_unbiased_on_finite_ladder(self, finite_ladder):
        ladder, _, pmf2 = finite_ladder
        config = finite_config(ladder, n_particles=64, seed=17)
        etas = np.array([r.eta_estimate for r in run_replicates(config, 2000)])
        exact = float(pmf2[0])
        se = etas.std(ddof=1) / math.sqrt(len(etas))
        assert abs(etas.mean() - exact) <= 3 * se


class TestNuEstimator:
    def test_unit_function_unbiased(self, finite_ladder):
        ladder, _, _ = finite_ladder
        config = finite_config(ladder, n_particles=32, seed=5,
                               f=lambda x: np.ones(np.shape(x)[0]))
        nus = np.array([r.nu_estimate for r in run_replicates(config, 4000)])
        se = nus.std(ddof=1) / math.sqrt(len(nus))
        assert abs(nus.mean() - 1.0) <= 3 * se

    def test_general_function_unbiased(self, finite_ladder):
        ladder, _, pmf2 = finite_ladder
        config = finite_config(ladder, n_particles=32, seed=6)
        nus = np.array([r.nu_estimate for r in run_replicates(config, 4000)])
        exact = float(pmf2[0])
        se = nus.std(ddof=1) / math.sqrt(len(nus))
        assert abs(nus.mean() - exact) <= 3 * se

    def test_missing_normalizers_need_correction(self, bimodal_target):
        ladder = sequences.build_power_tempering(
            bimodal_target, sequences.geometric_schedule(3, 0.2, 2), time_budget=0.3
        )
        config = SmcConfig(
            ladder=ladder, n_particles=64, master_seed=9,
            estimand=lambda x: np.ones(np.shape(x)[0]),
        )
        result = run_smc(config)
        assert result.nu_estimate is None
        with pytest.raises(ValueError, match="no Z-ratio correction"):
            nu_estimate(result)
        assert nu_estimate(result, z_ratio_correction=2.0) == pytest.approx(
            2.0 * math.prod(result.weight_sums_per_level) * result.eta_estimate
        )

    def test_recorded_nu_matches_helper(self, finite_ladder):
        ladder, _, _ = finite_ladder
        result = run_smc(finite_config(ladder))
        assert nu_estimate(result) == pytest.approx(result.nu_estimate, rel=1e-15)


def exhaustive_two_particle_mse(pmf1, pmf2, S2, f_values, exact):
    """Enumerate every history of a 2-particle, 2-level finite run.

    Initial pair ~ pmf1 x pmf1, independent multinomial ancestor choices with
    weights pmf2/pmf1, then one exact semigroup transition each.  Returns the
    exact MSE of eta = (f(y1) + f(y2)) / 2 around ``exact``.
    """
    size = pmf1.shape[0]
    g = pmf2 / pmf1
    mse = 0.0
    for x1 in range(size):
        for x2 in range(size):
            p_init = pmf1[x1] * pmf1[x2]
            total = g[x1] + g[x2]
            # ancestors are chosen independently for each slot; keep the two
            # choices distinct even when both particles share a state
            choices = ((x1, g[x1] / total), (x2, g[x2] / total))
            for a1, pa1 in choices:
                for a2, pa2 in choices:
                    for y1 in range(size):
                        for y2 in range(size):
                            p = p_init * pa1 * pa2 * S2[a1, y1] * S2[a2, y2]
                            eta = 0.5 * (f_values[y1] + f_values[y2])
                            mse += p * (eta - exact) ** 2
    return mse


class TestMseOverRuns:
    def test_constant_estimand_zero_mse(self, finite_ladder):
        ladder, _, _ = finite_ladder
        config = finite_config(ladder, n_particles=16,
                               f=lambda x: np.full(np.shape(x)[0], 0.4))
        out = mse_over_runs(config, 20, exact_value=0.4)
        assert out["mse"] == 0.0
        assert out["bias_sq"] <= 1e-30  # mean of identical etas rounds once

    def test_matches_exhaustive_enumeration(self):
        ladder, pmf1, pmf2 = two_level_finite_ladder(time_budget=0.8)
        f_values = np.array([1.0, 0.0, 0.0, 0.0])
        exact = float(pmf2 @ f_values)
        S2 = semigroup(ladder.levels[1].chain, 0.8)
        exact_mse = exhaustive_two_particle_mse(pmf1, pmf2, S2, f_values, exact)
        config = finite_config(ladder, n_particles=2, seed=40)
        out = mse_over_runs(config, 3000, exact_value=exact)
        assert abs(out["mse"] - exact_mse) <= 3 * out["mse_se"]

    def test_doubling_particles_halves_variance(self, finite_ladder):
        ladder, _, pmf2 = finite_ladder
        exact = float(pmf2[0])
        small = mse_over_runs(finite_config(ladder, n_particles=64, seed=2), 600, exact)
        large = mse_over_runs(finite_config(ladder, n_particles=128, seed=3), 600, exact)
        ratio = small["variance"] / large["variance"]
        assert 1.4 <= ratio <= 2.9


class TestMarginalConvergence:
    def test_tv_to_target_decreases_with_n(self):
        # aggressive ladder (short smoothing) so the small-N bias is visible
        ladder, _, pmf2 = two_level_finite_ladder(time_budget=0.25)
        tv = {}
        for n_particles, n_rep in ((10, 10_000), (100, 10_000), (1000, 10_000)):
            config = finite_config(ladder, n_particles=n_particles, seed=77)
            counts = np.zeros(4)
            for r in run_replicates(config, n_rep):
                counts += np.bincount(r.final_ensemble.particles, minlength=4)
            marginal = counts / counts.sum()
            tv[n_particles] = 0.5 * np.abs(marginal - pmf2).sum()
        assert tv[10] > tv[100] > tv[1000]


class TestTrajectory:
    def test_recorded_when_requested(self, finite_ladder):
        ladder, _, _ = finite_ladder
        config = dataclasses.replace(finite_config(ladder), record_trajectory=True)
        result = run_smc(config)
        assert len(result.trajectory) == ladder.n_levels
        assert run_smc(finite_config(ladder)).trajectory is None
