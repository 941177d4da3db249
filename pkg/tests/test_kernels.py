"""Smoothing kernels: Langevin discretization, Metropolis, Glauber, Poissonization."""

import math

import numpy as np
import pytest
import scipy.linalg

from smcmix.core import DensitySpec, FiniteChain
from smcmix.kernels import (
    KernelSpec,
    default_step_size,
    glauber_transition_matrix,
    mh_evolve,
    mh_step,
    mh_transition_matrix,
    poissonized_evolve,
    ula_evolve,
)

STANDARD_NORMAL = DensitySpec(
    log_density=lambda x: -0.5 * np.sum(np.atleast_2d(x) ** 2, axis=-1),
    grad_log_density=lambda x: -np.asarray(x, dtype=float),
)


def discrete_stationary_variance(h: float) -> float:
    # X <- (1-h) X + sqrt(2h) xi is AR(1) with variance 2h / (1 - (1-h)^2)
    return 2.0 * h / (1.0 - (1.0 - h) ** 2)


class TestUla:
    def test_zero_time_returns_input(self, rng):
        x = rng.normal(size=(7, 3))
        out = ula_evolve(STANDARD_NORMAL, x, t=0.0, h=0.1, rng=rng)
        np.testing.assert_array_equal(out, x)

    def test_ar1_stationary_variance(self, rng):
        h = 0.1
        exact = discrete_stationary_variance(h)
        n = 20000
        x = rng.normal(scale=math.sqrt(exact), size=(n, 1))  # start in stationarity
        out = ula_evolve(STANDARD_NORMAL, x, t=30.0, h=h, rng=rng)
        est = out.var()
        se = exact * math.sqrt(2.0 / n)
        assert abs(est - exact) <= 3 * se

    def test_mean_zero_after_long_run(self, rng):
        n = 100_000
        x = np.zeros((n, 1))
        out = ula_evolve(STANDARD_NORMAL, x, t=10.0, h=0.01, rng=rng)
        se = out.std() / math.sqrt(n)
        assert abs(out.mean()) <= 3 * se

    def test_variance_approaches_target_as_h_shrinks(self, rng):
        hs = [0.1, 0.05, 0.01]
        estimates, ses = [], []
        n = 150_000
        for h in hs:
            exact = discrete_stationary_variance(h)
            x = rng.normal(scale=math.sqrt(exact), size=(n, 1))
            out = ula_evolve(STANDARD_NORMAL, x, t=5.0, h=h, rng=rng)
            estimates.append(out.var())
            ses.append(exact * math.sqrt(2.0 / n))
        for est, se, h in zip(estimates, ses, hs):
            assert abs(est - discrete_stationary_variance(h)) <= 4 * se
        # monotone approach to the target variance 1 within statistical error
        assert estimates[0] > estimates[1] - 2 * (ses[0] + ses[1])
        assert estimates[1] > estimates[2] - 2 * (ses[1] + ses[2])
        assert abs(estimates[2] - 1.0) < 0.02

    def test_requires_gradient(self, rng):
        spec = DensitySpec(log_density=lambda x: np.zeros(len(np.atleast_2d(x))))
        with pytest.raises(ValueError, match="gradient"):
            ula_evolve(spec, np.zeros((2, 1)), t=1.0, h=0.1, rng=rng)

    def test_nonfinite_gradient_reports_state(self, rng):
        spec = DensitySpec(
            log_density=lambda x: np.zeros(len(np.atleast_2d(x))),
            grad_log_density=lambda x: np.full_like(np.asarray(x, dtype=float), np.inf),
        )
        with pytest.raises(FloatingPointError, match="non-finite gradient"):
            ula_evolve(spec, np.array([[1.0, 2.0]]), t=1.0, h=0.1, rng=rng)

    def test_default_step_size(self):
        assert default_step_size(1.0) == pytest.approx(0.05)
        assert default_step_size(10.0) == pytest.approx(0.005)
        assert default_step_size(0.2) == pytest.approx(0.05)


class TestMetropolis:
    def test_uniform_density_always_accepts(self, rng):
        flat = DensitySpec(log_density=lambda x: np.zeros(len(np.atleast_2d(x))))
        x = np.zeros((500, 2))
        out = mh_step(flat, x, proposal_scale=0.7, rng=rng)
        assert np.all(np.any(out != x, axis=1))

    def test_higher_density_proposals_always_accepted(self, rng):
        # far in the tail, inward proposals are uphill and must always be
        # taken, so the inward-move fraction equals the inward-proposal
        # probability of exactly one half
        n = 20_000
        x = np.full((n, 1), 30.0)
        out = mh_step(STANDARD_NORMAL, x, proposal_scale=0.05, rng=rng)
        inward = np.mean(out[:, 0] < 30.0)
        se = 0.5 / math.sqrt(n)
        assert abs(inward - 0.5) <= 3 * se

    def test_two_state_long_run_frequencies(self, rng):
        pmf = np.array([0.25, 0.75])
        chain = mh_transition_matrix(pmf)
        n = 10_000
        states = poissonized_evolve(chain, np.zeros(n, dtype=np.int64), t=25.0, rng=rng)
        freq = np.bincount(states, minlength=2) / n
        se = math.sqrt(pmf[0] * pmf[1] / n)
        assert abs(freq[0] - pmf[0]) <= 3 * se

    def test_finite_chain_reversible_entrywise(self, rng):
        pmf = rng.random(8) + 0.1
        pmf /= pmf.sum()
        chain = mh_transition_matrix(pmf)
        flux = chain.pi[:, None] * chain.P
        assert np.max(np.abs(flux - flux.T)) <= 1e-13
        assert chain.reversible

    def test_poissonized_evolution_moves_particles(self, rng):
        x = np.zeros((300, 1))
        out = mh_evolve(STANDARD_NORMAL, x, t=3.0, proposal_scale=1.0, rng=rng)
        assert np.mean(out != 0.0) > 0.8


class TestGlauber:
    def test_d1_uniform_offdiagonals_are_half(self):
        chain = glauber_transition_matrix(np.array([0.5, 0.5]), 1)
        np.testing.assert_allclose(chain.P, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_rows_sum_to_one(self, rng):
        pmf = rng.random(16) + 0.05
        pmf /= pmf.sum()
        chain = glauber_transition_matrix(pmf, 4)
        np.testing.assert_allclose(chain.P.sum(axis=1), 1.0, atol=1e-14)

    def test_detailed_balance_product_measure(self):
        p = 0.3
        pmf = np.array([(1 - p) * (1 - p), p * (1 - p), (1 - p) * p, p * p])
        chain = glauber_transition_matrix(pmf, 2)
        flux = chain.pi[:, None] * chain.P
        assert np.max(np.abs(flux - flux.T)) <= 1e-14

    def test_stationary_left_eigenvector(self, rng):
        pmf = rng.random(8) + 0.05
        pmf /= pmf.sum()
        chain = glauber_transition_matrix(pmf, 3)
        assert np.max(np.abs(chain.pi @ chain.P - chain.pi)) <= 1e-10

    def test_rejects_large_dimension(self):
        with pytest.raises(ValueError, match="too large"):
            glauber_transition_matrix(np.ones(2 ** 15) / 2 ** 15, 15)

    def test_only_single_flips_allowed(self):
        pmf = np.ones(8) / 8
        chain = glauber_transition_matrix(pmf, 3)
        for x in range(8):
            for y in range(8):
                if bin(x ^ y).count("1") > 1:
                    assert chain.P[x, y] == 0.0


class TestPoissonized:
    def test_zero_time_identity(self, rng):
        chain = glauber_transition_matrix(np.ones(4) / 4, 2)
        x = np.array([0, 1, 2, 3], dtype=np.int64)
        np.testing.assert_array_equal(poissonized_evolve(chain, x, 0.0, rng), x)

    def test_jump_count_mean(self, rng):
        # deterministic cycle: the endpoint state counts the jumps exactly
        size = 64
        P = np.zeros((size, size))
        P[np.arange(size), (np.arange(size) + 1) % size] = 1.0
        chain = FiniteChain(P=P, pi=np.ones(size) / size)
        t = 1.3
        n = 100_000
        states = poissonized_evolve(chain, np.zeros(n, dtype=np.int64), t, rng)
        assert states.max() < size - 1  # no wraparound, counts are exact
        se = math.sqrt(t / n)
        assert abs(states.mean() - t) <= 3 * se

    def test_law_matches_matrix_exponential(self, rng):
        chain = glauber_transition_matrix(
            0.4 * np.array([0.56, 0.14, 0.24, 0.06]) + 0.6 * np.array([0.11, 0.44, 0.09, 0.36]),
            2,
        )
        t = 1.3
        n = 100_000
        states = poissonized_evolve(chain, np.zeros(n, dtype=np.int64), t, rng)
        empirical = np.bincount(states, minlength=4) / n
        exact = scipy.linalg.expm(t * (chain.P - np.eye(4)))[0]
        tv = 0.5 * np.abs(empirical - exact).sum()
        assert tv <= 0.01

    def test_single_state_input(self, rng):
        chain = glauber_transition_matrix(np.ones(4) / 4, 2)
        out = poissonized_evolve(chain, 2, t=1.0, rng=rng)
        assert isinstance(out, int)
        assert 0 <= out < 4

    def test_jump_sampler_callable(self, rng):
        # incrementing jump sampler: endpoint counts the jumps, like the cycle
        def bump(states, rng):
            return states + 1

        t, n = 2.1, 50_000
        states = poissonized_evolve(bump, np.zeros(n, dtype=np.int64), t, rng)
        se = math.sqrt(t / n)
        assert abs(states.mean() - t) <= 3 * se


class TestKernelSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown kernel kind"):
            KernelSpec(kind="hamiltonian")

    def test_positive_knobs_required(self):
        with pytest.raises(ValueError, match="step_size"):
            KernelSpec(kind="langevin", step_size=0.0)
