"""Exact finite-state verification of the decomposition, decay, single-step,
hypercontractivity and entropy inequalities.

All checks are one-sided with tolerance -1e-12: exact arithmetic would give
slack >= 0, the tolerance only absorbs floating-point roundoff.  Violations
surface the witness function (and time) that produced them.

Random test functions follow a fixed convention: i.i.d. uniform(0,1) entries
for nonnegative f, exp(standard normal) for strictly positive f, mean-zero
Gaussian entries for signed f; each is normalized to unit sup norm (the
inequalities are homogeneous, this only keeps tolerances meaningful).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from . import bounds
from .core import FiniteChain, NonReversibleChainError
from . import kernels as _kernels

__all__ = [
    "FiniteMixture",
    "CheckReport",
    "VerificationReport",
    "ConvergenceError",
    "dirichlet_form",
    "dirichlet_form_pairwise",
    "check_generator_decomposition",
    "semigroup",
    "variance_decay_check",
    "inter_intra_decomposition",
    "single_step_check",
    "hypercontractivity_check",
    "entropy_decomposition_check",
    "markov_contraction_check",
    "poincare_constant",
    "lsi_constant_estimate",
    "product_pmf",
    "glauber_mixture",
    "mh_mixture",
    "standard_glauber_mixture",
    "poissonized_fidelity_check",
    "semigroup_properties_check",
    "delta_recursion_check",
    "run_verification_suite",
]

INEQ_TOL = 1e-12
MAX_CHECK_STATES = 4096


class ConvergenceError(RuntimeError):
    """Optimizer failed to converge; carries the best iterate found."""

    def __init__(self, message: str, best_value: float, best_f: np.ndarray):
        super().__init__(message)
        self.best_value = best_value
        self.best_f = best_f


@dataclass(frozen=True, eq=False)
class FiniteMixture:
    """A mixture chain together with its component chains.

    The component stationary distributions must recombine to the mixture
    stationary distribution: sum_k w_k pi_k = pi entrywise within 1e-12.
    """

    chain: FiniteChain
    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(comps),) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1, one per component")
        recombined = sum(wi * c.pi for wi, c in zip(w, comps))
        if np.max(np.abs(recombined - self.chain.pi)) > 1e-12:
            raise ValueError("component stationary distributions do not recombine to pi")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def n_states(self) -> int:
        return self.chain.n_states

    @property
    def w_star(self) -> float:
        return float(self.weights.min())


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one inequality suite: minimum slack over all trials."""

    name: str
    passed: bool
    min_slack: float
    n_trials: int
    witness: Optional[dict] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "passed": bool(self.passed),
            "min_slack": float(self.min_slack),
            "n_trials": int(self.n_trials),
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }
        if self.witness is not None:
            out["witness"] = {k: _jsonable(v) for k, v in self.witness.items()}
        return out


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _check_size(chain: FiniteChain):
    if chain.n_states > MAX_CHECK_STATES:
        raise ValueError(f"oracle checks cap the state space at {MAX_CHECK_STATES}")


def _random_f(rng: np.random.Generator, size: int, kind: str) -> np.ndarray:
    if kind == "signed":
        f = rng.standard_normal(size)
    elif kind == "nonnegative":
        f = rng.random(size)
    elif kind == "positive":
        f = np.exp(rng.standard_normal(size))
    else:
        raise ValueError(f"unknown test-function kind {kind!r}")
    top = np.max(np.abs(f))
    return f / top if top > 0 else f


def _var(pi: np.ndarray, f: np.ndarray) -> float:
    m = float(pi @ f)
    return float(pi @ (f - m) ** 2)


def _ent(pi: np.ndarray, g: np.ndarray) -> float:
    """Ent_pi(g) = E[g log g] - E[g] log E[g] for g > 0."""
    mean = float(pi @ g)
    return float(pi @ (g * np.log(g))) - mean * math.log(mean)


def dirichlet_form(chain: FiniteChain, f) -> float:
    """<f, (I - P) f>_pi, exactly."""
    f = np.asarray(f, dtype=float)
    return float(chain.pi @ (f * (f - chain.P @ f)))


def dirichlet_form_pairwise(chain: FiniteChain, f) -> float:
    """(1/2) sum_{x,y} (f(x)-f(y))^2 pi(x) P(x,y); equals the inner-product
    form on reversible chains."""
    f = np.asarray(f, dtype=float)
    diff = f[:, None] - f[None, :]
    return float(0.5 * np.sum(chain.pi[:, None] * chain.P * diff ** 2))


def check_generator_decomposition(
    mix: FiniteMixture, trials: int, rng: np.random.Generator
) -> CheckReport:
    """E_mix(f,f) >= sum_k w_k E_k(f,f) for random signed f.

    Holds for Glauber and Metropolis constructions built from a common
    proposal; equality for a single component.
    """
    _check_size(mix.chain)
    min_slack = math.inf
    witness = None
    for _ in range(trials):
        f = _random_f(rng, mix.n_states, "signed")
        total = dirichlet_form(mix.chain, f)
        parts = sum(
            w * dirichlet_form(c, f) for w, c in zip(mix.weights, mix.components)
        )
        slack = total - parts
        if slack < min_slack:
            min_slack = slack
            if slack < -INEQ_TOL:
                witness = {"f": f, "slack": slack}
    return CheckReport(
        name="generator_decomposition",
        passed=min_slack >= -INEQ_TOL,
        min_slack=min_slack,
        n_trials=trials,
        witness=witness,
    )


def semigroup(chain: FiniteChain, t: float) -> np.ndarray:
    """e^{t(P - I)} as a dense matrix.

    Reversible chains go through the pi-symmetrized eigendecomposition;
    otherwise scipy's scaling-and-squaring Pade expm.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if chain.reversible:
        lam, rows = _symmetric_spectrum(chain)
        root = np.sqrt(chain.pi)
        weighted = rows * np.exp(t * (lam - 1.0))[None, :]
        S = (weighted @ rows.T) * (root[None, :] / root[:, None])
        return S
    return scipy.linalg.expm(t * (chain.P - np.eye(chain.n_states)))


def _symmetric_spectrum(chain: FiniteChain):
    root = np.sqrt(chain.pi)
    sym = chain.P * (root[:, None] / root[None, :])
    sym = 0.5 * (sym + sym.T)
    lam, vecs = np.linalg.eigh(sym)
    return lam, vecs


def variance_decay_check(
    mix: FiniteMixture,
    t_grid: Sequence[float],
    trials: int,
    rng: np.random.Generator,
    convexity_grid: Optional[Sequence[float]] = None,
) -> CheckReport:
    """sum_k w_k Var_{pi_k}(P_T f) <= (C*/2T) Var_pi(f), plus convexity.

    C* is the max of the exact component Poincare constants.  Convexity of
    t -> Var_pi(P_t f) is asserted through second differences on
    ``convexity_grid`` (default: 50 points on [0, max T]).
    """
    _check_size(mix.chain)
    c_star = max(poincare_constant(c) for c in mix.components)
    t_grid = [float(t) for t in t_grid]
    if convexity_grid is None:
        convexity_grid = np.linspace(0.0, max(t_grid), 50)
    semis = {t: semigroup(mix.chain, t) for t in t_grid}
    conv_semis = [semigroup(mix.chain, t) for t in convexity_grid]
    min_slack = math.inf
    min_second_diff = math.inf
    witness = None
    for _ in range(trials):
        f = _random_f(rng, mix.n_states, "signed")
        for t in t_grid:
            g = semis[t] @ f
            lhs = sum(w * _var(c.pi, g) for w, c in zip(mix.weights, mix.components))
            rhs = c_star / (2.0 * t) * _var(mix.chain.pi, f)
            slack = rhs - lhs
            if slack < min_slack:
                min_slack = slack
                if slack < -INEQ_TOL:
                    witness = {"f": f, "t": t, "slack": slack}
        curve = np.array([_var(mix.chain.pi, S @ f) for S in conv_semis])
        second = curve[2:] - 2.0 * curve[1:-1] + curve[:-2]
        worst = float(second.min()) if second.size else math.inf
        if worst < min_second_diff:
            min_second_diff = worst
            if worst < -1e-10 and witness is None:
                witness = {"f": f, "second_difference": worst}
    passed = min_slack >= -INEQ_TOL and min_second_diff >= -1e-10
    return CheckReport(
        name="variance_decay",
        passed=passed,
        min_slack=min_slack,
        n_trials=trials,
        witness=witness,
        details={"c_star": c_star, "min_second_difference": min_second_diff},
    )


def inter_intra_decomposition(
    mix: FiniteMixture, next_pmf, f, t: float
) -> dict:
    """Exact split of Var(P^t(g f)) into intra- and inter-mode parts.

    Returns {"intra", "inter", "total"} and asserts the law-of-total-variance
    identity within 1e-12, the intra bound C* gamma/(2t) mu2(f^2), and the
    inter bound (sum_i 1/w_i) mu2(f)^2 (nonnegative f).
    """
    _check_size(mix.chain)
    pi = mix.chain.pi
    next_pmf = np.asarray(next_pmf, dtype=float)
    f = np.asarray(f, dtype=float)
    gbar = next_pmf / pi
    smoothed = semigroup(mix.chain, t) @ (gbar * f) if t > 0 else gbar * f
    total = _var(pi, smoothed)
    mean = float(pi @ smoothed)
    intra = sum(w * _var(c.pi, smoothed) for w, c in zip(mix.weights, mix.components))
    inter = sum(
        w * (float(c.pi @ smoothed) - mean) ** 2
        for w, c in zip(mix.weights, mix.components)
    )
    if abs(total - intra - inter) > 1e-12:
        raise AssertionError(
            f"variance decomposition identity violated: {total - intra - inter:.3e}"
        )
    result = {"intra": intra, "inter": inter, "total": total}
    if t > 0 and np.all(f >= 0):
        gamma = float(gbar.max())
        c_star = max(poincare_constant(c) for c in mix.components)
        mu2_f2 = float(next_pmf @ f ** 2)
        mu2_f = float(next_pmf @ f)
        intra_bound = c_star * gamma / (2.0 * t) * mu2_f2
        inter_bound = float(np.sum(1.0 / mix.weights)) * mu2_f ** 2
        if intra > intra_bound + INEQ_TOL:
            raise AssertionError(f"intra-mode bound violated: {intra} > {intra_bound}")
        if inter > inter_bound + INEQ_TOL:
            raise AssertionError(f"inter-mode bound violated: {inter} > {inter_bound}")
        result.update({"intra_bound": intra_bound, "inter_bound": inter_bound})
    return result


def single_step_check(
    mix: FiniteMixture,
    next_pmf,
    trials: int,
    rng: np.random.Generator,
    t: Optional[float] = None,
    lam_target: Optional[float] = None,
) -> CheckReport:
    """||P^t(g f)||^2_{L2(mu1)} <= lam ||f||^2_{L2(mu2)} + beta mu2(f)^2.

    lam and beta come from the closed-form single-step constants with the
    exact component Poincare constants and the exact ratio bound gamma;
    ``lam_target`` solves for the t that makes lam equal it.  Nonnegative f.
    """
    _check_size(mix.chain)
    pi = mix.chain.pi
    next_pmf = np.asarray(next_pmf, dtype=float)
    gbar = next_pmf / pi
    gamma = float(gbar.max())
    c_star = max(poincare_constant(c) for c in mix.components)
    if t is None:
        if lam_target is None:
            raise ValueError("need either t or lam_target")
        t = c_star * gamma / (2.0 * lam_target)
    constants = bounds.single_step_constants(c_star, gamma, t, mix.weights)
    S = semigroup(mix.chain, t)
    min_slack = math.inf
    witness = None
    for _ in range(trials):
        f = _random_f(rng, mix.n_states, "nonnegative")
        qhat = S @ (gbar * f)
        lhs = float(pi @ qhat ** 2)
        rhs = constants.lam * float(next_pmf @ f ** 2) + constants.beta * float(
            next_pmf @ f
        ) ** 2
        slack = rhs - lhs
        if slack < min_slack:
            min_slack = slack
            if slack < -INEQ_TOL:
                witness = {"f": f, "slack": slack}
    return CheckReport(
        name="single_step",
        passed=min_slack >= -INEQ_TOL,
        min_slack=min_slack,
        n_trials=trials,
        witness=witness,
        details={"t": t, "lam": constants.lam, "beta": constants.beta, "gamma": gamma},
    )


def hypercontractivity_check(
    mix: FiniteMixture,
    p: float,
    t_grid: Sequence[float],
    trials: int,
    rng: np.random.Generator,
    c_star: Optional[float] = None,
    tol: float = 1e-9,
) -> CheckReport:
    """t -> ||P_t f||_{q(t)} / (w*)^{1/q(t)} is non-increasing for f > 0.

    q(t) = 1 + (p-1) e^{2t/C*}.  ``c_star`` defaults to the max inflated
    log-Sobolev estimate over the components, a valid upper bound which only
    weakens the verified claim.  Norms are evaluated in log space since q(t)
    grows exponentially.
    """
    _check_size(mix.chain)
    if c_star is None:
        c_star = max(
            lsi_constant_estimate(c, restarts=6, rng=rng) for c in mix.components
        )
    t_grid = sorted(float(t) for t in t_grid)
    if t_grid[0] != 0.0:
        t_grid = [0.0] + t_grid
    semis = [semigroup(mix.chain, t) for t in t_grid]
    qs = [bounds.q_of_t(p, c_star, t) for t in t_grid]
    log_pi = np.log(mix.chain.pi)
    log_wstar = math.log(mix.w_star)
    min_slack = math.inf
    witness = None
    for _ in range(trials):
        f = _random_f(rng, mix.n_states, "positive")
        curve = []
        for S, q in zip(semis, qs):
            g = S @ f
            log_norm = logsumexp(log_pi + q * np.log(g)) / q
            curve.append(math.exp(log_norm - log_wstar / q))
        curve = np.array(curve)
        drops = curve[:-1] - curve[1:]  # >= 0 when non-increasing
        worst = float(drops.min()) if len(drops) else math.inf
        if worst < min_slack:
            min_slack = worst
            if worst < -tol:
                witness = {"f": f, "t": t_grid[int(np.argmin(drops)) + 1], "slack": worst}
    return CheckReport(
        name="hypercontractivity",
        passed=min_slack >= -tol,
        n_trials=trials,
        min_slack=min_slack,
        witness=witness,
        details={"c_star": c_star, "p": p, "q_max": qs[-1]},
    )


def entropy_decomposition_check(
    mix: FiniteMixture, trials: int, rng: np.random.Generator
) -> CheckReport:
    """Ent_pi(f^2) = sum_k w_k Ent_{pi_k}(f^2) + Ent of the component means.

    An exact identity; asserted within 1e-12 for strictly positive f.
    """
    _check_size(mix.chain)
    pi = mix.chain.pi
    worst = 0.0
    witness = None
    for _ in range(trials):
        f = _random_f(rng, mix.n_states, "positive")
        g = f ** 2
        total = _ent(pi, g)
        within = sum(w * _ent(c.pi, g) for w, c in zip(mix.weights, mix.components))
        comp_means = np.array([float(c.pi @ g) for c in mix.components])
        overall = float(np.sum(mix.weights * comp_means))
        between = float(
            np.sum(mix.weights * comp_means * np.log(comp_means / overall))
        )
        err = abs(total - within - between)
        if err > worst:
            worst = err
            if err > 1e-12:
                witness = {"f": f, "error": err}
    return CheckReport(
        name="entropy_decomposition",
        passed=worst <= 1e-12,
        min_slack=-worst,
        n_trials=trials,
        witness=witness,
    )


def markov_contraction_check(
    mix: FiniteMixture, t_grid: Sequence[float]
) -> CheckReport:
    """sup-norm contraction of component density ratios under the semigroup.

    ||d(pi_i P_t)/d pi - 1||_sup <= ||d pi_i / d pi - 1||_sup for every
    component i and every t in the grid.
    """
    _check_size(mix.chain)
    pi = mix.chain.pi
    min_slack = math.inf
    witness = None
    for t in t_grid:
        S = semigroup(mix.chain, t)
        for i, comp in enumerate(mix.components):
            before = float(np.max(np.abs(comp.pi / pi - 1.0)))
            after = float(np.max(np.abs((comp.pi @ S) / pi - 1.0)))
            slack = before - after
            if slack < min_slack:
                min_slack = slack
                if slack < -INEQ_TOL:
                    witness = {"component": i, "t": t, "slack": slack}
    return CheckReport(
        name="markov_contraction",
        passed=min_slack >= -INEQ_TOL,
        min_slack=min_slack,
        n_trials=len(list(t_grid)) * len(mix.components),
        witness=witness,
    )


def poincare_constant(chain: FiniteChain) -> float:
    """Exact 1 / spectral gap of I - P on mean-zero functions.

    Requires a reversible chain; computed from the pi-symmetrized
    eigendecomposition.
    """
    if not chain.reversible:
        raise NonReversibleChainError("Poincare constant requires a reversible chain")
    lam, _ = _symmetric_spectrum(chain)
    gap = 1.0 - lam[-2] if chain.n_states > 1 else 1.0
    if gap <= 0:
        raise ValueError("chain has no spectral gap")
    return 1.0 / gap


def lsi_constant_estimate(
    chain: FiniteChain,
    restarts: int = 8,
    rng: Optional[np.random.Generator] = None,
    max_iter: int = 2000,
    rel_tol: float = 1e-10,
) -> float:
    """Upper estimate of the log-Sobolev constant sup_f Ent(f^2)/E(f,f).

    Multi-start projected gradient ascent on the L2(pi) sphere; the returned
    value is the best ratio found inflated by a safety factor 2, so
    downstream inequality checks use a valid (conservative) constant.
    Raises ConvergenceError with the best iterate when no start converges.
    """
    if not chain.reversible:
        raise NonReversibleChainError("log-Sobolev estimate requires a reversible chain")
    if rng is None:
        rng = np.random.default_rng(0)
    pi = chain.pi
    size = chain.n_states

    def ratio_and_grad(f):
        g = f ** 2
        mean = float(pi @ g)
        ent = float(pi @ (g * np.log(np.maximum(g, 1e-300)))) - mean * math.log(mean)
        drift = f - chain.P @ f
        energy = float(pi @ (f * drift))
        if energy < 1e-14:
            return None
        grad_ent = 2.0 * pi * f * np.log(np.maximum(g / mean, 1e-300))
        grad_energy = 2.0 * pi * drift
        value = ent / energy
        grad = (grad_ent - value * grad_energy) / energy
        return value, grad

    best_value = 0.0
    best_f = np.ones(size)
    converged = False
    for _ in range(restarts):
        f = rng.standard_normal(size)
        f = np.abs(f) + 0.1  # positive start away from the constant direction
        f /= math.sqrt(float(pi @ f ** 2))
        step = 0.5
        prev = -math.inf
        for _ in range(max_iter):
            out = ratio_and_grad(f)
            if out is None:
                break
            value, grad = out
            if value > best_value:
                best_value, best_f = value, f.copy()
            if abs(value - prev) <= rel_tol * max(1.0, abs(value)):
                converged = True
                break
            prev = value
            candidate = f + step * grad
            norm = math.sqrt(float(pi @ candidate ** 2))
            if norm < 1e-12 or not np.all(np.isfinite(candidate)):
                step *= 0.5
                continue
            candidate /= norm
            new = ratio_and_grad(candidate)
            if new is None or new[0] < value:
                step *= 0.5
                if step < 1e-12:
                    converged = True
                    break
            else:
                f = candidate
                step *= 1.1
    if not converged:
        raise ConvergenceError(
            "log-Sobolev ascent did not converge", best_value, best_f
        )
    return 2.0 * best_value


# ---------------------------------------------------------------------------
# Standard fixtures and the composed verification suite
# ---------------------------------------------------------------------------


def product_pmf(probs) -> np.ndarray:
    """Product measure on {0,1}^d from per-coordinate success probabilities.

    Bit i of the state index is coordinate i.
    """
    probs = np.asarray(probs, dtype=float)
    pmf = np.ones(1)
    for p in probs:
        pmf = np.concatenate([pmf * (1.0 - p), pmf * p])
    return pmf


def glauber_mixture(weights, component_probs) -> FiniteMixture:
    """Glauber chains for a mixture of product measures on the hypercube."""
    weights = np.asarray(weights, dtype=float)
    pmfs = [product_pmf(p) for p in component_probs]
    d = int(np.log2(pmfs[0].shape[0]))
    mix_pmf = sum(w * p for w, p in zip(weights, pmfs))
    chain = _kernels.glauber_transition_matrix(mix_pmf, d)
    comps = tuple(_kernels.glauber_transition_matrix(p, d) for p in pmfs)
    return FiniteMixture(chain=chain, components=comps, weights=weights)


def mh_mixture(weights, component_pmfs, proposal=None) -> FiniteMixture:
    """Metropolis chains (shared proposal) for a mixture of pmfs."""
    weights = np.asarray(weights, dtype=float)
    pmfs = [np.asarray(p, dtype=float) for p in component_pmfs]
    pmfs = [p / p.sum() for p in pmfs]
    mix_pmf = sum(w * p for w, p in zip(weights, pmfs))
    chain = _kernels.mh_transition_matrix(mix_pmf, proposal)
    comps = tuple(_kernels.mh_transition_matrix(p, proposal) for p in pmfs)
    return FiniteMixture(chain=chain, components=comps, weights=weights)


def standard_glauber_mixture(d: int = 3) -> FiniteMixture:
    """The 2^d-state two-component fixture used across the default checks."""
    probs = {
        2: ([0.15, 0.8], [0.85, 0.3]),
        3: ([0.15, 0.8, 0.4], [0.85, 0.3, 0.6]),
    }[d]
    return glauber_mixture([0.3, 0.7], probs)


def poissonized_fidelity_check(
    chain: FiniteChain,
    t: float,
    n_replicates: int,
    rng: np.random.Generator,
    start: int = 0,
    tv_tol: float = 0.01,
) -> CheckReport:
    """Empirical law of the Poissonized jump chain vs the exact semigroup row."""
    _check_size(chain)
    states = _kernels.poissonized_evolve(
        chain, np.full(n_replicates, start, dtype=np.int64), t, rng
    )
    counts = np.bincount(states, minlength=chain.n_states)
    empirical = counts / n_replicates
    exact = semigroup(chain, t)[start]
    tv = 0.5 * float(np.sum(np.abs(empirical - exact)))
    return CheckReport(
        name="poissonized_semigroup",
        passed=tv <= tv_tol,
        min_slack=tv_tol - tv,
        n_trials=n_replicates,
        details={"tv": tv, "t": t, "start": start},
    )


def semigroup_properties_check(chain: FiniteChain, t: float = 1.3, s: float = 0.7) -> CheckReport:
    """Identity at t=0, stochastic rows, the semigroup law, and the ergodic limit."""
    _check_size(chain)
    size = chain.n_states
    errs = {
        "identity": float(np.max(np.abs(semigroup(chain, 0.0) - np.eye(size)))),
        "rows": float(np.max(np.abs(semigroup(chain, t).sum(axis=1) - 1.0))),
        "law": float(
            np.max(np.abs(semigroup(chain, t) @ semigroup(chain, s) - semigroup(chain, t + s)))
        ),
        "ergodic": float(np.max(np.abs(semigroup(chain, 100.0) - chain.pi[None, :]))),
    }
    tols = {"identity": 1e-12, "rows": 1e-10, "law": 1e-10, "ergodic": 1e-8}
    passed = all(errs[k] <= tols[k] for k in errs)
    worst = min(tols[k] - errs[k] for k in errs)
    return CheckReport(
        name="semigroup_properties",
        passed=passed,
        min_slack=worst,
        n_trials=4,
        details=errs,
    )


def delta_recursion_check() -> CheckReport:
    """Closed-form consistency of the moment recursion.

    At gamma=1, alpha=1/2, beta=2 the recursion gives delta(8) = 4^{7/8}
    exactly, and over a small grid with alpha = 1/(2 gamma^6) the simplified
    cap (2 beta)^{7/8} gamma^{5/4} dominates delta(8).
    """
    table = bounds.delta_recursion(8, alpha=0.5, beta=2.0, gamma=1.0)
    exact_err = abs(table[8] - 4.0 ** (7.0 / 8.0))
    min_slack = math.inf
    for gamma in (1.0, 1.5, 2.0):
        for beta in (2.0, 5.0, 10.0):
            alpha = 1.0 / (2.0 * gamma ** 6)
            d8 = bounds.delta_recursion(8, alpha=alpha, beta=beta, gamma=gamma)[8]
            cap = (2.0 * beta) ** (7.0 / 8.0) * gamma ** (5.0 / 4.0)
            min_slack = min(min_slack, cap - d8)
    passed = exact_err <= 1e-12 and min_slack >= -INEQ_TOL
    return CheckReport(
        name="delta_recursion",
        passed=passed,
        min_slack=min(min_slack, 1e-12 - exact_err),
        n_trials=10,
        details={"exact_error": exact_err, "min_cap_slack": min_slack},
    )


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the full (or filtered) oracle suite."""

    seed: int
    checks: tuple

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "seed": int(self.seed),
            "all_passed": bool(self.all_passed),
            "checks": [c.to_dict() for c in self.checks],
        }


def _two_level_pmfs(d: int = 3):
    mix = standard_glauber_mixture(d)
    probs = ([0.25, 0.65, 0.5], [0.7, 0.35, 0.55]) if d == 3 else ([0.3, 0.6], [0.7, 0.4])
    next_pmf = 0.5 * product_pmf(probs[0]) + 0.5 * product_pmf(probs[1])
    return mix, next_pmf


def run_verification_suite(
    selectors=None, seed: int = 0, trials_scale: float = 1.0
) -> VerificationReport:
    """Run the named oracle checks on the standard fixtures.

    ``selectors`` filters checks by name prefix ("decomposition" matches both
    constructions); ``trials_scale`` scales trial counts down for quick runs.
    """
    rng = np.random.default_rng(seed)

    def n(base):
        return max(1, int(round(base * trials_scale)))

    checks = []

    def want(name):
        return selectors is None or any(name.startswith(s) for s in selectors)

    if want("decomposition"):
        for d, weights, probmaker in _decomposition_cases():
            gl = glauber_mixture(weights, probmaker)
            rep = check_generator_decomposition(gl, n(1000), rng)
            checks.append(_rename(rep, f"decomposition_glauber_d{d}_m{len(weights)}"))
            mh = mh_mixture(weights, [product_pmf(p) for p in probmaker])
            rep = check_generator_decomposition(mh, n(1000), rng)
            checks.append(_rename(rep, f"decomposition_mh_d{d}_m{len(weights)}"))
    if want("variance_decay"):
        mix = standard_glauber_mixture(3)
        checks.append(
            variance_decay_check(mix, [0.1, 0.5, 1.0, 2.0, 5.0, 10.0], n(100), rng)
        )
    if want("single_step"):
        mix, next_pmf = _two_level_pmfs(3)
        checks.append(single_step_check(mix, next_pmf, n(1000), rng, lam_target=0.5))
    if want("hypercontractivity"):
        mix = standard_glauber_mixture(3)
        checks.append(
            hypercontractivity_check(mix, 2.0, np.linspace(0.0, 5.0, 20), n(100), rng)
        )
    if want("entropy"):
        mix = standard_glauber_mixture(3)
        checks.append(_rename(entropy_decomposition_check(mix, n(1000), rng), "entropy_m2"))
        three = glauber_mixture(
            [0.3, 0.3, 0.4], ([0.15, 0.8, 0.4], [0.85, 0.3, 0.6], [0.5, 0.5, 0.2])
        )
        checks.append(_rename(entropy_decomposition_check(three, n(1000), rng), "entropy_m3"))
    if want("semigroup") or want("poissonized"):
        four = glauber_mixture([0.4, 0.6], ([0.2, 0.7], [0.8, 0.45])).chain
        checks.append(semigroup_properties_check(four))
        checks.append(poissonized_fidelity_check(four, 1.3, n(100_000), rng))
    if want("contraction"):
        mix = standard_glauber_mixture(3)
        checks.append(markov_contraction_check(mix, [0.1, 0.5, 1.0, 3.0, 10.0]))
    if want("delta_recursion"):
        checks.append(delta_recursion_check())
    if not checks:
        raise ValueError(f"selectors {selectors!r} matched no checks")
    return VerificationReport(seed=seed, checks=tuple(checks))


def _decomposition_cases():
    return [
        (2, [0.2, 0.8], ([0.15, 0.8], [0.85, 0.3])),
        (2, [0.3, 0.3, 0.4], ([0.15, 0.8], [0.85, 0.3], [0.5, 0.25])),
        (3, [0.2, 0.8], ([0.15, 0.8, 0.4], [0.85, 0.3, 0.6])),
        (3, [0.3, 0.3, 0.4], ([0.15, 0.8, 0.4], [0.85, 0.3, 0.6], [0.5, 0.5, 0.2])),
    ]


def _rename(report: CheckReport, name: str) -> CheckReport:
    import dataclasses

    return dataclasses.replace(report, name=name)
