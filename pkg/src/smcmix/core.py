"""Shared domain types: densities, mixtures, ladders, particle ensembles, finite chains.

Conventions
-----------
* Euclidean states are float vectors of shape ``(d,)``; ensembles stack them
  into ``(N, d)`` arrays.  Density callables are vectorized: they accept
  ``(N, d)`` (or ``(d,)``) and return ``(N,)`` (or a scalar).
* Finite / hypercube states are integer indices into an enumerated state list;
  ensembles are ``(N,)`` integer arrays.  A hypercube point ``x`` in
  ``{0,1}^d`` is enumerated with bit ``i`` of the index equal to ``x_i``.
* All types are immutable after construction and safe to share across
  threads; evaluation callables must be pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .gaussians import GaussianComponent

if TYPE_CHECKING:  # pragma: no cover - type-only import, kernels imports core at runtime
    from .kernels import KernelSpec

__all__ = [
    "DensitySpec",
    "TargetMixture",
    "Level",
    "Ladder",
    "ParticleEnsemble",
    "FiniteChain",
    "LadderValidationReport",
    "DegenerateWeightsError",
    "RejectionSamplingError",
    "NonReversibleChainError",
    "eval_mixture_logdensity",
    "mixture_grad_logdensity",
    "check_gradient",
    "validate_ladder",
]

MAX_FINITE_STATES = 2 ** 14


class DegenerateWeightsError(RuntimeError):
    """All resampling weights are zero or non-finite."""


class RejectionSamplingError(RuntimeError):
    """Rejection sampler acceptance rate fell below the configured floor."""


class NonReversibleChainError(ValueError):
    """Operation requires a reversible chain."""


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """An unnormalized density with optional gradient and normalizer.

    Attributes
    ----------
    log_density : callable
        Vectorized log of the unnormalized density.
    grad_log_density : callable, optional
        Vectorized gradient of ``log_density`` (required for Langevin kernels).
    log_normalizer : float, optional
        ``log Z`` with ``p(x) = exp(log_density(x)) / Z``, when known.
    gaussian : GaussianComponent, optional
        Set when the density is a known Gaussian, enabling closed-form
        constants downstream.
    """

    log_density: Callable[[np.ndarray], np.ndarray]
    grad_log_density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_normalizer: Optional[float] = None
    gaussian: Optional[GaussianComponent] = None

    @classmethod
    def from_gaussian(cls, component: GaussianComponent) -> "DensitySpec":
        """Normalized Gaussian density (log_normalizer = 0)."""
        return cls(
            log_density=component.logpdf,
            grad_log_density=component.grad_logpdf,
            log_normalizer=0.0,
            gaussian=component,
        )


@dataclass(frozen=True, eq=False)
class TargetMixture:
    """Weighted mixture of component densities.

    Weights must be positive and sum to one (tolerance 1e-12).
    """

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        if len(comps) < 1:
            raise ValueError("mixture needs at least one component")
        if w.shape != (len(comps),):
            raise ValueError("weights length does not match component count")
        if np.any(w <= 0.0):
            raise ValueError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def w_star(self) -> float:
        """Minimum mixture weight."""
        return float(self.weights.min())

    @property
    def dim(self) -> int:
        g = self.component_gaussians()
        return g[0].dim

    @classmethod
    def gaussian(cls, weights, means, covs) -> "TargetMixture":
        """Mixture of Gaussians from explicit parameters."""
        comps = tuple(
            DensitySpec.from_gaussian(GaussianComponent(m, c))
            for m, c in zip(means, covs)
        )
        return cls(components=comps, weights=np.asarray(weights, dtype=float))

    def component_gaussians(self) -> tuple:
        """Gaussian parameters of every component, or raise if any is unknown."""
        gauss = tuple(c.gaussian for c in self.components)
        if any(g is None for g in gauss):
            raise ValueError("mixture component is not Gaussian")
        return gauss

    def mean(self) -> np.ndarray:
        gauss = self.component_gaussians()
        return np.sum(self.weights[:, None] * np.stack([g.mean for g in gauss]), axis=0)

    def cov(self) -> np.ndarray:
        gauss = self.component_gaussians()
        m = self.mean()
        out = np.zeros((gauss[0].dim, gauss[0].dim))
        for w, g in zip(self.weights, gauss):
            out += w * (g.cov + np.outer(g.mean, g.mean))
        return out - np.outer(m, m)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Exact mixture samples (Gaussian components only), shape (n, d)."""
        gauss = self.component_gaussians()
        counts = rng.multinomial(n, self.weights)
        parts = [g.sample(rng, c) for g, c in zip(gauss, counts) if c > 0]
        out = np.concatenate(parts, axis=0)
        return out[rng.permutation(n)]


def eval_mixture_logdensity(mixture: TargetMixture, x) -> np.ndarray:
    """log Σ w_i p_i(x), computed with log-sum-exp.

    Every component must be normalized or carry a known normalizer; a missing
    one raises ``ValueError("unnormalized mixture component")``.
    """
    terms = []
    for w, comp in zip(mixture.weights, mixture.components):
        if comp.log_normalizer is None:
            raise ValueError("unnormalized mixture component")
        terms.append(np.log(w) + np.asarray(comp.log_density(x)) - comp.log_normalizer)
    stacked = np.stack([np.atleast_1d(t) for t in terms], axis=0)
    out = logsumexp(stacked, axis=0)
    return float(out[0]) if np.ndim(x) <= 1 else out


def mixture_grad_logdensity(mixture: TargetMixture, x) -> np.ndarray:
    """Gradient of the mixture log density via softmax responsibilities."""
    x = np.asarray(x, dtype=float)
    logs = []
    grads = []
    for w, comp in zip(mixture.weights, mixture.components):
        if comp.grad_log_density is None:
            raise ValueError("mixture component has no gradient")
        z = comp.log_normalizer if comp.log_normalizer is not None else 0.0
        logs.append(np.log(w) + np.atleast_1d(comp.log_density(x)) - z)
        grads.append(np.atleast_2d(comp.grad_log_density(x)))
    logw = np.stack(logs, axis=0)
    resp = np.exp(logw - logsumexp(logw, axis=0, keepdims=True))  # (M, N)
    stacked = np.stack(grads, axis=0)  # (M, N, d)
    out = np.sum(resp[:, :, None] * stacked, axis=0)
    return out if x.ndim > 1 else out[0]


def check_gradient(spec: DensitySpec, probes, rtol: float = 1e-5, step: float = 1e-5) -> float:
    """Max relative error of the gradient vs central finite differences.

    Relative to ``max(|grad|, 1)`` per probe, so flat regions do not blow up
    the ratio.
    """
    if spec.grad_log_density is None:
        raise ValueError("density has no gradient to check")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    def scalar_logp(x):
        return float(np.asarray(spec.log_density(x)).reshape(-1)[0])

    worst = 0.0
    for x in probes:
        g = np.asarray(spec.grad_log_density(x), dtype=float).reshape(-1)
        fd = np.empty_like(g)
        for i in range(x.shape[0]):
            e = np.zeros_like(x)
            e[i] = step
            fd[i] = (scalar_logp(x + e) - scalar_logp(x - e)) / (2 * step)
        err = np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0))
        worst = max(worst, float(err))
    if worst > rtol:
        raise ValueError(f"gradient mismatch: max relative error {worst:.3e} > {rtol:.1e}")
    return worst


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """Explicit transition matrix with its stationary distribution.

    ``P`` must be row-stochastic (rows sum to 1 within 1e-12) and ``pi``
    stationary within 1e-10.  Reversibility (detailed balance within 1e-12)
    is detected at construction and exposed as a flag.
    """

    P: np.ndarray
    pi: Optional[np.ndarray] = None
    labels: Optional[tuple] = None
    reversible: bool = field(init=False, default=False)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if P.shape[0] > MAX_FINITE_STATES:
            raise ValueError(f"state space too large ({P.shape[0]} > {MAX_FINITE_STATES})")
        if np.any(P < -1e-15):
            raise ValueError("transition matrix has negative entries")
        row_err = np.max(np.abs(P.sum(axis=1) - 1.0))
        if row_err > 1e-12:
            raise ValueError(f"rows must sum to 1 (max deviation {row_err:.3e})")
        if self.pi is None:
            pi = _stationary_distribution(P)
        else:
            pi = np.asarray(self.pi, dtype=float)
            pi = pi / pi.sum()
        stat_err = np.max(np.abs(pi @ P - pi))
        if stat_err > 1e-10:
            raise ValueError(f"pi is not stationary (max deviation {stat_err:.3e})")
        flux = pi[:, None] * P
        rev = bool(np.max(np.abs(flux - flux.T)) <= 1e-12)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "reversible", rev)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]


def _stationary_distribution(P: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(P.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, k])
    v = np.abs(v)
    return v / v.sum()


@dataclass(frozen=True, eq=False)
class Level:
    """One rung of a measure ladder.

    ``ratio_to_prev`` is the unnormalized density ratio g against the previous
    level (absent at level 1); ``normalized_ratio`` is available when the
    normalizers are known.  ``time_budget`` is the continuous smoothing time
    applied after resampling into this level.
    """

    density: DensitySpec
    kernel: "KernelSpec"
    time_budget: float
    ratio_to_prev: Optional[Callable[[np.ndarray], np.ndarray]] = None
    normalized_ratio: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lsi_constant_bound: Optional[float] = None
    ratio_bound: Optional[float] = None
    mixture: Optional[TargetMixture] = None
    pmf: Optional[np.ndarray] = None
    chain: Optional[FiniteChain] = None
    init_proposal: Optional[tuple] = None  # (mean, cov) hint for rejection init

    def __post_init__(self):
        if self.time_budget < 0:
            raise ValueError("time budget must be nonnegative")
        if self.pmf is not None:
            pmf = np.asarray(self.pmf, dtype=float)
            if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-12:
                raise ValueError("level pmf must be a probability vector")
            object.__setattr__(self, "pmf", pmf)


@dataclass(frozen=True, eq=False)
class Ladder:
    """Ordered sequence of levels with a uniform normalized-ratio bound."""

    levels: tuple
    gamma_bound: float

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) < 1:
            raise ValueError("ladder needs at least one level")
        if self.gamma_bound < 1.0:
            raise ValueError("gamma bound must be >= 1")
        if any(lv.ratio_to_prev is None for lv in levels[1:]):
            raise ValueError("every level after the first needs a ratio to its predecessor")
        object.__setattr__(self, "levels", levels)

    @property
    def n_levels(self) -> int:
        return len(self.levels)


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """N particle states at one level, plus the running ν bookkeeping.

    ``nu_scale`` is the running product of empirical normalized-ratio means;
    it is exactly 1 for a freshly initialized ensemble.  ``lane_ids`` give
    each particle a persistent identity so that runs are invariant to the
    storage order of the ensemble.
    """

    level_index: int
    particles: np.ndarray
    nu_scale: float = 1.0
    rng_seed_lineage: tuple = ()
    lane_ids: Optional[np.ndarray] = None
    init_acceptance_rate: float = 1.0

    def __post_init__(self):
        particles = np.asarray(self.particles)
        if particles.shape[0] < 1:
            raise ValueError("ensemble needs at least one particle")
        if self.level_index < 1:
            raise ValueError("level index is 1-based")
        if self.level_index == 1 and self.nu_scale != 1.0:
            raise ValueError("nu_scale must be 1 at level 1")
        lanes = self.lane_ids
        if lanes is None:
            lanes = np.arange(particles.shape[0], dtype=np.int64)
        else:
            lanes = np.asarray(lanes, dtype=np.int64)
            if lanes.shape != (particles.shape[0],):
                raise ValueError("lane_ids must have one entry per particle")
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "lane_ids", lanes)

    @property
    def n_particles(self) -> int:
        return self.particles.shape[0]


@dataclass(frozen=True)
class LevelRatioCheck:
    level_index: int
    max_ratio: Optional[float]
    bound: float
    flagged: bool
    skipped: bool


@dataclass(frozen=True)
class LadderValidationReport:
    """Per-level maxima of observed normalized ratios vs the ladder bound."""

    checks: tuple
    gamma_bound: float

    @property
    def flagged(self) -> bool:
        return any(c.flagged for c in self.checks)


def validate_ladder(ladder: Ladder, probes: Sequence) -> LadderValidationReport:
    """Spot-check the normalized ratio bound on a probe set.

    Reports the max observed normalized ratio per level and flags levels that
    exceed the ladder's gamma bound.  Levels without a normalized ratio are
    skipped.  This is a sanity check, never a proof.
    """
    probes = np.asarray(probes)
    if probes.shape[0] == 0:
        raise ValueError("probe set must be non-empty")
    checks = []
    for k, level in enumerate(ladder.levels[1:], start=2):
        bound = level.ratio_bound if level.ratio_bound is not None else ladder.gamma_bound
        if level.normalized_ratio is None:
            checks.append(LevelRatioCheck(k, None, bound, False, True))
            continue
        ratios = np.atleast_1d(np.asarray(level.normalized_ratio(probes), dtype=float))
        top = float(ratios.max())
        checks.append(LevelRatioCheck(k, top, bound, top > bound, False))
    return LadderValidationReport(checks=tuple(checks), gamma_bound=ladder.gamma_bound)
