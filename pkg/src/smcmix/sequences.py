"""Measure ladders (power tempering, Gaussian convolution) and their constants.

Both builders require Gaussian mixture targets so that the density-ratio
bounds, log-Sobolev bounds, and weight lower bounds are available in closed
form; anything else is rejected rather than silently losing the analytics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import (
    DensitySpec,
    Ladder,
    Level,
    ParticleEnsemble,
    RejectionSamplingError,
    TargetMixture,
    eval_mixture_logdensity,
    mixture_grad_logdensity,
)
from .gaussians import GaussianComponent, power_normalizer
from .kernels import KernelSpec

__all__ = [
    "TemperingSchedule",
    "GaussianComponent",
    "geometric_schedule",
    "build_power_tempering",
    "power_tempering_gamma",
    "tempered_component_lsi",
    "tempered_weight_lower_bound",
    "build_gaussian_convolution",
    "lsi_convolution_bound",
    "build_finite_ladder",
    "init_sampler",
    "sample_initial",
    "default_probes",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class TemperingSchedule:
    """A strictly increasing inverse-temperature / noise schedule.

    For power tempering the betas live in (0, 1] with the last equal to 1.
    For Gaussian convolution the betas are the positive noise exponents of
    the n-1 noised levels and ``sigma`` is the base noise scale, so level k
    carries additive noise of variance sigma^2 / beta_k.
    """

    betas: tuple
    d: int
    sigma: Optional[float] = None

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        if len(betas) < 1:
            raise ValueError("schedule needs at least one beta")
        if any(b <= 0 for b in betas):
            raise ValueError("betas must be positive")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("betas must be strictly increasing")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        object.__setattr__(self, "betas", betas)


def geometric_schedule(
    n_levels: int, beta_min: float, d: int, sigma: Optional[float] = None
) -> TemperingSchedule:
    """Geometric beta ladder from beta_min to 1 over ``n_levels`` levels.

    Constant ratio beta_{i+1}/beta_i; choosing the ratio 1 + O(1/d) keeps the
    per-step density-ratio bound dimension-free.
    """
    if n_levels < 1:
        raise ValueError("need at least one level")
    if not 0 < beta_min <= 1:
        raise ValueError("beta_min must lie in (0, 1]")
    if n_levels == 1:
        betas = (1.0,)
    else:
        betas = tuple(np.geomspace(beta_min, 1.0, n_levels))
    return TemperingSchedule(betas=betas, d=d, sigma=sigma)


def power_tempering_gamma(
    target: TargetMixture, beta_i: float, beta_prev: float, conservative: bool = False
) -> float:
    """Density-ratio bound for one power-tempering step.

    Returns (1/min_k alpha_k) * (beta_i/beta_prev)^{d/2}
    * (max_k |Sigma_k| / min_k |Sigma_k|)^{(beta_i-beta_prev)/2}.

    ``conservative=True`` multiplies by (2 pi)^{d (beta_i-beta_prev)/2}; see
    build_power_tempering for when that is surfaced.
    """
    if not beta_i > beta_prev > 0:
        raise ValueError("need beta_i > beta_prev > 0")
    gauss = target.component_gaussians()
    d = gauss[0].dim
    dbeta = beta_i - beta_prev
    log_dets = np.array([g.log_det_cov for g in gauss])
    out = (
        -np.log(target.weights.min())
        + 0.5 * d * np.log(beta_i / beta_prev)
        + 0.5 * dbeta * (log_dets.max() - log_dets.min())
    )
    if conservative:
        out += 0.5 * d * dbeta * _LOG_2PI
    return float(np.exp(out))


def tempered_component_lsi(target: TargetMixture, component: int, beta_i: float) -> float:
    """Log-Sobolev upper bound for one tempered mixture component.

    (1/min_j alpha_j) * lambda_max(Sigma_component) / beta_i.
    """
    if not 0 < beta_i <= 1:
        raise ValueError("beta must lie in (0, 1]")
    gauss = target.component_gaussians()
    return float(gauss[component].lambda_max / beta_i / target.weights.min())


def tempered_weight_lower_bound(
    target: TargetMixture, betas: Optional[Sequence[float]] = None
) -> float:
    """Lower bound on every normalized mixture weight across tempered levels.

    With equal covariances this is (min_k alpha_k)^2.  Otherwise the bound
    picks up the worst ratio of the component power normalizers over the
    schedule, which is why ``betas`` is required in that case.
    """
    gauss = target.component_gaussians()
    alpha_min = target.weights.min()
    log_dets = np.array([g.log_det_cov for g in gauss])
    if np.max(np.abs(log_dets - log_dets[0])) < 1e-12 and all(
        np.allclose(g.cov, gauss[0].cov, atol=1e-12) for g in gauss
    ):
        return float(alpha_min ** 2)
    if betas is None:
        raise ValueError("unequal covariances: a beta schedule is required")
    worst = np.inf
    for beta in betas:
        log_z = np.array([power_normalizer(g, beta) for g in gauss])
        denom = np.log(np.sum(target.weights * np.exp(log_z - log_z.max()))) + log_z.max()
        worst = min(worst, float(np.exp(log_z.min() - denom)))
    return float(worst * alpha_min ** 2)


def lsi_convolution_bound(c1: float, c2: float) -> float:
    """Log-Sobolev constant of a convolution: sum of the factors' constants."""
    if c1 <= 0 or c2 <= 0:
        raise ValueError("constants must be positive")
    return c1 + c2


def _tempered_density(target: TargetMixture, beta: float) -> DensitySpec:
    log_normalizer = None
    gaussian = None
    if target.n_components == 1:
        g = target.component_gaussians()[0]
        log_normalizer = power_normalizer(g, beta)
        # q^beta is itself Gaussian with covariance scaled by 1/beta.
        gaussian = GaussianComponent(g.mean, g.cov / beta)

    def log_density(x, _beta=beta):
        return _beta * np.asarray(eval_mixture_logdensity(target, x))

    def grad(x, _beta=beta):
        return _beta * mixture_grad_logdensity(target, x)

    return DensitySpec(
        log_density=log_density,
        grad_log_density=grad,
        log_normalizer=log_normalizer,
        gaussian=gaussian,
    )


def _hessian_bound(target: TargetMixture, beta: float) -> float:
    gauss = target.component_gaussians()
    return beta * max(1.0 / g.lambda_min for g in gauss)


def _tempering_init_proposal(target: TargetMixture, beta1: float) -> tuple:
    """Moments of the rough tempered-mixture surrogate used for rejection."""
    gauss = target.component_gaussians()
    w = target.weights
    means = np.stack([g.mean for g in gauss])
    m = np.sum(w[:, None] * means, axis=0)
    d = gauss[0].dim
    cov = np.zeros((d, d))
    for wi, g, mu in zip(w, gauss, means):
        cov += wi * (g.cov / beta1 + np.outer(mu, mu))
    cov -= np.outer(m, m)
    return m, cov


def build_power_tempering(
    target: TargetMixture,
    schedule: TemperingSchedule,
    kernel: Optional[KernelSpec] = None,
    time_budget=1.0,
    conservative_gamma: bool = False,
) -> Ladder:
    """Power-tempering ladder pi_i ∝ pi^{beta_i} for a Gaussian mixture.

    Level i carries beta_i * log pi as its unnormalized log density, the step
    ratio pi^{beta_i - beta_{i-1}}, the per-step density-ratio bound from
    power_tempering_gamma, and the level log-Sobolev bound from
    tempered_component_lsi.  Time budgets are the caller's to choose.
    """
    gauss = target.component_gaussians()  # rejects non-Gaussian targets
    betas = schedule.betas
    if abs(betas[-1] - 1.0) > 1e-12:
        raise ValueError("power tempering requires beta_n = 1")
    if schedule.d != gauss[0].dim:
        raise ValueError("schedule dimension does not match the target")
    if not conservative_gamma:
        warnings.warn(
            "power-tempering ratio bound uses the plain closed form; "
            "pass conservative_gamma=True for the (2*pi)^(d*dbeta/2)-inflated variant",
            RuntimeWarning,
            stacklevel=2,
        )
    budgets = _as_budgets(time_budget, len(betas))
    lam = max(g.lambda_max for g in gauss)
    levels = []
    gamma = 1.0
    for i, beta in enumerate(betas):
        spec = kernel or KernelSpec(
            kind="langevin", step_size=kernels.default_step_size(_hessian_bound(target, beta))
        )
        density = _tempered_density(target, beta)
        ratio = None
        normalized = None
        bound = None
        if i > 0:
            dbeta = beta - betas[i - 1]

            def ratio(x, _db=dbeta):
                return np.exp(_db * np.asarray(eval_mixture_logdensity(target, x)))

            if target.n_components == 1:
                log_z_prev = power_normalizer(gauss[0], betas[i - 1])
                log_z = power_normalizer(gauss[0], beta)

                def normalized(x, _db=dbeta, _shift=log_z_prev - log_z):
                    return np.exp(
                        _db * np.asarray(eval_mixture_logdensity(target, x)) + _shift
                    )

            bound = power_tempering_gamma(target, beta, betas[i - 1], conservative_gamma)
            gamma = max(gamma, bound)
        levels.append(
            Level(
                density=density,
                kernel=spec,
                time_budget=budgets[i],
                ratio_to_prev=ratio,
                normalized_ratio=normalized,
                lsi_constant_bound=lam / beta / target.weights.min(),
                ratio_bound=bound,
                mixture=target if abs(beta - 1.0) < 1e-15 else None,
                init_proposal=_tempering_init_proposal(target, betas[0]) if i == 0 else None,
            )
        )
    return Ladder(levels=tuple(levels), gamma_bound=gamma)


def build_gaussian_convolution(
    target: TargetMixture,
    schedule: TemperingSchedule,
    kernel: Optional[KernelSpec] = None,
    time_budget=1.0,
) -> Ladder:
    """Convolution ladder mu_k = target * N(0, (sigma^2/beta_k) I).

    The first len(betas) levels are the noised mixtures (component
    covariances Sigma_i + (sigma^2/beta_k) I, weights unchanged); the final
    level is the target itself.  Per-step ratio bounds are
    (beta_k/beta_{k-1})^{d/2} for noised steps and the closed-form determinant
    ratio for the final de-noising step.
    """
    gauss = target.component_gaussians()
    if schedule.sigma is None:
        raise ValueError("convolution schedule needs sigma")
    d = gauss[0].dim
    if schedule.d != d:
        raise ValueError("schedule dimension does not match the target")
    sigma2 = schedule.sigma ** 2
    betas = schedule.betas
    budgets = _as_budgets(time_budget, len(betas) + 1)
    base_lsi = max(g.lambda_max for g in gauss)

    mixtures = [
        TargetMixture(
            components=tuple(
                DensitySpec.from_gaussian(g.convolved(sigma2 / beta)) for g in gauss
            ),
            weights=target.weights,
        )
        for beta in betas
    ] + [target]

    levels = []
    gamma = 1.0
    for k, mix in enumerate(mixtures):
        noise = sigma2 / betas[k] if k < len(betas) else 0.0
        spec = kernel or KernelSpec(
            kind="langevin",
            step_size=kernels.default_step_size(
                max(1.0 / (g.lambda_min + noise) for g in gauss)
            ),
        )

        def log_density(x, _m=mix):
            return eval_mixture_logdensity(_m, x)

        def grad(x, _m=mix):
            return mixture_grad_logdensity(_m, x)

        ratio = None
        bound = None
        if k > 0:
            prev = mixtures[k - 1]

            def ratio(x, _m=mix, _p=prev):
                return np.exp(
                    np.asarray(eval_mixture_logdensity(_m, x))
                    - np.asarray(eval_mixture_logdensity(_p, x))
                )

            if k < len(betas):
                bound = (betas[k] / betas[k - 1]) ** (d / 2.0)
            else:
                tau = sigma2 / betas[-1]
                bound = max(
                    np.exp(0.5 * (g.convolved(tau).log_det_cov - g.log_det_cov))
                    for g in gauss
                )
            gamma = max(gamma, bound)
        levels.append(
            Level(
                density=DensitySpec(
                    log_density=log_density,
                    grad_log_density=grad,
                    log_normalizer=0.0,
                    gaussian=mix.components[0].gaussian if mix.n_components == 1 else None,
                ),
                kernel=spec,
                time_budget=budgets[k],
                ratio_to_prev=ratio,
                normalized_ratio=ratio,  # all levels are normalized mixtures
                lsi_constant_bound=base_lsi + noise,
                ratio_bound=bound,
                mixture=mix,
            )
        )
    return Ladder(levels=tuple(levels), gamma_bound=gamma)


def build_finite_ladder(pmfs, chains, time_budget=1.0) -> Ladder:
    """Ladder over an enumerated state space with explicit smoothing chains.

    ``pmfs`` are the per-level stationary pmfs (normalized, so ratios are the
    exact normalized ratios) and ``chains`` the per-level FiniteChains; the
    level-1 chain may be None since no smoothing happens there.
    """
    pmfs = [np.asarray(p, dtype=float) / np.sum(p) for p in pmfs]
    if len(chains) != len(pmfs):
        raise ValueError("need one chain per level")
    budgets = _as_budgets(time_budget, len(pmfs))
    levels = []
    gamma = 1.0
    for k, (pmf, chain) in enumerate(zip(pmfs, chains)):
        if chain is not None and np.max(np.abs(chain.pi - pmf)) > 1e-10:
            raise ValueError(f"chain at level {k + 1} is not stationary for its pmf")

        def log_density(x, _p=pmf):
            return np.log(_p[np.asarray(x, dtype=np.int64)])

        ratio = None
        bound = None
        if k > 0:
            prev = pmfs[k - 1]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = pmf / prev  # states outside supp(prev) are never sampled

            def ratio(x, _r=ratios):
                return _r[np.asarray(x, dtype=np.int64)]

            finite = ratios[np.isfinite(ratios)]
            bound = float(finite.max()) if finite.size else 1.0
            gamma = max(gamma, bound)
        levels.append(
            Level(
                density=DensitySpec(log_density=log_density, log_normalizer=0.0),
                kernel=KernelSpec(kind="finite"),
                time_budget=budgets[k],
                ratio_to_prev=ratio,
                normalized_ratio=ratio,
                ratio_bound=bound,
                pmf=pmf,
                chain=chain,
            )
        )
    return Ladder(levels=tuple(levels), gamma_bound=gamma)


def _as_budgets(time_budget, n: int):
    if np.ndim(time_budget) == 0:
        return [float(time_budget)] * n
    budgets = [float(t) for t in time_budget]
    if len(budgets) != n:
        raise ValueError(f"expected {n} time budgets, got {len(budgets)}")
    return budgets


def init_sampler(
    ladder: Ladder,
    n_samples: int,
    rng: np.random.Generator,
    acceptance_floor: float = 1e-4,
    n_probe: int = 100_000,
) -> ParticleEnsemble:
    """Exact or near-exact samples from the first ladder level.

    Exact paths: a finite pmf (categorical draws) or an explicit Gaussian
    mixture (component sampling), both with acceptance rate 1.  Otherwise
    rejection sampling against a moment-matched Gaussian proposal inflated by
    1.5 in scale, with the envelope constant estimated by probing ``n_probe``
    proposal draws.  Raises ``RejectionSamplingError`` when the acceptance
    rate falls below ``acceptance_floor``.
    """
    level = ladder.levels[0]
    lineage = (f"init:n={n_samples}",)
    if level.pmf is not None:
        states = rng.choice(level.pmf.shape[0], size=n_samples, p=level.pmf)
        return ParticleEnsemble(1, states.astype(np.int64), rng_seed_lineage=lineage)
    if level.mixture is not None:
        draws = level.mixture.sample(rng, n_samples)
        return ParticleEnsemble(1, draws, rng_seed_lineage=lineage)
    if level.density.gaussian is not None:
        draws = level.density.gaussian.sample(rng, n_samples)
        return ParticleEnsemble(1, draws, rng_seed_lineage=lineage)
    if level.init_proposal is None:
        raise ValueError("level 1 has no exact sampler and no rejection proposal hint")

    mean, cov = level.init_proposal
    proposal = GaussianComponent(mean, 1.5 ** 2 * np.asarray(cov))
    probes = proposal.sample(rng, n_probe)
    log_ratio = np.asarray(level.density.log_density(probes)) - proposal.logpdf(probes)
    log_c = float(np.max(log_ratio)) + np.log(1.2)  # probe estimate with headroom

    accepted = []
    n_accepted = 0
    n_proposed = 0
    batch = max(4 * n_samples, 1024)
    while n_accepted < n_samples:
        y = proposal.sample(rng, batch)
        log_a = np.asarray(level.density.log_density(y)) - proposal.logpdf(y) - log_c
        keep = np.log(rng.random(batch)) < log_a
        accepted.append(y[keep])
        n_accepted += int(keep.sum())
        n_proposed += batch
        if n_proposed >= 10 * batch and n_accepted / n_proposed < acceptance_floor:
            raise RejectionSamplingError(
                f"proposal too loose: acceptance rate {n_accepted / n_proposed:.2e}"
            )
    draws = np.concatenate(accepted, axis=0)[:n_samples]
    rate = n_accepted / n_proposed
    return ParticleEnsemble(
        1, draws, rng_seed_lineage=lineage, init_acceptance_rate=float(rate)
    )


def sample_initial(ladder: Ladder, n_samples: int, rng: np.random.Generator) -> ParticleEnsemble:
    """Dispatching initializer used by the SMC driver."""
    return init_sampler(ladder, n_samples, rng)


def default_probes(
    ladder: Ladder, rng: np.random.Generator, n_pilot: int = 2000
) -> np.ndarray:
    """Probe set for ratio checks: a pilot level-1 draw plus a fixed grid.

    The pilot covers typical regions, the grid (spanning 1.5x the pilot's
    bounding box, capped at 4096 points) adds tail coverage.  Finite ladders
    enumerate every state instead.
    """
    level = ladder.levels[0]
    if level.pmf is not None:
        return np.arange(level.pmf.shape[0], dtype=np.int64)
    pilot = init_sampler(ladder, n_pilot, rng).particles
    d = pilot.shape[1]
    per_axis = max(2, int(4096 ** (1.0 / d)))
    center = 0.5 * (pilot.min(axis=0) + pilot.max(axis=0))
    half = 0.75 * (pilot.max(axis=0) - pilot.min(axis=0))
    axes = [np.linspace(center[i] - half[i], center[i] + half[i], per_axis) for i in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return np.vstack([pilot, grid])
