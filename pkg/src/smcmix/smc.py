"""The sequential sampler: initialize, reweight, resample, smooth.

One run is fully determined by its master seed.  Randomness is split with
``numpy.random.SeedSequence`` into one stream for initialization and, per
level, one stream for resampling and one for kernel smoothing.  Replicates
derive independent seeds from ``(master_seed, replicate_index)``.

Run results are invariant to the storage order of the particle ensemble:
particles carry lane ids and the driver canonicalizes their order on entry,
so permuting an injected initial ensemble together with its lane ids
reproduces the run exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import DegenerateWeightsError, Ladder, ParticleEnsemble
from .kernels import apply_kernel
from .sequences import sample_initial

__all__ = [
    "SmcConfig",
    "SmcRunResult",
    "multinomial_resample",
    "run_smc",
    "nu_estimate",
    "replicate_seed",
    "run_replicates",
    "mse_over_runs",
    "jackknife_se",
]


@dataclass(frozen=True, eq=False)
class SmcConfig:
    """Everything one SMC run needs.

    ``estimand`` must be vectorized over the ensemble and bounded;
    ``estimand_sup_bound`` is the caller-supplied bound on
    ``sup |f - mu_n(f)|`` used by the bound calculators.
    """

    ladder: Ladder
    n_particles: int
    master_seed: int
    estimand: Callable[[np.ndarray], np.ndarray]
    estimand_sup_bound: float = 1.0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if not math.isfinite(self.estimand_sup_bound):
            raise ValueError("estimand sup-norm bound must be finite")


@dataclass(frozen=True, eq=False)
class SmcRunResult:
    """Estimates and per-level diagnostics of one run.

    ``weight_sums_per_level`` holds the empirical means of the raw
    (unnormalized) ratios used for resampling; ``nu_estimate`` is the
    unbiased weighted estimator when normalized ratios were available, else
    None.  Wall times are excluded from any serialized payload that must be
    reproducible.
    """

    final_ensemble: ParticleEnsemble
    eta_estimate: float
    nu_estimate: Optional[float]
    ess_per_level: tuple
    weight_sums_per_level: tuple
    normalized_weight_sums_per_level: Optional[tuple]
    level_wall_times: tuple
    master_seed: int
    trajectory: Optional[tuple] = None


def _mean_exact(values: np.ndarray) -> float:
    """Shift-and-fsum mean: exact for constant inputs, stable in general."""
    base = float(values[0])
    return base + math.fsum((values - base).tolist()) / values.shape[0]


def multinomial_resample(weights, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """``n_draws`` i.i.d. categorical draws proportional to ``weights``.

    Self-normalizes internally; raises DegenerateWeightsError when the
    weights are all zero, negative, or non-finite.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DegenerateWeightsError("degenerate weights: empty or not a vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DegenerateWeightsError("degenerate weights: negative or non-finite")
    total = w.sum()
    if total <= 0:
        raise DegenerateWeightsError("degenerate weights: all zero")
    cum = np.cumsum(w) / total
    idx = np.searchsorted(cum, rng.random(n_draws), side="right")
    return np.minimum(idx, w.size - 1).astype(np.int64)


def _streams(master_seed: int, n_levels: int):
    ss = np.random.SeedSequence(master_seed)
    children = ss.spawn(1 + 2 * max(n_levels - 1, 0))
    init = np.random.default_rng(children[0])
    resample = [np.random.default_rng(c) for c in children[1 : n_levels]]
    kernel = [np.random.default_rng(c) for c in children[n_levels :]]
    return init, resample, kernel


def run_smc(config: SmcConfig, initial_ensemble: Optional[ParticleEnsemble] = None) -> SmcRunResult:
    """Execute the sampler over the whole ladder.

    Level 1 is drawn exactly (or near-exactly) from the first level; for
    k = 1..n-1 the particles are reweighted by the raw ratio toward level
    k+1, multinomially resampled, and smoothed by the level-(k+1) kernel for
    its time budget.  Deterministic given the master seed.
    """
    ladder = config.ladder
    levels = ladder.levels
    n = len(levels)
    N = config.n_particles
    init_rng, resample_rngs, kernel_rngs = _streams(config.master_seed, n)

    if initial_ensemble is None:
        ens = sample_initial(ladder, N, init_rng)
    else:
        ens = initial_ensemble
        if ens.n_particles != N:
            raise ValueError("initial ensemble size does not match the config")
    order = np.argsort(ens.lane_ids, kind="stable")
    particles = np.asarray(ens.particles)[order]
    init_rate = ens.init_acceptance_rate

    ess_log, wsum_log, wall_log = [], [], []
    normalized_ok = all(lv.normalized_ratio is not None for lv in levels[1:])
    nbar_log = [] if normalized_ok else None
    nu_scale = 1.0
    trajectory = [particles.copy()] if config.record_trajectory else None

    for k in range(1, n):
        t0 = time.perf_counter()
        level = levels[k]
        g = np.atleast_1d(np.asarray(level.ratio_to_prev(particles), dtype=float))
        if not np.all(np.isfinite(g)) or np.any(g < 0) or g.sum() <= 0:
            raise DegenerateWeightsError(f"degenerate weights at level {k + 1}")
        wsum_log.append(float(np.mean(g)))
        ess_log.append(float(g.sum() ** 2 / np.sum(g * g)))
        if normalized_ok:
            gbar = np.atleast_1d(np.asarray(level.normalized_ratio(particles), dtype=float))
            nbar = float(np.mean(gbar))
            nbar_log.append(nbar)
            nu_scale *= nbar
        ancestors = multinomial_resample(g, N, resample_rngs[k - 1])
        particles = particles[ancestors]
        particles = apply_kernel(level, particles, kernel_rngs[k - 1])
        wall_log.append(time.perf_counter() - t0)
        if trajectory is not None:
            trajectory.append(particles.copy())

    values = np.atleast_1d(np.asarray(config.estimand(particles), dtype=float))
    eta = _mean_exact(values)
    nu = nu_scale * eta if normalized_ok else None
    final = ParticleEnsemble(
        level_index=n,
        particles=particles,
        nu_scale=nu_scale if n > 1 else 1.0,
        rng_seed_lineage=(
            f"master={config.master_seed}",
            "streams=init,resample[k],kernel[k]",
        ),
        init_acceptance_rate=init_rate,
    )
    return SmcRunResult(
        final_ensemble=final,
        eta_estimate=eta,
        nu_estimate=nu,
        ess_per_level=tuple(ess_log),
        weight_sums_per_level=tuple(wsum_log),
        normalized_weight_sums_per_level=tuple(nbar_log) if normalized_ok else None,
        level_wall_times=tuple(wall_log),
        master_seed=config.master_seed,
        trajectory=tuple(trajectory) if trajectory is not None else None,
    )


def nu_estimate(result: SmcRunResult, z_ratio_correction: Optional[float] = None) -> float:
    """Weighted unbiased estimator: product of ratio means times eta.

    Uses the recorded normalized ratio means when available; otherwise a
    ``z_ratio_correction`` equal to Z_1/Z_n must be supplied to rescale the
    raw ratio means, and its absence is an error.
    """
    if result.normalized_weight_sums_per_level is not None:
        scale = math.prod(result.normalized_weight_sums_per_level)
        return scale * result.eta_estimate
    if z_ratio_correction is None:
        raise ValueError("normalizers unavailable and no Z-ratio correction supplied")
    scale = z_ratio_correction * math.prod(result.weight_sums_per_level)
    return scale * result.eta_estimate


def replicate_seed(master_seed: int, index: int) -> int:
    """Stable 64-bit seed for replicate ``index`` derived from the master seed."""
    ss = np.random.SeedSequence((int(master_seed), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def run_replicates(config: SmcConfig, n_replicates: int) -> list:
    """Independent seeded replicates of one configuration, in index order."""
    results = []
    for i in range(n_replicates):
        seeded = replace(config, master_seed=replicate_seed(config.master_seed, i))
        results.append(run_smc(seeded))
    return results


def jackknife_se(samples: np.ndarray, statistic) -> float:
    """Leave-one-out standard error of a statistic of i.i.d. samples."""
    n = samples.shape[0]
    if n < 2:
        return float("nan")
    loo = np.array([statistic(np.delete(samples, i)) for i in range(n)])
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def mse_over_runs(config: SmcConfig, n_replicates: int, exact_value: float) -> dict:
    """Empirical MSE / variance / squared bias of eta across replicates.

    ``exact_value`` is the true integral mu_n(f) (analytic or from the
    finite-state oracle).  Jackknife standard errors accompany each figure.
    """
    etas = np.array([r.eta_estimate for r in run_replicates(config, n_replicates)])
    mse = float(np.mean((etas - exact_value) ** 2))
    variance = float(np.var(etas, ddof=1)) if n_replicates > 1 else 0.0
    bias_sq = float((etas.mean() - exact_value) ** 2)
    return {
        "mse": mse,
        "variance": variance,
        "bias_sq": bias_sq,
        "mean_eta": float(etas.mean()),
        "mse_se": jackknife_se(etas, lambda s: np.mean((s - exact_value) ** 2)),
        "variance_se": jackknife_se(etas, lambda s: np.var(s, ddof=1)),
        "bias_sq_se": jackknife_se(etas, lambda s: (np.mean(s) - exact_value) ** 2),
        "n_replicates": n_replicates,
    }
