"""Sequential Monte Carlo for multimodal mixture targets.

Subpackages
-----------
core       shared domain types (densities, mixtures, ladders, ensembles, chains)
gaussians  Gaussian components and their closed-form pieces
sequences  ladder builders (power tempering, Gaussian convolution) and constants
kernels    Langevin / Metropolis / Glauber / finite-chain smoothing kernels
smc        the sampler, estimators, and replicate harness
bounds     closed-form constants and N / t prescriptions
oracle     exact finite-state verification of the underlying inequalities
cli        config-driven command line (run / bounds / verify / sweep)
"""

from . import bounds, cli, core, gaussians, kernels, oracle, sequences, smc
from .core import (
    DensitySpec,
    FiniteChain,
    Ladder,
    Level,
    ParticleEnsemble,
    TargetMixture,
)
from .gaussians import GaussianComponent
from .kernels import KernelSpec
from .smc import SmcConfig, SmcRunResult, run_smc

__version__ = "0.1.0"

__all__ = [
    "bounds",
    "cli",
    "core",
    "gaussians",
    "kernels",
    "oracle",
    "sequences",
    "smc",
    "DensitySpec",
    "FiniteChain",
    "GaussianComponent",
    "KernelSpec",
    "Ladder",
    "Level",
    "ParticleEnsemble",
    "SmcConfig",
    "SmcRunResult",
    "TargetMixture",
    "run_smc",
]
