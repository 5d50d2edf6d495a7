"""Closed-form discrete flow pairing toolkit.

The closed-form denoiser and velocities over a finite token dataset, the
categorical Euler samplers built on them, dataset pairing, diagnostics and
a continuous Gaussian-source variant.
"""

from .core import (
    CatflowError,
    ConfigError,
    DatasetStore,
    DomainError,
    LoadError,
    Scheduler,
    SeedSpec,
    TimeGrid,
    kappa,
    kappa_dot,
    load_dataset,
    write_dataset,
    write_tokens,
)
from .kernel import hamming, hamming_profile, log_gamma, partition_subsets, posterior_weights
from .transport import (
    PairSet,
    StepConfig,
    StepSizeError,
    invert,
    pairflow,
    read_pairs,
    sample_forward,
    sample_many,
    write_pairs,
)
from .velocity import (
    DistributionGrid,
    SingularityError,
    denoiser_forward,
    noise_predictor,
    oracle_denoiser,
    oracle_noise_predictor,
    velocity_backward,
    velocity_forward,
)

__version__ = "0.1.0"
