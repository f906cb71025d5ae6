"""Bayesian estimation of cognitive diagnosis models.

Measurement models: conjunctive, disjunctive, compensatory, baseline/penalty
and log-linear kernels, with ordered-category attribute, testlet and
longitudinal extensions.  Estimation is by multi-chain Metropolis-within-
Gibbs sampling with convergence diagnostics, posterior predictive checking,
and deviance-based fit indices.
"""

from .core import (
    PatternSpace,
    QMatrix,
    ResponseMatrix,
    enumerate_patterns,
    ideal_conjunctive,
    ideal_disjunctive,
    ideal_polytomous,
)
from .latent import (
    HigherOrderLatent,
    LongitudinalLatent,
    PriorSpec,
    UnstructuredLatent,
    build_sigma_from_cholesky,
)
from .models import (
    DinaParams,
    LcdmParams,
    LlmParams,
    RdinaParams,
    RrumParams,
    TestletParams,
    log_likelihood,
)

__version__ = "0.1.0"
