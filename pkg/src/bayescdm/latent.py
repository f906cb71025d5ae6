"""Latent structural models and prior settings.

Three structures: an unstructured mixture over the enumerated patterns, a
higher-order structure driving attribute mastery through one continuous
trait, and a longitudinal structure with one trait per occasion whose
covariance is parameterized through its Cholesky factor (first trait
variance pinned to 1).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .models import logistic

__all__ = [
    "UnstructuredLatent",
    "HigherOrderLatent",
    "LongitudinalLatent",
    "PriorSpec",
    "attribute_prob_higher_order",
    "class_prior",
    "build_sigma_from_cholesky",
]


@dataclass(frozen=True)
class UnstructuredLatent:
    """Mixture over attribute patterns: proportions, Dirichlet scale, memberships."""

    mixing: np.ndarray
    dirichlet_scale: np.ndarray = None
    membership: np.ndarray = None

    def __post_init__(self):
        pi = np.asarray(self.mixing, dtype=np.float64)
        if pi.ndim != 1 or (pi < 0).any() or not np.isclose(pi.sum(), 1.0):
            raise ValueError("mixing proportions must be non-negative and sum to 1")
        scale = self.dirichlet_scale
        if scale is None:
            scale = np.ones_like(pi)
        else:
            scale = np.asarray(scale, dtype=np.float64)
            if scale.shape != pi.shape or (scale <= 0).any():
                raise ValueError("Dirichlet scale must be positive, one per pattern")
        object.__setattr__(self, "mixing", pi)
        object.__setattr__(self, "dirichlet_scale", scale)
        if self.membership is not None:
            memb = np.asarray(self.membership, dtype=np.int64)
            if (memb < 0).any() or (memb >= pi.shape[0]).any():
                raise ValueError("memberships must index a pattern")
            object.__setattr__(self, "membership", memb)

    @property
    def n_patterns(self):
        return self.mixing.shape[0]


@dataclass(frozen=True)
class HigherOrderLatent:
    """Per-attribute slope/intercept with a standard-normal trait prior."""

    slope: np.ndarray
    intercept: np.ndarray
    trait: np.ndarray = None
    slope_nonneg: bool = True

    def __post_init__(self):
        xi = np.asarray(self.slope, dtype=np.float64)
        beta = np.asarray(self.intercept, dtype=np.float64)
        if xi.shape != beta.shape or xi.ndim != 1:
            raise ValueError("slope and intercept must be equal-length vectors")
        if self.slope_nonneg and (xi < 0).any():
            raise ValueError("slopes must be non-negative")
        object.__setattr__(self, "slope", xi)
        object.__setattr__(self, "intercept", beta)
        if self.trait is not None:
            object.__setattr__(self, "trait", np.asarray(self.trait, dtype=np.float64))

    @property
    def n_attributes(self):
        return self.slope.shape[0]


def build_sigma_from_cholesky(delta):
    """Covariance delta @ delta.T from a lower-triangular factor.

    The factor must have a unit (1,1) entry and positive diagonal, which
    pins the first trait variance to 1 and keeps the result positive
    definite.
    """
    d = np.asarray(delta, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("cholesky factor must be square")
    if not np.allclose(d, np.tril(d)):
        raise ValueError("cholesky factor must be lower triangular")
    if d[0, 0] != 1.0:
        raise ValueError("the (1,1) entry must be 1")
    if (np.diag(d) <= 0).any():
        raise ValueError("diagonal entries must be positive")
    return d @ d.T


@dataclass(frozen=True)
class LongitudinalLatent:
    """Per-occasion trait means and Cholesky-parameterized covariance.

    The first occasion anchors the scale: its mean is 0 and its variance 1.
    """

    mean: np.ndarray
    cholesky: np.ndarray
    trait: np.ndarray = None

    def __post_init__(self):
        mu = np.asarray(self.mean, dtype=np.float64)
        if mu.ndim != 1 or mu[0] != 0.0:
            raise ValueError("occasion means must be a vector with first entry 0")
        d = np.asarray(self.cholesky, dtype=np.float64)
        if d.shape != (mu.shape[0], mu.shape[0]):
            raise ValueError("cholesky factor must be T x T")
        build_sigma_from_cholesky(d)  # validates triangularity and diagonal
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cholesky", d)
        if self.trait is not None:
            object.__setattr__(self, "trait", np.asarray(self.trait, dtype=np.float64))

    @property
    def n_occasions(self):
        return self.mean.shape[0]

    @property
    def covariance(self):
        return self.cholesky @ self.cholesky.T


def attribute_prob_higher_order(theta, k, p: HigherOrderLatent):
    """Mastery probability logistic(slope_k * theta - intercept_k)."""
    return float(logistic(p.slope[k] * theta - p.intercept[k]))


def class_prior(latent: UnstructuredLatent, c):
    """Prior probability of pattern class c (0-based row of the enumeration)."""
    if not 0 <= c < latent.n_patterns:
        raise IndexError(f"class index {c} outside 0..{latent.n_patterns - 1}")
    return float(latent.mixing[c])


@dataclass(frozen=True)
class PriorSpec:
    """All prior settings, with the conventional defaults.

    Beta scale pairs govern slip/guess and the baseline/penalty family;
    normal mean/precision pairs govern the logit-scale item parameters and
    the attribute slope/intercept.  `kway_mean` of None resolves per model
    (2.192 for the plain logit-scale model, 0 for the testlet/longitudinal
    variants).  `estimate_beta_scales` switches on uniform(0.1, 5)
    hyperpriors over the four slip/guess scale parameters.
    """

    slip_a: float = 1.0
    slip_b: float = 1.0
    guess_a: float = 1.0
    guess_b: float = 1.0
    baseline_a: float = 1.0
    baseline_b: float = 1.0
    penalty_a: float = 1.0
    penalty_b: float = 1.0
    intercept_mean: float = -1.096
    intercept_prec: float = 0.25
    kway_mean: float = None
    kway_prec: float = 0.25
    main_mean: float = 0.0
    main_prec: float = 0.25
    interaction_mean: float = 0.0
    interaction_prec: float = 0.25
    attr_intercept_mean: float = 0.0
    attr_intercept_prec: float = 0.25
    attr_slope_mean: float = 0.0
    attr_slope_prec: float = 0.25
    slope_nonneg: bool = True
    precision_shape: float = 1.0
    precision_rate: float = 1.0
    occasion_mean_prec: float = 0.5
    estimate_beta_scales: bool = False
    hyper_lo: float = 0.1
    hyper_hi: float = 5.0

    def __post_init__(self):
        for name in (
            "slip_a", "slip_b", "guess_a", "guess_b",
            "baseline_a", "baseline_b", "penalty_a", "penalty_b",
            "intercept_prec", "kway_prec", "main_prec", "interaction_prec",
            "attr_intercept_prec", "attr_slope_prec",
            "precision_shape", "precision_rate", "occasion_mean_prec",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def resolved_kway_mean(self, model_kind):
        if self.kway_mean is not None:
            return self.kway_mean
        return 0.0 if model_kind in ("testlet-dina", "long-dina") else 2.192

    @classmethod
    def noninformative(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def good_items(cls, **overrides):
        """Informative preset for high-quality items."""
        base = dict(
            slip_a=1.0, slip_b=3.0, guess_a=1.0, guess_b=3.0,
            baseline_a=3.0, baseline_b=1.0, penalty_a=3.0, penalty_b=1.0,
        )
        base.update(overrides)
        return cls(**base)

    def with_overrides(self, **overrides):
        return replace(self, **overrides)
