"""Random-variate helpers used by the sampler.

Truncated Beta and Normal draws go through the inverse CDF of the truncated
region, which is exact and needs exactly one uniform per draw (no rejection
loop with unbounded worst case).
"""

import numpy as np
from scipy import stats

__all__ = ["truncated_beta", "truncated_normal", "dirichlet"]

_EPS = 1e-12


def _uniforms(rng, size, *broadcast_args):
    if size is None:
        size = np.broadcast(*broadcast_args).shape or None
    return rng.uniform(size=size)


def truncated_beta(rng, a, b, lower=0.0, upper=1.0, size=None):
    """Draw Beta(a, b) conditioned on the open interval (lower, upper)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    lo = stats.beta.cdf(lower, a, b)
    hi = stats.beta.cdf(upper, a, b)
    u = _uniforms(rng, size, a, b, lower, upper)
    q = np.clip(lo + u * (hi - lo), _EPS, 1.0 - _EPS)
    draw = stats.beta.ppf(q, a, b)
    # keep draws strictly inside the region so ordering constraints hold
    return np.clip(draw, np.nextafter(lower, 1.0), np.nextafter(upper, 0.0))


def truncated_normal(rng, mean, sd, lower=-np.inf, upper=np.inf, size=None):
    """Draw Normal(mean, sd) conditioned on the interval (lower, upper)."""
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    lo = stats.norm.cdf(lower, loc=mean, scale=sd)
    hi = stats.norm.cdf(upper, loc=mean, scale=sd)
    u = _uniforms(rng, size, mean, sd)
    q = np.clip(lo + u * (hi - lo), _EPS, 1.0 - _EPS)
    return stats.norm.ppf(q, loc=mean, scale=sd)


def dirichlet(rng, alpha):
    """Dirichlet draw that stays on the simplex even for tiny concentrations."""
    alpha = np.asarray(alpha, dtype=np.float64)
    g = rng.gamma(alpha)
    total = g.sum()
    if total <= 0.0:
        # all-zero gammas can only happen for pathologically small alphas
        g = np.full_like(alpha, 1.0 / alpha.size)
        total = 1.0
    return g / total
