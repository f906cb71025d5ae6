"""Reusable Gibbs and Metropolis update primitives.

Every draw takes the chain's Generator explicitly; nothing here owns state.
"""

import numpy as np

from ..kernels import draw_categorical_rows
from ..rng import dirichlet, truncated_beta

__all__ = [
    "draw_class_memberships",
    "draw_mixing_proportions",
    "draw_slip_guess",
    "random_walk_update",
    "vector_random_walk",
    "draw_attribute_bernoulli",
    "draw_testlet_variance",
    "AdaptiveScales",
]


def draw_class_memberships(rng, mixing, class_loglik):
    """Exact categorical full-conditional draw of one class per person.

    Weights are proportional to mixing[c] * exp(class_loglik[n, c]).
    """
    logw = class_loglik + np.log(mixing)[None, :]
    finite_rows = np.isfinite(logw.max(axis=1))
    if not finite_rows.all():
        raise ValueError("all class weights vanished for at least one person")
    return draw_categorical_rows(np.ascontiguousarray(logw), rng.random(logw.shape[0]))


def draw_mixing_proportions(rng, dirichlet_scale, counts):
    """Conjugate Dirichlet(scale + class counts) draw."""
    return dirichlet(rng, np.asarray(dirichlet_scale, dtype=np.float64) + counts)


def draw_slip_guess(rng, slip, guess, n1, r1, n0, r0, priors):
    """Conjugate truncated-Beta update of the slip/guess vectors.

    n1/r1 are per-item counts of (all cells, correct cells) where the ideal
    response is 1; n0/r0 the same where it is 0.  Each slip draw is
    truncated to keep guess < 1 - slip against the current guess, then each
    guess draw against the fresh slip, so the constraint holds at any point.
    """
    s_new = truncated_beta(
        rng,
        priors.slip_a + (n1 - r1),
        priors.slip_b + r1,
        upper=1.0 - guess,
    )
    g_new = truncated_beta(
        rng,
        priors.guess_a + r0,
        priors.guess_b + (n0 - r0),
        upper=1.0 - s_new,
    )
    return s_new, g_new


def random_walk_update(rng, current, log_target, scale, lower=-np.inf, upper=np.inf):
    """One Gaussian random-walk Metropolis step on a scalar.

    Proposals outside (lower, upper) are rejected outright (the target is
    zero there); a non-finite proposal density also rejects.  Returns
    (value, accepted).
    """
    prop = current + scale * rng.standard_normal()
    if not lower < prop < upper:
        return current, False
    delta = log_target(prop) - log_target(current)
    if not np.isfinite(delta):
        if delta > 0:  # current state impossible, proposal finite: take it
            return prop, True
        return current, False
    if delta >= 0.0 or rng.random() < np.exp(delta):
        return prop, True
    return current, False


def vector_random_walk(rng, current, log_target_delta, scale, lower=-np.inf, upper=np.inf):
    """Elementwise random-walk Metropolis on a vector of independent targets.

    `log_target_delta(prop, cur)` returns the per-element log target
    difference, vectorized.  Out-of-range proposals are evaluated at the
    current point (so the callable never sees them) and rejected.  Returns
    (values, accepted_mask).
    """
    prop = current + scale * rng.standard_normal(current.shape)
    in_range = (prop > lower) & (prop < upper)
    prop_eval = np.where(in_range, prop, current)
    delta = log_target_delta(prop_eval, current)
    delta = np.where(in_range & ~np.isnan(delta), delta, -np.inf)
    accept = np.log(rng.random(current.shape)) < delta
    return np.where(accept, prop, current), accept


def draw_attribute_bernoulli(rng, prior_logit, loglik_diff):
    """Two-point Gibbs draw of a binary attribute, vectorized over persons.

    `prior_logit` is the structural log-odds of mastery; `loglik_diff` the
    response log-likelihood difference (mastered minus not).
    """
    logit = prior_logit + loglik_diff
    # stable sigmoid comparison: u < sigma(logit)  <=>  log(u/(1-u)) < logit
    u = rng.random(np.shape(logit))
    return (np.log(u) - np.log1p(-u) < logit).astype(np.int8)


def draw_testlet_variance(rng, gamma_column, shape, rate):
    """Conjugate draw of one testlet variance via its Gamma precision."""
    n = gamma_column.shape[0]
    precision = rng.gamma(shape + 0.5 * n, 1.0 / (rate + 0.5 * float(gamma_column @ gamma_column)))
    return 1.0 / precision


class AdaptiveScales:
    """Robbins-Monro tuning of random-walk scales toward a target rate.

    Scales move on the log scale with a decaying gain and freeze once
    `adapting` is switched off (after burn-in), preserving ergodicity.
    """

    def __init__(self, families, config):
        self.scales = {
            name: np.full(size, config.scale_for(name), dtype=np.float64)
            for name, size in families.items()
        }
        self.target = config.target_accept
        self.steps = {name: 0 for name in families}
        self._acc_sum = {name: 0.0 for name in families}
        self._acc_n = {name: 0 for name in families}

    def get(self, name):
        return self.scales[name]

    def update(self, name, accepted, adapting):
        acc = np.asarray(accepted, dtype=np.float64)
        self._acc_sum[name] += float(acc.mean())
        self._acc_n[name] += 1
        if not adapting:
            return
        self.steps[name] += 1
        gain = min(0.3, 2.0 * self.steps[name] ** -0.6)
        self.scales[name] = np.clip(
            self.scales[name] * np.exp(gain * (acc - self.target)), 1e-5, 50.0
        )

    def rates(self):
        """Cumulative mean acceptance rate per family."""
        return {
            name: self._acc_sum[name] / max(1, self._acc_n[name])
            for name in self.scales
        }
