"""Sampler for the higher-order latent structure over a conjunctive model.

Attributes are conditionally independent Bernoulli given one continuous
trait per person; attribute updates are exact two-point Gibbs draws, the
trait and the structural slope/intercept move by random-walk Metropolis,
and slip/guess keep their conjugate truncated-Beta updates.
"""

import numpy as np
from scipy.special import xlog1py, xlogy

from ..models import logistic
from .updates import (
    AdaptiveScales,
    draw_attribute_bernoulli,
    draw_slip_guess,
    random_walk_update,
    vector_random_walk,
)

__all__ = ["HigherOrderDina"]


def _bern_logpdf(a, p):
    # xlogy keeps 0 * log(0) at 0, so saturated probabilities cannot produce NaN
    return xlogy(a, p) + xlog1py(1.0 - a, -p)


class _HoState:
    __slots__ = ("rng", "alpha", "theta", "slip", "guess", "xi", "beta", "scales", "m_req")

    def __init__(self, **kw):
        for k, v in kw.items():
            setattr(self, k, v)


class HigherOrderDina:
    kind = "ho-dina"

    def __init__(self, y, q, space, priors, config):
        if not q.is_binary:
            raise ValueError("the higher-order structure needs a binary Q-matrix")
        self.y = y
        self.yu8 = np.ascontiguousarray(y.entries, dtype=np.uint8)
        self.yf = self.yu8.astype(np.float64)
        self.q = q
        self.space = space
        self.priors = priors
        self.config = config
        self.qarr = q.entries
        self.qsum = self.qarr.sum(axis=1)
        self.n_persons = y.n_persons
        # class index = alpha . strides under the odometer enumeration
        self.strides = np.array(
            [2 ** k for k in range(q.n_attributes)], dtype=np.int64)

    @property
    def n_params(self):
        return 2 * self.q.n_items + 2 * self.q.n_attributes

    def families(self):
        i, k = self.q.n_items, self.q.n_attributes
        return {
            "s": ((i,), [f"s[{j + 1}]" for j in range(i)]),
            "g": ((i,), [f"g[{j + 1}]" for j in range(i)]),
            "xi": ((k,), [f"xi[{j + 1}]" for j in range(k)]),
            "beta": ((k,), [f"beta[{j + 1}]" for j in range(k)]),
            "c": ((self.n_persons,), [f"c[{n + 1}]" for n in range(self.n_persons)]),
        }

    def _scale_families(self):
        k = self.q.n_attributes
        return {"theta": 1, "xi": k, "attr_intercept": k}

    def init_state(self, rng, chain_index):
        pr = self.priors
        over = self.config.overdispersion
        i, k, n = self.q.n_items, self.q.n_attributes, self.n_persons
        s_ab = pr.slip_a + pr.slip_b
        g_ab = pr.guess_a + pr.guess_b
        s_mean, s_sd = pr.slip_a / s_ab, np.sqrt(pr.slip_a * pr.slip_b / (s_ab ** 2 * (s_ab + 1)))
        g_mean, g_sd = pr.guess_a / g_ab, np.sqrt(pr.guess_a * pr.guess_b / (g_ab ** 2 * (g_ab + 1)))
        s = np.clip(s_mean + over * s_sd * rng.uniform(-1, 1, i), 0.02, 0.9)
        g = np.clip(g_mean + over * g_sd * rng.uniform(-1, 1, i), 0.02, 1.0 - s - 0.02)
        sd_xi = pr.attr_slope_prec ** -0.5
        sd_b = pr.attr_intercept_prec ** -0.5
        xi = pr.attr_slope_mean + over * sd_xi * rng.uniform(-1, 1, k)
        if pr.slope_nonneg:
            xi = np.maximum(xi, 0.05)
        beta = pr.attr_intercept_mean + over * sd_b * rng.uniform(-1, 1, k)
        alpha = rng.integers(0, 2, (n, k)).astype(np.int8)
        theta = rng.standard_normal(n)
        state = _HoState(rng=rng, alpha=alpha, theta=theta, slip=s, guess=g,
                         xi=xi, beta=beta, scales=AdaptiveScales(self._scale_families(), self.config),
                         m_req=None)
        state.m_req = alpha.astype(np.int64) @ self.qarr.T
        return state

    def _eta(self, state):
        return (state.m_req == self.qsum[None, :]).astype(np.float64)

    def sweep(self, state, adapt):
        self._update_attributes(state)
        self._update_theta(state, adapt)
        self._update_slip_guess(state)
        self._update_structure(state, adapt)

    def _update_attributes(self, state):
        """Exact two-point Gibbs draw of each attribute column."""
        rng = state.rng
        s, g = state.slip, state.guess
        w1 = np.log(1.0 - s) - np.log(g)       # response gain when eta flips to 1
        w0 = np.log(s) - np.log(1.0 - g)
        for k in range(self.q.n_attributes):
            items = np.flatnonzero(self.qarr[:, k] == 1)
            if items.size == 0:
                continue
            m_wo = state.m_req[:, items] - state.alpha[:, k, None].astype(np.int64)
            others = (m_wo == (self.qsum[items] - 1)[None, :]).astype(np.float64)
            yk = self.yf[:, items]
            dll = (others * (yk * w1[items] + (1.0 - yk) * w0[items])).sum(axis=1)
            prior_logit = state.xi[k] * state.theta - state.beta[k]
            new_col = draw_attribute_bernoulli(rng, prior_logit, dll)
            state.m_req[:, items] = m_wo + new_col[:, None].astype(np.int64)
            state.alpha[:, k] = new_col

    def _update_theta(self, state, adapt):
        xi, beta, alpha = state.xi, state.beta, state.alpha.astype(np.float64)

        def delta(prop, cur):
            p1 = logistic(np.outer(prop, xi) - beta[None, :])
            p0 = logistic(np.outer(cur, xi) - beta[None, :])
            dll = (_bern_logpdf(alpha, p1) - _bern_logpdf(alpha, p0)).sum(axis=1)
            return dll - 0.5 * (prop ** 2 - cur ** 2)

        new, accepted = vector_random_walk(
            state.rng, state.theta, delta, state.scales.get("theta")[0])
        state.theta = new
        state.scales.update("theta", accepted.mean(), adapt)

    def _update_slip_guess(self, state):
        eta = self._eta(state)
        n1 = eta.sum(axis=0)
        r1 = (self.yf * eta).sum(axis=0)
        r0 = self.yf.sum(axis=0) - r1
        n0 = self.n_persons - n1
        state.slip, state.guess = draw_slip_guess(
            state.rng, state.slip, state.guess, n1, r1, n0, r0, self.priors)

    def _update_structure(self, state, adapt):
        pr = self.priors
        rng = state.rng
        acc_xi = np.zeros(self.q.n_attributes)
        acc_b = np.zeros(self.q.n_attributes)
        for k in range(self.q.n_attributes):
            a_k = state.alpha[:, k].astype(np.float64)

            def ll(xi_k, beta_k):
                p = logistic(xi_k * state.theta - beta_k)
                return float(np.sum(_bern_logpdf(a_k, p)))

            def post_xi(x):
                return ll(x, state.beta[k]) - 0.5 * pr.attr_slope_prec * (x - pr.attr_slope_mean) ** 2

            lower = 0.0 if pr.slope_nonneg else -np.inf
            state.xi[k], a1 = random_walk_update(
                rng, state.xi[k], post_xi, state.scales.get("xi")[k], lower=lower)
            acc_xi[k] = a1

            def post_beta(x):
                return ll(state.xi[k], x) - 0.5 * pr.attr_intercept_prec * (x - pr.attr_intercept_mean) ** 2

            state.beta[k], a2 = random_walk_update(
                rng, state.beta[k], post_beta, state.scales.get("attr_intercept")[k])
            acc_b[k] = a2
        state.scales.update("xi", acc_xi, adapt)
        state.scales.update("attr_intercept", acc_b, adapt)

    def snapshot(self, state):
        return {
            "s": state.slip.copy(),
            "g": state.guess.copy(),
            "xi": state.xi.copy(),
            "beta": state.beta.copy(),
            "c": (state.alpha.astype(np.int64) @ self.strides).astype(np.int32),
        }

    def person_prob_matrix(self, state):
        eta = self._eta(state)
        p = state.guess[None, :] + (1.0 - state.slip - state.guess)[None, :] * eta
        return np.ascontiguousarray(p)

    def acceptance_rates(self, state):
        return state.scales.rates()
