"""Samplers for the unstructured (pattern-mixture) latent structure.

Covers the conjunctive/disjunctive/ordered-category ideal-response models,
the logit-scale reparameterization, the compensatory and baseline/penalty
models, the log-linear general model, and the testlet extension.  One sweep
updates, in order: class memberships, mixing proportions, item parameters,
then testlet effects and their variances.
"""

import numpy as np
from scipy.special import xlog1py, xlogy

from .. import kernels
from ..core import conjunctive_table
from ..models import logistic
from .itemkernels import make_item_kernel
from .updates import (
    AdaptiveScales,
    draw_class_memberships,
    draw_mixing_proportions,
    draw_testlet_variance,
    vector_random_walk,
)

__all__ = ["PatternMixtureModel", "TestletMixtureModel"]


class _MixtureState:
    __slots__ = ("rng", "params", "pi", "classes", "scales", "gamma", "sigma2")

    def __init__(self, rng, params, pi, classes, scales, gamma=None, sigma2=None):
        self.rng = rng
        self.params = params
        self.pi = pi
        self.classes = classes
        self.scales = scales
        self.gamma = gamma
        self.sigma2 = sigma2


class PatternMixtureModel:
    """Mixture-over-patterns sampler for the class-table model kinds."""

    def __init__(self, kind, y, q, space, priors, config, dirichlet_scale=None):
        self.kind = kind
        self.y = y
        self.yu8 = np.ascontiguousarray(y.entries, dtype=np.uint8)
        self.q = q
        self.space = space
        self.priors = priors
        self.config = config
        self.kernel = make_item_kernel(kind, space.patterns, q, priors)
        c = space.n_patterns
        if dirichlet_scale is None:
            dirichlet_scale = np.ones(c)
        self.dirichlet_scale = np.asarray(dirichlet_scale, dtype=np.float64)
        if self.dirichlet_scale.shape != (c,) or (self.dirichlet_scale <= 0).any():
            raise ValueError("Dirichlet scale must be positive, one per pattern")
        self.n_persons = y.n_persons

    @property
    def n_params(self):
        """Sampled item parameters plus the free mixing proportions."""
        return self.kernel.n_params + self.space.n_patterns - 1

    def families(self):
        fams = dict(self.kernel.families())
        c = self.space.n_patterns
        fams["pai"] = ((c,), [f"pai[{j + 1}]" for j in range(c)])
        fams["c"] = ((self.n_persons,), [f"c[{n + 1}]" for n in range(self.n_persons)])
        return fams

    def _scale_families(self):
        return self.kernel.scale_families()

    def init_state(self, rng, chain_index):
        scales = AdaptiveScales(self._scale_families(), self.config)
        params = self.kernel.init(rng, self.config.overdispersion)
        pi = np.full(self.space.n_patterns, 1.0 / self.space.n_patterns)
        classes = rng.integers(0, self.space.n_patterns, self.n_persons)
        return _MixtureState(rng, params, pi, classes.astype(np.int64), scales)

    def sweep(self, state, adapt):
        table = self.kernel.table(state.params)
        with np.errstate(divide="ignore"):
            log_p = np.ascontiguousarray(np.log(table))
            log_q = np.ascontiguousarray(np.log1p(-table))
        loglik = kernels.person_class_loglik(self.yu8, log_p, log_q)
        state.classes = draw_class_memberships(state.rng, state.pi, loglik)
        m, r = kernels.class_counts(state.classes, self.yu8, self.space.n_patterns)
        state.pi = draw_mixing_proportions(state.rng, self.dirichlet_scale, m)
        state.params = self.kernel.update(state.params, m, r, state.rng, state.scales, adapt)

    def snapshot(self, state):
        out = {k: np.array(v, copy=True) for k, v in state.params.items()}
        out["pai"] = state.pi.copy()
        out["c"] = state.classes.astype(np.int32)
        return out

    def person_prob_matrix(self, state):
        table = self.kernel.table(state.params)
        return np.ascontiguousarray(table[state.classes])

    def acceptance_rates(self, state):
        return state.scales.rates()


class TestletMixtureModel:
    """Logit-scale mixture sampler with person-by-testlet random effects.

    `testlet_ids[i]` maps item i to its 0-based testlet, or to M for
    standalone items (whose effect is pinned at zero).
    """

    def __init__(self, y, q, space, priors, config, testlet_ids, n_testlets,
                 dirichlet_scale=None):
        self.kind = "testlet-dina"
        self.y = y
        self.yu8 = np.ascontiguousarray(y.entries, dtype=np.uint8)
        self.q = q
        self.space = space
        self.priors = priors
        self.config = config
        d = np.asarray(testlet_ids, dtype=np.int64)
        if d.shape != (q.n_items,):
            raise ValueError("need one testlet id per item")
        if n_testlets < 1:
            raise ValueError("need at least one testlet")
        if (d < 0).any() or (d > n_testlets).any():
            raise ValueError(
                f"testlet ids must lie in 0..{n_testlets} "
                f"({n_testlets} marks standalone items)")
        self.n_testlets = int(n_testlets)
        self.d = d
        self.eta = conjunctive_table(space.patterns, q.entries)
        self.kway_mean = priors.resolved_kway_mean("testlet-dina")
        c = space.n_patterns
        self.dirichlet_scale = np.ones(c) if dirichlet_scale is None else np.asarray(dirichlet_scale, float)
        self.n_persons = y.n_persons

    @property
    def n_params(self):
        return 2 * self.q.n_items + self.space.n_patterns - 1 + self.n_testlets

    def families(self):
        i, c, m = self.q.n_items, self.space.n_patterns, self.n_testlets
        return {
            "lambda0": ((i,), [f"lambda0[{j + 1}]" for j in range(i)]),
            "lambdaK": ((i,), [f"lambdaK[{j + 1}]" for j in range(i)]),
            "sigma2_gamma": ((m,), [f"sigma2_gamma[{j + 1}]" for j in range(m)]),
            "pai": ((c,), [f"pai[{j + 1}]" for j in range(c)]),
            "c": ((self.n_persons,), [f"c[{n + 1}]" for n in range(self.n_persons)]),
        }

    def _scale_families(self):
        i = self.q.n_items
        return {"intercept": i, "kway": i, "gamma": self.n_testlets}

    def init_state(self, rng, chain_index):
        pr = self.priors
        scales = AdaptiveScales(self._scale_families(), self.config)
        sd0 = pr.intercept_prec ** -0.5
        sdk = pr.kway_prec ** -0.5
        over = self.config.overdispersion
        i = self.q.n_items
        params = {
            "lambda0": pr.intercept_mean + over * sd0 * rng.uniform(-1, 1, i),
            "lambdaK": np.maximum(self.kway_mean + over * sdk * rng.uniform(-1, 1, i), 0.05),
        }
        pi = np.full(self.space.n_patterns, 1.0 / self.space.n_patterns)
        classes = rng.integers(0, self.space.n_patterns, self.n_persons).astype(np.int64)
        gamma = np.zeros((self.n_persons, self.n_testlets + 1))
        sigma2 = np.full(self.n_testlets, 1.0 / rng.gamma(pr.precision_shape, 1.0 / pr.precision_rate, self.n_testlets))
        return _MixtureState(rng, params, pi, classes, scales, gamma, sigma2)

    def _class_logits(self, params):
        return params["lambda0"][None, :] + params["lambdaK"][None, :] * self.eta

    def _person_loglik_by_class(self, state):
        """(N, C) response log-likelihood with the person's testlet offsets."""
        a = self._class_logits(state.params)  # (C, I)
        offsets = state.gamma[:, self.d]      # (N, I)
        yf = self.yu8.astype(np.float64)
        out = np.empty((self.n_persons, self.space.n_patterns))
        for c in range(self.space.n_patterns):
            p = logistic(a[c][None, :] + offsets)
            out[:, c] = (xlogy(yf, p) + xlog1py(1.0 - yf, -p)).sum(axis=1)
        return out

    def sweep(self, state, adapt):
        rng = state.rng
        loglik = self._person_loglik_by_class(state)
        state.classes = draw_class_memberships(rng, state.pi, loglik)
        m, _ = kernels.class_counts(state.classes, self.yu8, self.space.n_patterns)
        state.pi = draw_mixing_proportions(rng, self.dirichlet_scale, m)
        self._update_item_params(state, adapt)
        self._update_gamma(state, adapt)

    def _update_item_params(self, state, adapt):
        """Blocked Metropolis over items: per-item targets are independent
        given classes and gamma, so one joint proposal with per-item
        accept/reject is a valid update and needs two (N, I) likelihood
        passes per family instead of two per item."""
        pr = self.priors
        rng = state.rng
        yf = self.yu8.astype(np.float64)
        eta_n = self.eta[state.classes]            # (N, I)
        offsets = state.gamma[:, self.d]           # (N, I)
        l0, lk = state.params["lambda0"], state.params["lambdaK"]

        def item_ll(l0v, lkv):
            p = logistic(l0v[None, :] + lkv[None, :] * eta_n + offsets)
            return (yf * np.log(p) + (1.0 - yf) * np.log1p(-p)).sum(axis=0)

        def delta0(prop, cur):
            dprior = -0.5 * pr.intercept_prec * (
                (prop - pr.intercept_mean) ** 2 - (cur - pr.intercept_mean) ** 2)
            return item_ll(prop, lk) - item_ll(cur, lk) + dprior

        new0, acc0 = vector_random_walk(rng, l0, delta0, state.scales.get("intercept"))
        state.params["lambda0"] = new0
        l0 = new0

        def deltak(prop, cur):
            dprior = -0.5 * pr.kway_prec * (
                (prop - self.kway_mean) ** 2 - (cur - self.kway_mean) ** 2)
            return item_ll(l0, prop) - item_ll(l0, cur) + dprior

        newk, acck = vector_random_walk(
            rng, lk, deltak, state.scales.get("kway"), lower=0.0)
        state.params["lambdaK"] = newk
        state.scales.update("intercept", acc0, adapt)
        state.scales.update("kway", acck, adapt)

    def _update_gamma(self, state, adapt):
        pr = self.priors
        rng = state.rng
        yf = self.yu8.astype(np.float64)
        a = self._class_logits(state.params)
        acc = np.zeros(self.n_testlets)
        for t in range(self.n_testlets):
            items = np.flatnonzero(self.d == t)
            lin0 = a[state.classes][:, items]  # (N, |items|)
            yi = yf[:, items]
            cur = state.gamma[:, t]

            def delta(prop, curv):
                p1 = logistic(lin0 + prop[:, None])
                p0 = logistic(lin0 + curv[:, None])
                dll = (yi * (np.log(p1) - np.log(p0))
                       + (1.0 - yi) * (np.log1p(-p1) - np.log1p(-p0))).sum(axis=1)
                dpr = -0.5 * (prop ** 2 - curv ** 2) / state.sigma2[t]
                return dll + dpr

            new, accepted = vector_random_walk(
                rng, cur, delta, state.scales.get("gamma")[t])
            state.gamma[:, t] = new
            acc[t] = accepted.mean()
            state.sigma2[t] = draw_testlet_variance(
                rng, state.gamma[:, t], pr.precision_shape, pr.precision_rate)
        state.scales.update("gamma", acc, adapt)

    def snapshot(self, state):
        return {
            "lambda0": state.params["lambda0"].copy(),
            "lambdaK": state.params["lambdaK"].copy(),
            "sigma2_gamma": state.sigma2.copy(),
            "pai": state.pi.copy(),
            "c": state.classes.astype(np.int32),
        }

    def person_prob_matrix(self, state):
        a = self._class_logits(state.params)
        lin = a[state.classes] + state.gamma[:, self.d]
        return np.ascontiguousarray(logistic(lin))

    def acceptance_rates(self, state):
        return state.scales.rates()
