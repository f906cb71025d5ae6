"""Sampler for the three-level longitudinal model.

Responses follow the logit-scale conjunctive model per occasion with
anchor-item random effects; attributes follow the higher-order structure
per occasion; the occasion traits are multivariate normal with the
covariance parameterized through its Cholesky factor (unit first diagonal
entry, so the first occasion's trait variance stays 1).  Anchor items share
their item parameters across occasions through an index map, not duplicated
storage.
"""

import numpy as np
from scipy.special import xlog1py, xlogy

from ..models import logistic
from .updates import (
    AdaptiveScales,
    draw_attribute_bernoulli,
    draw_testlet_variance,
    random_walk_update,
    vector_random_walk,
)

__all__ = ["LongitudinalDina", "longitudinal_layout"]


def _bern_logpdf(a, p):
    # xlogy keeps 0 * log(0) at 0, so saturated probabilities cannot produce NaN
    return xlogy(a, p) + xlog1py(1.0 - a, -p)


def longitudinal_layout(items_per_occasion, n_anchor_items):
    """Item-slot layout for anchor designs: occasion ids, testlet ids, ties.

    The first `n_anchor_items` items of every occasion are the same physical
    items: their parameters tie to the first occasion's slots and each
    anchor j gets its own random-effect dimension; all other items are
    standalone (id = n_anchor_items).
    """
    items_per_occasion = [int(v) for v in items_per_occasion]
    m = int(n_anchor_items)
    if any(m > it for it in items_per_occasion):
        raise ValueError("more anchor items than items on an occasion")
    occ, d, tie = [], [], []
    free = 0
    first_occasion_slot = {}
    for t, count in enumerate(items_per_occasion):
        for j in range(count):
            occ.append(t)
            d.append(j if j < m else m)
            if t > 0 and j < m:
                tie.append(first_occasion_slot[j])
            else:
                if t == 0 and j < m:
                    first_occasion_slot[j] = free
                tie.append(free)
                free += 1
    return np.array(occ), np.array(d), np.array(tie), free


class _LongState:
    __slots__ = ("rng", "alpha", "theta", "lambda0", "lambdaK", "gamma", "sigma2",
                 "mu", "chol", "xi", "beta", "scales", "prec", "logdet")

    def __init__(self, **kw):
        for k, v in kw.items():
            setattr(self, k, v)

    def refresh_covariance(self):
        sigma = self.chol @ self.chol.T
        self.prec = np.linalg.inv(sigma)
        self.logdet = 2.0 * np.log(np.diag(self.chol)).sum()


class LongitudinalDina:
    kind = "long-dina"

    def __init__(self, y, q_stacked, priors, config, items_per_occasion, n_anchor_items):
        self.y = y
        self.yu8 = np.ascontiguousarray(y.entries, dtype=np.uint8)
        self.yf = self.yu8.astype(np.float64)
        self.q = q_stacked
        if not q_stacked.is_binary:
            raise ValueError("the longitudinal model needs a binary Q-matrix")
        self.priors = priors
        self.config = config
        if len(items_per_occasion) < 2:
            raise ValueError("the longitudinal model needs at least two occasions")
        occ, d, tie, free = longitudinal_layout(items_per_occasion, n_anchor_items)
        if occ.shape[0] != q_stacked.n_items:
            raise ValueError("occasion layout disagrees with the stacked Q-matrix")
        self.occ = occ
        self.d = d
        self.tie = tie
        self.n_free = free
        self.n_occasions = len(items_per_occasion)
        self.n_testlets = int(n_anchor_items)
        self.kway_mean = priors.resolved_kway_mean("long-dina")
        self.qarr = q_stacked.entries
        self.qsum = self.qarr.sum(axis=1)
        self.n_persons = y.n_persons
        k = q_stacked.n_attributes
        self.strides = np.array([2 ** j for j in range(k)], dtype=np.int64)
        self.occ_slots = [np.flatnonzero(occ == t) for t in range(self.n_occasions)]
        # canonical labels name the free parameters by (item-on-occasion, occasion)
        self._free_labels = []
        seen = set()
        for slot in range(q_stacked.n_items):
            f = tie[slot]
            if f not in seen:
                seen.add(f)
                t = occ[slot]
                within = slot - self.occ_slots[t][0]
                self._free_labels.append(f"[{within + 1},{t + 1}]")

    @property
    def n_params(self):
        t = self.n_occasions
        chol_free = (t - 1) + t * (t - 1) // 2
        return (2 * self.n_free + 2 * self.q.n_attributes + self.n_testlets
                + (t - 1) + chol_free)

    def families(self):
        k, m, t, n = self.q.n_attributes, self.n_testlets, self.n_occasions, self.n_persons
        tril = [(a, b) for a in range(t) for b in range(a + 1)]
        return {
            "lambda0": ((self.n_free,), [f"lambda0{s}" for s in self._free_labels]),
            "lambdaK": ((self.n_free,), [f"lambdaK{s}" for s in self._free_labels]),
            "xi": ((k,), [f"xi[{j + 1}]" for j in range(k)]),
            "beta": ((k,), [f"beta[{j + 1}]" for j in range(k)]),
            "sigma2_gamma": ((m,), [f"sigma2_gamma[{j + 1}]" for j in range(m)]),
            "mu_theta": ((t - 1,), [f"mu_theta[{j + 2}]" for j in range(t - 1)]),
            "Sigma_theta": ((len(tril),), [f"Sigma_theta[{a + 1},{b + 1}]" for a, b in tril]),
            "c": ((n, t), [f"c[{i + 1},{j + 1}]" for i in range(n) for j in range(t)]),
        }

    def _scale_families(self):
        k, t = self.q.n_attributes, self.n_occasions
        return {
            "intercept": self.n_free,
            "kway": self.n_free,
            "gamma": max(1, self.n_testlets),
            "theta": t,
            "xi": k,
            "attr_intercept": k,
            "mu": max(1, t - 1),
            "chol_diag": max(1, t - 1),
            "chol_offdiag": max(1, t * (t - 1) // 2),
        }

    def init_state(self, rng, chain_index):
        pr = self.priors
        over = self.config.overdispersion
        n, k, t = self.n_persons, self.q.n_attributes, self.n_occasions
        sd0 = pr.intercept_prec ** -0.5
        sdk = pr.kway_prec ** -0.5
        lambda0 = pr.intercept_mean + over * sd0 * rng.uniform(-1, 1, self.n_free)
        lambdaK = np.maximum(self.kway_mean + over * sdk * rng.uniform(-1, 1, self.n_free), 0.05)
        xi = np.maximum(over * (pr.attr_slope_prec ** -0.5) * rng.uniform(-1, 1, k), 0.05) \
            if pr.slope_nonneg else over * rng.uniform(-1, 1, k)
        beta = pr.attr_intercept_mean + over * (pr.attr_intercept_prec ** -0.5) * rng.uniform(-1, 1, k)
        chol = np.eye(t)
        state = _LongState(
            rng=rng,
            alpha=rng.integers(0, 2, (n, k, t)).astype(np.int8),
            theta=rng.standard_normal((n, t)),
            lambda0=lambda0, lambdaK=lambdaK,
            gamma=np.zeros((n, self.n_testlets + 1)),
            sigma2=np.ones(self.n_testlets),
            mu=np.zeros(t),
            chol=chol,
            xi=xi, beta=beta,
            scales=AdaptiveScales(self._scale_families(), self.config),
            prec=None, logdet=None,
        )
        state.refresh_covariance()
        return state

    # -- likelihood pieces ------------------------------------------------

    def _slot_params(self, state):
        return state.lambda0[self.tie], state.lambdaK[self.tie]

    def _eta(self, state):
        eta = np.empty((self.n_persons, self.q.n_items))
        for tt in range(self.n_occasions):
            slots = self.occ_slots[tt]
            m = state.alpha[:, :, tt].astype(np.int64) @ self.qarr[slots].T
            eta[:, slots] = (m == self.qsum[slots][None, :]).astype(np.float64)
        return eta

    def person_prob_matrix(self, state):
        l0, lk = self._slot_params(state)
        lin = l0[None, :] + lk[None, :] * self._eta(state) + state.gamma[:, self.d]
        return np.ascontiguousarray(logistic(lin))

    # -- sweep -------------------------------------------------------------

    def sweep(self, state, adapt):
        self._update_attributes(state)
        self._update_theta(state, adapt)
        self._update_items(state, adapt)
        self._update_gamma(state, adapt)
        self._update_structure(state, adapt)
        self._update_population(state, adapt)

    def _update_attributes(self, state):
        rng = state.rng
        l0, lk = self._slot_params(state)
        for tt in range(self.n_occasions):
            slots = self.occ_slots[tt]
            alpha_t = state.alpha[:, :, tt]
            m = alpha_t.astype(np.int64) @ self.qarr[slots].T
            for k in range(self.q.n_attributes):
                req = self.qarr[slots, k] == 1
                items = slots[req]
                if items.size == 0:
                    continue
                m_wo = m[:, req] - alpha_t[:, k, None].astype(np.int64)
                others = (m_wo == (self.qsum[items] - 1)[None, :]).astype(np.float64)
                base = l0[items][None, :] + state.gamma[:, self.d[items]]
                p0 = logistic(base)
                p1 = logistic(base + lk[items][None, :])
                yk = self.yf[:, items]
                dll = (others * (yk * (np.log(p1) - np.log(p0))
                                 + (1.0 - yk) * (np.log1p(-p1) - np.log1p(-p0)))).sum(axis=1)
                prior_logit = state.xi[k] * state.theta[:, tt] - state.beta[k]
                new_col = draw_attribute_bernoulli(rng, prior_logit, dll)
                m[:, req] = m_wo + new_col[:, None].astype(np.int64)
                alpha_t[:, k] = new_col

    def _quadform(self, state, dev):
        return np.einsum("nt,tu,nu->n", dev, state.prec, dev)

    def _update_theta(self, state, adapt):
        acc = np.zeros(self.n_occasions)
        for tt in range(self.n_occasions):
            alpha_t = state.alpha[:, :, tt].astype(np.float64)

            def delta(prop, cur):
                p1 = logistic(np.outer(prop, state.xi) - state.beta[None, :])
                p0 = logistic(np.outer(cur, state.xi) - state.beta[None, :])
                dll = (_bern_logpdf(alpha_t, p1) - _bern_logpdf(alpha_t, p0)).sum(axis=1)
                dev_prop = state.theta - state.mu[None, :]
                dev_prop = dev_prop.copy()
                dev_prop[:, tt] = prop - state.mu[tt]
                dev_cur = state.theta - state.mu[None, :]
                return dll - 0.5 * (self._quadform(state, dev_prop)
                                    - self._quadform(state, dev_cur))

            new, accepted = vector_random_walk(
                state.rng, state.theta[:, tt], delta, state.scales.get("theta")[tt])
            state.theta[:, tt] = new
            acc[tt] = accepted.mean()
        state.scales.update("theta", acc, adapt)

    def _update_items(self, state, adapt):
        pr = self.priors
        rng = state.rng
        eta = self._eta(state)
        offsets = state.gamma[:, self.d]
        acc0 = np.zeros(self.n_free)
        acck = np.zeros(self.n_free)
        slots_of = [np.flatnonzero(self.tie == f) for f in range(self.n_free)]
        for f in range(self.n_free):
            slots = slots_of[f]
            yi = self.yf[:, slots]
            eta_i = eta[:, slots]
            off = offsets[:, slots]

            def ll(l0f, lkf):
                p = logistic(l0f + lkf * eta_i + off)
                return float((yi * np.log(p) + (1.0 - yi) * np.log1p(-p)).sum())

            def post0(x):
                return ll(x, state.lambdaK[f]) - 0.5 * pr.intercept_prec * (x - pr.intercept_mean) ** 2

            state.lambda0[f], a0 = random_walk_update(
                rng, state.lambda0[f], post0, state.scales.get("intercept")[f])
            acc0[f] = a0

            def postk(x):
                return ll(state.lambda0[f], x) - 0.5 * pr.kway_prec * (x - self.kway_mean) ** 2

            state.lambdaK[f], ak = random_walk_update(
                rng, state.lambdaK[f], postk, state.scales.get("kway")[f], lower=0.0)
            acck[f] = ak
        state.scales.update("intercept", acc0, adapt)
        state.scales.update("kway", acck, adapt)

    def _update_gamma(self, state, adapt):
        if self.n_testlets == 0:
            return
        pr = self.priors
        l0, lk = self._slot_params(state)
        eta = self._eta(state)
        acc = np.zeros(self.n_testlets)
        for m_idx in range(self.n_testlets):
            items = np.flatnonzero(self.d == m_idx)
            lin0 = l0[items][None, :] + lk[items][None, :] * eta[:, items]
            yi = self.yf[:, items]

            def delta(prop, cur):
                p1 = logistic(lin0 + prop[:, None])
                p0 = logistic(lin0 + cur[:, None])
                dll = (yi * (np.log(p1) - np.log(p0))
                       + (1.0 - yi) * (np.log1p(-p1) - np.log1p(-p0))).sum(axis=1)
                return dll - 0.5 * (prop ** 2 - cur ** 2) / state.sigma2[m_idx]

            new, accepted = vector_random_walk(
                state.rng, state.gamma[:, m_idx], delta, state.scales.get("gamma")[m_idx])
            state.gamma[:, m_idx] = new
            acc[m_idx] = accepted.mean()
            state.sigma2[m_idx] = draw_testlet_variance(
                state.rng, state.gamma[:, m_idx], pr.precision_shape, pr.precision_rate)
        state.scales.update("gamma", acc, adapt)

    def _update_structure(self, state, adapt):
        pr = self.priors
        rng = state.rng
        k_count = self.q.n_attributes
        acc_xi = np.zeros(k_count)
        acc_b = np.zeros(k_count)
        for k in range(k_count):
            a_k = state.alpha[:, k, :].astype(np.float64)  # (N, T)

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

    def _mvn_loglik(self, state, mu=None, chol=None):
        """Sum over persons of the trait log-density (constants dropped)."""
        mu = state.mu if mu is None else mu
        if chol is None:
            prec, logdet = state.prec, state.logdet
        else:
            sigma = chol @ chol.T
            try:
                prec = np.linalg.inv(sigma)
            except np.linalg.LinAlgError:
                return -np.inf
            logdet = 2.0 * np.log(np.diag(chol)).sum()
        dev = state.theta - mu[None, :]
        qf = np.einsum("nt,tu,nu->n", dev, prec, dev)
        return -0.5 * self.n_persons * logdet - 0.5 * qf.sum()

    def _update_population(self, state, adapt):
        pr = self.priors
        rng = state.rng
        t = self.n_occasions
        # occasion means (first pinned at 0)
        acc_mu = np.zeros(max(1, t - 1))
        for j, tt in enumerate(range(1, t)):
            def post_mu(x):
                mu = state.mu.copy()
                mu[tt] = x
                return self._mvn_loglik(state, mu=mu) - 0.5 * pr.occasion_mean_prec * x ** 2

            state.mu[tt], a = random_walk_update(
                rng, state.mu[tt], post_mu, state.scales.get("mu")[j])
            acc_mu[j] = a
        if t > 1:
            state.scales.update("mu", acc_mu, adapt)

        # Cholesky factor: positive diagonals (Gamma prior), free sub-diagonal
        # entries (standard-normal prior); the (1,1) entry stays 1
        acc_d = np.zeros(max(1, t - 1))
        for j, tt in enumerate(range(1, t)):
            def post_diag(x):
                chol = state.chol.copy()
                chol[tt, tt] = x
                return (self._mvn_loglik(state, chol=chol)
                        + (pr.precision_shape - 1.0) * np.log(x) - pr.precision_rate * x)

            new, a = random_walk_update(
                rng, state.chol[tt, tt], post_diag,
                state.scales.get("chol_diag")[j], lower=0.0)
            state.chol[tt, tt] = new
            state.refresh_covariance()
            acc_d[j] = a
        off_pairs = [(a, b) for a in range(1, t) for b in range(a)]
        acc_o = np.zeros(max(1, len(off_pairs)))
        for j, (a_i, b_i) in enumerate(off_pairs):
            def post_off(x):
                chol = state.chol.copy()
                chol[a_i, b_i] = x
                return self._mvn_loglik(state, chol=chol) - 0.5 * x ** 2

            new, a = random_walk_update(
                rng, state.chol[a_i, b_i], post_off, state.scales.get("chol_offdiag")[j])
            state.chol[a_i, b_i] = new
            state.refresh_covariance()
            acc_o[j] = a
        if t > 1:
            state.scales.update("chol_diag", acc_d, adapt)
            state.scales.update("chol_offdiag", acc_o, adapt)

    def snapshot(self, state):
        t = self.n_occasions
        sigma = state.chol @ state.chol.T
        tril = [(a, b) for a in range(t) for b in range(a + 1)]
        classes = np.empty((self.n_persons, t), dtype=np.int32)
        for tt in range(t):
            classes[:, tt] = state.alpha[:, :, tt].astype(np.int64) @ self.strides
        return {
            "lambda0": state.lambda0.copy(),
            "lambdaK": state.lambdaK.copy(),
            "xi": state.xi.copy(),
            "beta": state.beta.copy(),
            "sigma2_gamma": state.sigma2.copy(),
            "mu_theta": state.mu[1:].copy(),
            "Sigma_theta": np.array([sigma[a, b] for a, b in tril]),
            "c": classes,
        }

    def acceptance_rates(self, state):
        return state.scales.rates()
