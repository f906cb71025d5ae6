"""Per-model item-parameter machinery for the pattern-mixture sampler.

Each kernel owns the map from item parameters to the (C, I) class-by-item
success-probability table, the prior, the initialization (prior mean plus
overdispersion jitter), and the per-sweep update: conjugate truncated-Beta
draws for the slip/guess family, random-walk Metropolis for the logit-scale
and baseline/penalty families.  Updates consume only the per-class
sufficient statistics (person counts m, correct counts r), which the class
memberships determine.
"""

import numpy as np
from scipy.special import betaln, xlogy
from scipy.stats import beta as beta_dist

from ..models import dina_table, logistic
from ..rng import truncated_beta
from .updates import draw_slip_guess, random_walk_update

__all__ = [
    "SlipGuessKernel",
    "RdinaKernel",
    "LlmKernel",
    "RrumKernel",
    "LcdmKernel",
    "make_item_kernel",
]


def _suff_loglik(p_row, m, r_i):
    """Item log-likelihood from class counts and a class success-prob row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.sum(xlogy(r_i, p_row) + xlogy(m - r_i, 1.0 - p_row)))


def _norm_logpdf(x, mean, prec):
    return -0.5 * prec * (x - mean) ** 2


def _beta_logpdf(x, a, b):
    return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x)


def _item_labels(name, n):
    return [f"{name}[{i + 1}]" for i in range(n)]


class SlipGuessKernel:
    """Conjugate slip/guess updates for the ideal-response models."""

    item_families = ("g", "s")

    def __init__(self, eta_table, priors, model_kind):
        self.eta = np.asarray(eta_table, dtype=np.float64)
        self.n_items = self.eta.shape[1]
        self.priors = priors
        self.model_kind = model_kind

    @property
    def n_params(self):
        return 2 * self.n_items

    def families(self):
        fams = {
            "s": ((self.n_items,), _item_labels("s", self.n_items)),
            "g": ((self.n_items,), _item_labels("g", self.n_items)),
        }
        if self.priors.estimate_beta_scales:
            fams["beta_scales"] = ((4,), ["a_s", "b_s", "a_g", "b_g"])
        return fams

    def scale_families(self):
        return {"hyper": 4} if self.priors.estimate_beta_scales else {}

    def init(self, rng, overdispersion):
        pr = self.priors
        s_mean = pr.slip_a / (pr.slip_a + pr.slip_b)
        g_mean = pr.guess_a / (pr.guess_a + pr.guess_b)
        s_sd = np.sqrt(pr.slip_a * pr.slip_b / ((pr.slip_a + pr.slip_b) ** 2 * (pr.slip_a + pr.slip_b + 1)))
        g_sd = np.sqrt(pr.guess_a * pr.guess_b / ((pr.guess_a + pr.guess_b) ** 2 * (pr.guess_a + pr.guess_b + 1)))
        s = s_mean + overdispersion * s_sd * rng.uniform(-1, 1, self.n_items)
        g = g_mean + overdispersion * g_sd * rng.uniform(-1, 1, self.n_items)
        s = np.clip(s, 0.02, 0.9)
        g = np.clip(g, 0.02, np.minimum(0.9, 1.0 - s - 0.02))
        params = {"s": s, "g": g}
        if pr.estimate_beta_scales:
            params["beta_scales"] = np.array([pr.slip_a, pr.slip_b, pr.guess_a, pr.guess_b])
        return params

    def table(self, params):
        return dina_table(self.eta, params["s"], params["g"])

    def _effective_scales(self, params):
        if self.priors.estimate_beta_scales:
            return params["beta_scales"]
        pr = self.priors
        return np.array([pr.slip_a, pr.slip_b, pr.guess_a, pr.guess_b])

    def update(self, params, m, r, rng, scales, adapt):
        a_s, b_s, a_g, b_g = self._effective_scales(params)
        n1 = m @ self.eta
        r1 = (r * self.eta).sum(axis=0)
        r0 = r.sum(axis=0) - r1
        n0 = m.sum() - n1
        pr = self.priors.with_overrides(slip_a=a_s, slip_b=b_s, guess_a=a_g, guess_b=b_g)
        s, g = draw_slip_guess(rng, params["s"], params["g"], n1, r1, n0, r0, pr)
        out = dict(params, s=s, g=g)
        if self.priors.estimate_beta_scales:
            out["beta_scales"] = self._update_scales(out, rng, scales, adapt)
        return out

    def _update_scales(self, params, rng, scales, adapt):
        # Hyper targets use the plain Beta products; the truncation-region
        # normalizer is dropped (diffuse-scale approximation, opt-in feature).
        pr = self.priors
        vals = params["beta_scales"].copy()
        s, g = params["s"], params["g"]
        sc = scales.get("hyper")
        accepted = np.zeros(4)

        def target(which):
            def f(x):
                a_s, b_s, a_g, b_g = [x if j == which else vals[j] for j in range(4)]
                ll_s = np.sum(_beta_logpdf(s, a_s, b_s)) - len(s) * betaln(a_s, b_s)
                ll_g = np.sum(_beta_logpdf(g, a_g, b_g)) - len(g) * betaln(a_g, b_g)
                return ll_s + ll_g
            return f

        for j in range(4):
            vals[j], acc = random_walk_update(
                rng, vals[j], target(j), sc[j], lower=pr.hyper_lo, upper=pr.hyper_hi
            )
            accepted[j] = acc
        scales.update("hyper", accepted, adapt)
        return vals


class _MhItemKernel:
    """Shared scaffolding for the Metropolis-updated item-parameter families."""

    def update(self, params, m, r, rng, scales, adapt):
        params = {k: v.copy() for k, v in params.items()}
        accept_log = {fam: [] for fam in self.scale_families()}
        for i in range(self.n_items):
            self._update_item(i, params, m, r[:, i], rng, scales, accept_log)
        for fam, accepted in accept_log.items():
            if accepted:
                scales.update(fam, np.array(accepted, dtype=np.float64), adapt)
        return params

    def _mh_scalar(self, rng, value, logpost, scale, lower, upper, accept_log, fam):
        new, acc = random_walk_update(rng, value, logpost, scale, lower, upper)
        accept_log[fam].append(acc)
        return new


class RdinaKernel(_MhItemKernel):
    """Logit intercept and non-negative K-way effect per item."""

    item_families = ("lambda0", "lambdaK")

    def __init__(self, eta_table, priors, model_kind):
        self.eta = np.asarray(eta_table, dtype=np.float64)
        self.n_items = self.eta.shape[1]
        self.priors = priors
        self.kway_mean = priors.resolved_kway_mean(model_kind)

    @property
    def n_params(self):
        return 2 * self.n_items

    def families(self):
        return {
            "lambda0": ((self.n_items,), _item_labels("lambda0", self.n_items)),
            "lambdaK": ((self.n_items,), _item_labels("lambdaK", self.n_items)),
        }

    def scale_families(self):
        return {"intercept": self.n_items, "kway": self.n_items}

    def init(self, rng, overdispersion):
        pr = self.priors
        sd0 = pr.intercept_prec ** -0.5
        sdk = pr.kway_prec ** -0.5
        l0 = pr.intercept_mean + overdispersion * sd0 * rng.uniform(-1, 1, self.n_items)
        lk = self.kway_mean + overdispersion * sdk * rng.uniform(-1, 1, self.n_items)
        return {"lambda0": l0, "lambdaK": np.maximum(lk, 0.05)}

    def table(self, params):
        return logistic(params["lambda0"][None, :] + params["lambdaK"][None, :] * self.eta)

    def _update_item(self, i, params, m, r_i, rng, scales, accept_log):
        pr = self.priors
        eta_i = self.eta[:, i]

        def post0(x):
            p = logistic(x + params["lambdaK"][i] * eta_i)
            return _suff_loglik(p, m, r_i) + _norm_logpdf(x, pr.intercept_mean, pr.intercept_prec)

        params["lambda0"][i] = self._mh_scalar(
            rng, params["lambda0"][i], post0, scales.get("intercept")[i],
            -np.inf, np.inf, accept_log, "intercept")

        def postk(x):
            p = logistic(params["lambda0"][i] + x * eta_i)
            return _suff_loglik(p, m, r_i) + _norm_logpdf(x, self.kway_mean, pr.kway_prec)

        params["lambdaK"][i] = self._mh_scalar(
            rng, params["lambdaK"][i], postk, scales.get("kway")[i],
            0.0, np.inf, accept_log, "kway")


class LlmKernel(_MhItemKernel):
    """Intercept plus one non-negative main effect per required attribute."""

    item_families = ("lambda0", "lambda")

    def __init__(self, patterns, q_binary, priors, model_kind):
        self.patterns = np.asarray(patterns, dtype=np.float64)
        self.q = np.asarray(q_binary, dtype=np.int64)
        self.n_items = self.q.shape[0]
        self.priors = priors
        self.req = [np.flatnonzero(self.q[i]) for i in range(self.n_items)]
        self.packed_index = [
            (i, k) for i in range(self.n_items) for k in self.req[i]
        ]
        self.offsets = np.cumsum([0] + [len(rq) for rq in self.req])

    @property
    def n_params(self):
        return self.n_items + len(self.packed_index)

    def families(self):
        labels = [f"lambda[{i + 1},{k + 1}]" for i, k in self.packed_index]
        return {
            "lambda0": ((self.n_items,), _item_labels("lambda0", self.n_items)),
            "lambda": ((len(self.packed_index),), labels),
        }

    def scale_families(self):
        return {"intercept": self.n_items, "main": len(self.packed_index)}

    def init(self, rng, overdispersion):
        pr = self.priors
        sd0 = pr.intercept_prec ** -0.5
        sdm = pr.main_prec ** -0.5
        l0 = pr.intercept_mean + overdispersion * sd0 * rng.uniform(-1, 1, self.n_items)
        mains = pr.main_mean + overdispersion * sdm * rng.uniform(-1, 1, len(self.packed_index))
        return {"lambda0": l0, "lambda": np.maximum(mains, 0.05)}

    def _item_main(self, params, i):
        return params["lambda"][self.offsets[i]:self.offsets[i + 1]]

    def table(self, params):
        lin = np.tile(params["lambda0"][None, :], (self.patterns.shape[0], 1))
        for i in range(self.n_items):
            cols = self.req[i]
            if cols.size:
                lin[:, i] += self.patterns[:, cols] @ self._item_main(params, i)
        return logistic(lin)

    def _update_item(self, i, params, m, r_i, rng, scales, accept_log):
        pr = self.priors
        design = self.patterns[:, self.req[i]]

        def post0(x):
            p = logistic(x + design @ self._item_main(params, i))
            return _suff_loglik(p, m, r_i) + _norm_logpdf(x, pr.intercept_mean, pr.intercept_prec)

        params["lambda0"][i] = self._mh_scalar(
            rng, params["lambda0"][i], post0, scales.get("intercept")[i],
            -np.inf, np.inf, accept_log, "intercept")

        main = self._item_main(params, i)
        for j in range(main.shape[0]):
            packed_j = self.offsets[i] + j

            def postm(x, j=j):
                vec = main.copy()
                vec[j] = x
                p = logistic(params["lambda0"][i] + design @ vec)
                return _suff_loglik(p, m, r_i) + _norm_logpdf(x, pr.main_mean, pr.main_prec)

            main[j] = self._mh_scalar(
                rng, main[j], postm, scales.get("main")[packed_j],
                0.0, np.inf, accept_log, "main")


class RrumKernel(_MhItemKernel):
    """Baseline probability plus one penalty factor per required attribute."""

    item_families = ("pi_star", "r_star")

    def __init__(self, patterns, q_binary, priors, model_kind):
        self.patterns = np.asarray(patterns, dtype=np.float64)
        self.q = np.asarray(q_binary, dtype=np.int64)
        self.n_items = self.q.shape[0]
        self.priors = priors
        self.req = [np.flatnonzero(self.q[i]) for i in range(self.n_items)]
        self.packed_index = [(i, k) for i in range(self.n_items) for k in self.req[i]]
        self.offsets = np.cumsum([0] + [len(rq) for rq in self.req])
        # miss[c, j] = 1 when pattern c lacks the attribute behind packed j's column
        self.miss = [(1.0 - self.patterns[:, self.req[i]]) for i in range(self.n_items)]

    @property
    def n_params(self):
        return self.n_items + len(self.packed_index)

    def families(self):
        labels = [f"r_star[{i + 1},{k + 1}]" for i, k in self.packed_index]
        return {
            "pi_star": ((self.n_items,), _item_labels("pi_star", self.n_items)),
            "r_star": ((len(self.packed_index),), labels),
        }

    def scale_families(self):
        return {"baseline": self.n_items, "penalty": len(self.packed_index)}

    def init(self, rng, overdispersion):
        pr = self.priors
        b_mean = pr.baseline_a / (pr.baseline_a + pr.baseline_b)
        p_mean = pr.penalty_a / (pr.penalty_a + pr.penalty_b)
        b_sd = np.sqrt(b_mean * (1 - b_mean) / (pr.baseline_a + pr.baseline_b + 1))
        p_sd = np.sqrt(p_mean * (1 - p_mean) / (pr.penalty_a + pr.penalty_b + 1))
        base = np.clip(
            b_mean + overdispersion * b_sd * rng.uniform(-1, 1, self.n_items), 0.05, 0.95)
        pen = np.clip(
            p_mean + overdispersion * p_sd * rng.uniform(-1, 1, len(self.packed_index)), 0.05, 0.95)
        return {"pi_star": base, "r_star": pen}

    def _item_pen(self, params, i):
        return params["r_star"][self.offsets[i]:self.offsets[i + 1]]

    def table(self, params):
        table = np.tile(params["pi_star"][None, :], (self.patterns.shape[0], 1))
        for i in range(self.n_items):
            pen = self._item_pen(params, i)
            if pen.size:
                table[:, i] *= np.exp(self.miss[i] @ np.log(pen))
        return table

    def _update_item(self, i, params, m, r_i, rng, scales, accept_log):
        pr = self.priors
        miss = self.miss[i]

        def post_base(x):
            p = x * np.exp(miss @ np.log(self._item_pen(params, i))) if miss.shape[1] else np.full(m.shape, x)
            return _suff_loglik(p, m, r_i) + _beta_logpdf(x, pr.baseline_a, pr.baseline_b)

        params["pi_star"][i] = self._mh_scalar(
            rng, params["pi_star"][i], post_base, scales.get("baseline")[i],
            0.0, 1.0, accept_log, "baseline")

        pen = self._item_pen(params, i)
        for j in range(pen.shape[0]):
            packed_j = self.offsets[i] + j

            def post_pen(x, j=j):
                vec = pen.copy()
                vec[j] = x
                p = params["pi_star"][i] * np.exp(miss @ np.log(vec))
                return _suff_loglik(p, m, r_i) + _beta_logpdf(x, pr.penalty_a, pr.penalty_b)

            pen[j] = self._mh_scalar(
                rng, pen[j], post_pen, scales.get("penalty")[packed_j],
                0.0, 1.0, accept_log, "penalty")


class LcdmKernel(_MhItemKernel):
    """Intercept plus subset-indexed effects; mains non-negative."""

    item_families = ("lambda0", "effects")

    def __init__(self, patterns, q_binary, priors, model_kind):
        from ..models import lcdm_effect_subsets

        self.patterns = np.asarray(patterns, dtype=np.int64)
        self.q = np.asarray(q_binary, dtype=np.int64)
        self.n_items = self.q.shape[0]
        self.priors = priors
        self.subsets = [lcdm_effect_subsets(self.q[i]) for i in range(self.n_items)]
        self.offsets = np.cumsum([0] + [len(s) for s in self.subsets])
        self.packed = [
            (i, subset) for i in range(self.n_items) for subset in self.subsets[i]
        ]
        # design[j]: (C,) indicator that a pattern activates packed effect j
        self.design = [
            np.all(self.patterns[:, list(subset)] == 1, axis=1).astype(np.float64)
            for _, subset in self.packed
        ]

    @property
    def n_params(self):
        return self.n_items + len(self.packed)

    def families(self):
        labels = [
            "lambda" + "".join(str(k + 1) for k in subset) + f"[{i + 1}]"
            for i, subset in self.packed
        ]
        return {
            "lambda0": ((self.n_items,), _item_labels("lambda0", self.n_items)),
            "effects": ((len(self.packed),), labels),
        }

    def scale_families(self):
        return {"intercept": self.n_items, "main": len(self.packed)}

    def init(self, rng, overdispersion):
        pr = self.priors
        sd0 = pr.intercept_prec ** -0.5
        sdm = pr.main_prec ** -0.5
        l0 = pr.intercept_mean + overdispersion * sd0 * rng.uniform(-1, 1, self.n_items)
        eff = np.empty(len(self.packed))
        for j, (_, subset) in enumerate(self.packed):
            jit = overdispersion * sdm * rng.uniform(-1, 1)
            eff[j] = max(0.05, pr.main_mean + jit) if len(subset) == 1 else pr.interaction_mean + jit
        return {"lambda0": l0, "effects": eff}

    def _item_slice(self, i):
        return slice(self.offsets[i], self.offsets[i + 1])

    def _item_lin(self, params, i):
        lin = np.full(self.patterns.shape[0], params["lambda0"][i])
        for j in range(self.offsets[i], self.offsets[i + 1]):
            lin += params["effects"][j] * self.design[j]
        return lin

    def table(self, params):
        lin = np.tile(params["lambda0"][None, :], (self.patterns.shape[0], 1))
        for j, (i, _) in enumerate(self.packed):
            lin[:, i] += params["effects"][j] * self.design[j]
        return logistic(lin)

    def _update_item(self, i, params, m, r_i, rng, scales, accept_log):
        pr = self.priors
        lin = self._item_lin(params, i)

        def post0(x):
            p = logistic(lin - params["lambda0"][i] + x)
            return _suff_loglik(p, m, r_i) + _norm_logpdf(x, pr.intercept_mean, pr.intercept_prec)

        new0 = self._mh_scalar(
            rng, params["lambda0"][i], post0, scales.get("intercept")[i],
            -np.inf, np.inf, accept_log, "intercept")
        lin += new0 - params["lambda0"][i]
        params["lambda0"][i] = new0

        for j in range(self.offsets[i], self.offsets[i + 1]):
            subset = self.packed[j][1]
            is_main = len(subset) == 1
            mean = pr.main_mean if is_main else pr.interaction_mean
            prec = pr.main_prec if is_main else pr.interaction_prec
            lower = 0.0 if is_main else -np.inf

            def post_eff(x, j=j):
                p = logistic(lin + (x - params["effects"][j]) * self.design[j])
                return _suff_loglik(p, m, r_i) + _norm_logpdf(x, mean, prec)

            new = self._mh_scalar(
                rng, params["effects"][j], post_eff, scales.get("main")[j],
                lower, np.inf, accept_log, "main")
            lin += (new - params["effects"][j]) * self.design[j]
            params["effects"][j] = new


def make_item_kernel(kind, patterns, q, priors):
    """Item kernel for one pattern-mixture model kind."""
    from ..core import conjunctive_table, disjunctive_table, polytomous_table

    pat = np.asarray(patterns, dtype=np.int64)
    if kind == "dina":
        return SlipGuessKernel(conjunctive_table(pat, q.entries), priors, kind)
    if kind == "dino":
        return SlipGuessKernel(disjunctive_table(pat, q.entries), priors, kind)
    if kind == "rpa-dina":
        return SlipGuessKernel(polytomous_table(pat, q.entries), priors, kind)
    if kind in ("rdina", "testlet-dina"):
        return RdinaKernel(conjunctive_table(pat, q.entries), priors, kind)
    if kind == "llm":
        return LlmKernel(pat, q.binary_view, priors, kind)
    if kind == "rrum":
        return RrumKernel(pat, q.binary_view, priors, kind)
    if kind == "lcdm":
        return LcdmKernel(pat, q.binary_view, priors, kind)
    raise ValueError(f"no item kernel for model kind {kind!r}")
