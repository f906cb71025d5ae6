"""Response-probability kernels and log-likelihood for every measurement model.

Scalar operations mirror the model definitions one-to-one and are the
reference implementations; the ``*_table`` builders vectorize the same
formulas over a pattern space for the sampler and are tested against the
scalar forms.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .core import (
    QMatrix,
    ResponseMatrix,
    conjunctive_eta,
    ideal_conjunctive,
    ideal_disjunctive,
    ideal_polytomous,
)

__all__ = [
    "DinaParams",
    "RdinaParams",
    "LlmParams",
    "RrumParams",
    "LcdmParams",
    "TestletParams",
    "logistic",
    "prob_dina",
    "prob_rdina",
    "rdina_to_sg",
    "prob_llm",
    "prob_rrum",
    "prob_lcdm",
    "prob_rpa_dina",
    "prob_testlet_rdina",
    "log_likelihood",
    "dina_table",
    "rdina_table",
    "llm_table",
    "rrum_table",
    "lcdm_table",
    "lcdm_effect_subsets",
]


def logistic(x):
    """Numerically stable logistic; branch form avoids exp overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def _as_float_vec(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    return arr


@dataclass(frozen=True)
class DinaParams:
    """Per-item slipping and guessing probabilities, g < 1 - s enforced."""

    slip: np.ndarray
    guess: np.ndarray

    def __post_init__(self):
        s = _as_float_vec(self.slip, "slip")
        g = _as_float_vec(self.guess, "guess")
        if s.shape != g.shape:
            raise ValueError("slip and guess must have equal length")
        if (g < 0).any() or (s < 0).any() or (s > 1).any():
            raise ValueError("slip/guess must lie in [0, 1]")
        if (g >= 1.0 - s).any():
            raise ValueError("monotonicity violated: need guess < 1 - slip")
        object.__setattr__(self, "slip", s)
        object.__setattr__(self, "guess", g)


@dataclass(frozen=True)
class RdinaParams:
    """Logit-scale intercept and non-negative K-way effect per item."""

    intercept: np.ndarray
    kway: np.ndarray

    def __post_init__(self):
        l0 = _as_float_vec(self.intercept, "intercept")
        lk = _as_float_vec(self.kway, "kway")
        if l0.shape != lk.shape:
            raise ValueError("intercept and kway must have equal length")
        if (lk < 0).any():
            raise ValueError("kway effects must be non-negative")
        object.__setattr__(self, "intercept", l0)
        object.__setattr__(self, "kway", lk)


@dataclass(frozen=True)
class LlmParams:
    """Intercept plus non-negative main effects, one row of mains per item.

    Main-effect entries for attributes an item does not require are inert;
    the kernels mask them with the Q-row.
    """

    intercept: np.ndarray
    main: np.ndarray

    def __post_init__(self):
        l0 = _as_float_vec(self.intercept, "intercept")
        main = np.asarray(self.main, dtype=np.float64)
        if main.ndim != 2 or main.shape[0] != l0.shape[0]:
            raise ValueError("main must be (n_items, n_attributes)")
        if (main < 0).any():
            raise ValueError("main effects must be non-negative")
        object.__setattr__(self, "intercept", l0)
        object.__setattr__(self, "main", main)


@dataclass(frozen=True)
class RrumParams:
    """Baseline success probability and per-attribute penalty factors.

    Penalties for attributes an item does not require are stored but inert.
    """

    baseline: np.ndarray
    penalty: np.ndarray

    def __post_init__(self):
        base = _as_float_vec(self.baseline, "baseline")
        pen = np.asarray(self.penalty, dtype=np.float64)
        if pen.ndim != 2 or pen.shape[0] != base.shape[0]:
            raise ValueError("penalty must be (n_items, n_attributes)")
        if (base < 0).any() or (base > 1).any():
            raise ValueError("baseline must lie in [0, 1]")
        if (pen < 0).any() or (pen > 1).any():
            raise ValueError("penalties must lie in [0, 1]")
        object.__setattr__(self, "baseline", base)
        object.__setattr__(self, "penalty", pen)


def lcdm_effect_subsets(q_row):
    """Canonical effect order for one item: all non-empty subsets [...]

    of the attributes the item requires, ordered by subset size then
    lexicographically (singletons, pairs, ..., full interaction).
    """
    required = tuple(int(k) for k in np.flatnonzero(np.asarray(q_row) > 0))
    subsets = []
    for size in range(1, len(required) + 1):
        subsets.extend(_combinations(required, size))
    return subsets


def _combinations(items, size):
    from itertools import combinations

    return [tuple(c) for c in combinations(items, size)]


@dataclass(frozen=True)
class LcdmParams:
    """Intercept plus subset-indexed effects per item.

    `effects[i]` maps attribute subsets (tuples of 0-based attribute
    indices) to effect values.  Main effects (singleton subsets) must be
    non-negative; interactions are unconstrained.
    """

    intercept: np.ndarray
    effects: tuple

    def __post_init__(self):
        l0 = _as_float_vec(self.intercept, "intercept")
        if len(self.effects) != l0.shape[0]:
            raise ValueError("need one effect map per item")
        canon = []
        for i, eff in enumerate(self.effects):
            item_eff = {}
            for subset, value in eff.items():
                key = tuple(sorted(int(k) for k in subset))
                if len(key) == 0:
                    raise ValueError("effect subsets must be non-empty")
                if len(key) == 1 and value < 0:
                    raise ValueError(f"main effect for item {i} must be non-negative")
                item_eff[key] = float(value)
            canon.append(item_eff)
        object.__setattr__(self, "intercept", l0)
        object.__setattr__(self, "effects", tuple(canon))


@dataclass(frozen=True)
class TestletParams:
    """Logit-scale item parameters plus person-by-testlet random effects.

    `testlet_ids[i]` gives the 0-based testlet of item i, or the value M
    (one past the last testlet) for standalone items, whose effect is 0.
    """

    __test__ = False  # "Test" prefix is domain vocabulary, not a pytest class

    rdina: RdinaParams
    gamma: np.ndarray
    sigma2_gamma: np.ndarray
    testlet_ids: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64)
        sigma2 = _as_float_vec(self.sigma2_gamma, "sigma2_gamma")
        ids = np.asarray(self.testlet_ids, dtype=np.int64)
        m = sigma2.shape[0]
        if gamma.ndim != 2 or gamma.shape[1] != m + 1:
            raise ValueError("gamma must be (n_persons, n_testlets + 1)")
        if (gamma[:, m] != 0).any():
            raise ValueError("the standalone slot of gamma must be zero")
        if (sigma2 <= 0).any():
            raise ValueError("testlet variances must be positive")
        if ids.ndim != 1 or (ids < 0).any() or (ids > m).any():
            raise ValueError("testlet ids must index a testlet or the standalone slot")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "sigma2_gamma", sigma2)
        object.__setattr__(self, "testlet_ids", ids)

    @property
    def n_testlets(self):
        return self.sigma2_gamma.shape[0]


def prob_dina(eta, p: DinaParams, item):
    """g + (1 - s - g) * eta; identical to the power form for eta in {0,1}."""
    if eta not in (0, 1):
        raise ValueError("eta must be 0 or 1")
    g = p.guess[item]
    s = p.slip[item]
    return float(g + (1.0 - s - g) * eta)


def prob_rdina(eta, p: RdinaParams, item):
    """logistic(intercept + kway * eta)."""
    if eta not in (0, 1):
        raise ValueError("eta must be 0 or 1")
    return float(logistic(p.intercept[item] + p.kway[item] * eta))


def rdina_to_sg(p: RdinaParams, item):
    """Map logit-scale parameters to the (guess, slip) pair they imply."""
    g = float(logistic(p.intercept[item]))
    s = 1.0 - float(logistic(p.intercept[item] + p.kway[item]))
    return g, s


def prob_llm(alpha, q_row, p: LlmParams, item):
    """logistic(intercept + sum of mastered-and-required main effects)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    q = np.asarray(q_row, dtype=np.float64)
    lin = p.intercept[item] + float(np.sum(p.main[item] * alpha * q))
    return float(logistic(lin))


def prob_rrum(alpha, q_row, p: RrumParams, item):
    """baseline times the penalty product over required-but-unmastered attributes."""
    alpha = np.asarray(alpha, dtype=np.int64)
    q = np.asarray(q_row, dtype=np.int64)
    miss = (1 - alpha) * q
    prod = 1.0
    for k in np.flatnonzero(miss):
        prod *= p.penalty[item, k]
    return float(p.baseline[item] * prod)


def prob_lcdm(alpha, q_row, p: LcdmParams, item):
    """logistic(intercept + sum over stored effect subsets of effect * prod alpha)."""
    alpha = np.asarray(alpha, dtype=np.int64)
    lin = p.intercept[item]
    for subset, value in p.effects[item].items():
        if all(alpha[k] == 1 for k in subset):
            lin += value
    return float(logistic(lin))


def prob_rpa_dina(alpha, q_row, p: DinaParams, item):
    """DINA success probability driven by the ordered-category ideal response."""
    eta = ideal_polytomous(alpha, q_row)
    return prob_dina(eta, p, item)


def prob_testlet_rdina(eta, p: TestletParams, person, item):
    """logistic(intercept + kway * eta + person's effect for the item's testlet)."""
    if eta not in (0, 1):
        raise ValueError("eta must be 0 or 1")
    d = int(p.testlet_ids[item])
    lin = p.rdina.intercept[item] + p.rdina.kway[item] * eta + p.gamma[person, d]
    return float(logistic(lin))


# ---------------------------------------------------------------------------
# vectorized probability tables over a pattern space (rows = patterns)

def dina_table(eta_table, slip, guess):
    """(C, I) success probabilities from an ideal-response table."""
    return guess[None, :] + (1.0 - slip - guess)[None, :] * eta_table


def rdina_table(eta_table, intercept, kway):
    return logistic(intercept[None, :] + kway[None, :] * eta_table)


def llm_table(patterns, q_entries, intercept, main):
    """(C, I) LLM probabilities; mains masked by the Q-matrix."""
    pat = np.asarray(patterns, dtype=np.float64)
    q = np.asarray(q_entries, dtype=np.float64)
    lin = intercept[None, :] + pat @ (main * q).T
    return logistic(lin)


def rrum_table(patterns, q_entries, baseline, penalty):
    """(C, I) baseline-and-penalty probabilities; penalties masked by Q."""
    pat = np.asarray(patterns, dtype=np.float64)
    q = np.asarray(q_entries, dtype=np.float64)
    miss = (1.0 - pat)[:, None, :] * q[None, :, :]
    with np.errstate(divide="ignore"):
        logpen = np.where(q > 0, np.log(np.where(penalty > 0, penalty, 1.0)), 0.0)
        hard_zero = (penalty == 0) & (q > 0)
    table = baseline[None, :] * np.exp(np.einsum("cik,ik->ci", miss, logpen))
    if hard_zero.any():
        zero_mask = np.einsum("cik,ik->ci", miss, hard_zero.astype(np.float64)) > 0
        table = np.where(zero_mask, 0.0, table)
    return table


def lcdm_table(patterns, q_entries, params: LcdmParams):
    """(C, I) probabilities from subset-indexed effects."""
    pat = np.asarray(patterns, dtype=np.int64)
    n_items = params.intercept.shape[0]
    lin = np.tile(params.intercept[None, :], (pat.shape[0], 1)).astype(np.float64)
    for i in range(n_items):
        for subset, value in params.effects[i].items():
            active = np.all(pat[:, list(subset)] == 1, axis=1)
            lin[:, i] += value * active
    return logistic(lin)


_CLASS_TABLE_KINDS = {"dina", "rdina", "dino", "llm", "rrum", "lcdm", "rpa-dina"}


def class_probability_table(kind, params, patterns, q: QMatrix):
    """(C, I) success-probability table for any pattern-mixture model kind."""
    from .core import conjunctive_table, disjunctive_table, polytomous_table

    pat = np.asarray(patterns, dtype=np.int64)
    if kind == "dina":
        return dina_table(conjunctive_table(pat, q.entries), params.slip, params.guess)
    if kind == "dino":
        return dina_table(disjunctive_table(pat, q.entries), params.slip, params.guess)
    if kind == "rpa-dina":
        return dina_table(polytomous_table(pat, q.entries), params.slip, params.guess)
    if kind == "rdina":
        return rdina_table(conjunctive_table(pat, q.entries), params.intercept, params.kway)
    if kind == "llm":
        return llm_table(pat, q.binary_view, params.intercept, params.main)
    if kind == "rrum":
        return rrum_table(pat, q.binary_view, params.baseline, params.penalty)
    if kind == "lcdm":
        return lcdm_table(pat, q.binary_view, params)
    raise ValueError(f"unknown class-table model kind: {kind}")


def _person_prob_matrix(kind, params, alpha, q: QMatrix):
    alpha = np.asarray(alpha, dtype=np.int64)
    if kind in _CLASS_TABLE_KINDS:
        return class_probability_table(kind, params, alpha, q)
    if kind == "testlet-rdina":
        eta = conjunctive_eta(alpha, q.entries)
        offsets = params.gamma[:, params.testlet_ids]
        lin = params.rdina.intercept[None, :] + params.rdina.kway[None, :] * eta + offsets
        return logistic(lin)
    raise ValueError(f"unknown model kind: {kind}")


def log_likelihood(kind, params, alpha, y: ResponseMatrix, q: QMatrix):
    """Total Bernoulli log-likelihood of the responses at one latent assignment.

    `alpha` holds one attribute pattern per person.  Cells with probability 0
    and a success (or 1 and a failure) contribute -inf, never NaN.
    """
    p = _person_prob_matrix(kind, params, alpha, q)
    yf = y.entries.astype(np.float64)
    if p.shape != yf.shape:
        raise ValueError("probability matrix and responses disagree in shape")
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = xlogy(yf, p) + xlogy(1.0 - yf, 1.0 - p)
    return float(ll.sum())
