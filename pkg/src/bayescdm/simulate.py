"""Forward data generation for every supported model/structure combination.

The simulator is the oracle behind the recovery checks: attributes come
from the declared latent structure, then responses are cellwise Bernoulli
under the declared measurement kernel.  Everything is deterministic given
the design seed.
"""

from dataclasses import dataclass

import numpy as np

from .core import QMatrix, ResponseMatrix, conjunctive_eta, enumerate_patterns
from .latent import HigherOrderLatent, LongitudinalLatent, UnstructuredLatent
from .models import class_probability_table, logistic
from .sampler.longitudinal import longitudinal_layout

__all__ = ["SimDesign", "simulate_responses"]

_CLASS_KINDS = ("dina", "rdina", "dino", "llm", "rrum", "lcdm", "rpa-dina")


@dataclass(frozen=True)
class SimDesign:
    """True generating configuration for one synthetic dataset.

    `structure` is an UnstructuredLatent (class kinds and the testlet
    model), a HigherOrderLatent, or a LongitudinalLatent; the longitudinal
    model additionally needs `attr_structure` (slope/intercept shared over
    occasions) and the occasion layout.
    """

    kind: str
    q: QMatrix
    n_persons: int
    seed: int
    item_params: object
    structure: object
    attr_structure: HigherOrderLatent = None
    testlet_sigma2: np.ndarray = None
    testlet_ids: np.ndarray = None
    n_testlets: int = None
    items_per_occasion: tuple = None
    n_anchor_items: int = None

    def __post_init__(self):
        if self.n_persons < 1:
            raise ValueError("need at least one person")


def _draw_classes(rng, mixing, n):
    return rng.choice(mixing.shape[0], size=n, p=mixing)


def _bernoulli(rng, p):
    return (rng.random(p.shape) < p).astype(np.int64)


def simulate_responses(design: SimDesign):
    """Generate (responses, attribute matrix, extras) for one design."""
    rng = np.random.default_rng(design.seed)
    kind = design.kind
    if kind in _CLASS_KINDS:
        return _simulate_class_kind(design, rng)
    if kind == "testlet-dina":
        return _simulate_testlet(design, rng)
    if kind == "ho-dina":
        return _simulate_higher_order(design, rng)
    if kind == "long-dina":
        return _simulate_longitudinal(design, rng)
    raise ValueError(f"unknown model kind {kind!r}")


def _simulate_class_kind(design, rng):
    structure: UnstructuredLatent = design.structure
    space = enumerate_patterns(design.q)
    if structure.n_patterns != space.n_patterns:
        raise ValueError("mixing vector length disagrees with the pattern space")
    classes = _draw_classes(rng, structure.mixing, design.n_persons)
    alpha = space.patterns[classes]
    table = class_probability_table(design.kind, design.item_params, space.patterns, design.q)
    p = table[classes]
    y = _bernoulli(rng, p)
    return ResponseMatrix(y), alpha, {"classes": classes, "prob": p}


def _simulate_testlet(design, rng):
    structure: UnstructuredLatent = design.structure
    space = enumerate_patterns(design.q)
    classes = _draw_classes(rng, structure.mixing, design.n_persons)
    alpha = space.patterns[classes]
    m = int(design.n_testlets)
    sigma2 = np.asarray(design.testlet_sigma2, dtype=np.float64)
    if sigma2.shape != (m,):
        raise ValueError("need one testlet variance per testlet")
    gamma = np.zeros((design.n_persons, m + 1))
    gamma[:, :m] = rng.standard_normal((design.n_persons, m)) * np.sqrt(sigma2)[None, :]
    d = np.asarray(design.testlet_ids, dtype=np.int64)
    eta = conjunctive_eta(alpha, design.q.entries)
    params = design.item_params
    lin = params.intercept[None, :] + params.kway[None, :] * eta + gamma[:, d]
    p = logistic(lin)
    y = _bernoulli(rng, p)
    return ResponseMatrix(y), alpha, {"classes": classes, "gamma": gamma, "prob": p}


def _simulate_higher_order(design, rng):
    structure: HigherOrderLatent = design.structure
    theta = rng.standard_normal(design.n_persons)
    mastery = logistic(np.outer(theta, structure.slope) - structure.intercept[None, :])
    alpha = _bernoulli(rng, mastery)
    eta = conjunctive_eta(alpha, design.q.entries)
    params = design.item_params
    p = params.guess[None, :] + (1.0 - params.slip - params.guess)[None, :] * eta
    y = _bernoulli(rng, p)
    return ResponseMatrix(y), alpha, {"theta": theta, "prob": p}


def _simulate_longitudinal(design, rng):
    structure: LongitudinalLatent = design.structure
    attr: HigherOrderLatent = design.attr_structure
    occ, d, tie, _ = longitudinal_layout(design.items_per_occasion, design.n_anchor_items)
    if occ.shape[0] != design.q.n_items:
        raise ValueError("occasion layout disagrees with the stacked Q-matrix")
    n, t = design.n_persons, structure.n_occasions
    k = design.q.n_attributes
    # theta = mu + chol @ z, one draw per person (single Cholesky convention)
    z = rng.standard_normal((n, t))
    theta = structure.mean[None, :] + z @ structure.cholesky.T
    alpha = np.empty((n, k, t), dtype=np.int64)
    for tt in range(t):
        mastery = logistic(np.outer(theta[:, tt], attr.slope) - attr.intercept[None, :])
        alpha[:, :, tt] = _bernoulli(rng, mastery)
    m = int(design.n_anchor_items)
    sigma2 = np.asarray(design.testlet_sigma2, dtype=np.float64)
    gamma = np.zeros((n, m + 1))
    if m:
        gamma[:, :m] = rng.standard_normal((n, m)) * np.sqrt(sigma2)[None, :]
    params = design.item_params  # dict with per-slot intercept/kway (ties applied)
    intercept = np.asarray(params["intercept"], dtype=np.float64)
    kway = np.asarray(params["kway"], dtype=np.float64)
    eta = np.empty((n, design.q.n_items))
    for tt in range(t):
        slots = np.flatnonzero(occ == tt)
        eta[:, slots] = conjunctive_eta(alpha[:, :, tt], design.q.entries[slots])
    p = logistic(intercept[None, :] + kway[None, :] * eta + gamma[:, d])
    y = _bernoulli(rng, p)
    return ResponseMatrix(y), alpha, {"theta": theta, "gamma": gamma, "prob": p}
