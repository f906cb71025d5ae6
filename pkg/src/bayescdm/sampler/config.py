"""Run configuration for the MCMC engine."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["McmcConfig", "DEFAULT_PROPOSAL_SD"]

# initial random-walk scales per parameter family; adapted during burn-in
DEFAULT_PROPOSAL_SD = {
    "intercept": 0.3,
    "kway": 0.3,
    "main": 0.3,
    "interaction": 0.3,
    "baseline": 0.08,
    "penalty": 0.12,
    "theta": 0.8,
    "gamma": 0.6,
    "xi": 0.4,
    "attr_intercept": 0.4,
    "mu": 0.2,
    "chol_diag": 0.15,
    "chol_offdiag": 0.15,
    "hyper": 0.3,
}


@dataclass(frozen=True)
class McmcConfig:
    """Chain layout, seeding, and proposal/adaptation settings.

    `n_burnin` defaults to half of `n_iter`; `adapt_iters` (the window in
    which proposal scales are tuned, after which they freeze) defaults to
    the burn-in length.  `chain_seeds` overrides the per-chain streams that
    are otherwise spawned deterministically from `seed`.
    """

    n_chains: int = 2
    n_iter: int = 10000
    n_burnin: int = None
    thin: int = 1
    seed: int = 0
    chain_seeds: tuple = None
    proposal_sd: dict = field(default_factory=dict)
    adapt_iters: int = None
    target_accept: float = 0.35
    overdispersion: float = 2.0

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("need at least one chain")
        if self.n_iter < 2:
            raise ValueError("n_iter must be at least 2")
        burn = self.n_burnin if self.n_burnin is not None else self.n_iter // 2
        if not 0 <= burn < self.n_iter:
            raise ValueError("need 0 <= n_burnin < n_iter")
        object.__setattr__(self, "n_burnin", burn)
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.adapt_iters is None:
            object.__setattr__(self, "adapt_iters", burn)
        if self.chain_seeds is not None:
            seeds = tuple(int(s) for s in self.chain_seeds)
            if len(seeds) != self.n_chains:
                raise ValueError("chain_seeds must list one seed per chain")
            object.__setattr__(self, "chain_seeds", seeds)

    @property
    def n_kept(self):
        return (self.n_iter - self.n_burnin + self.thin - 1) // self.thin

    def scale_for(self, family):
        return float(self.proposal_sd.get(family, DEFAULT_PROPOSAL_SD[family]))

    def chain_rngs(self):
        """One independent Generator per chain, deterministic in the seed."""
        if self.chain_seeds is not None:
            return [np.random.default_rng(s) for s in self.chain_seeds]
        ss = np.random.SeedSequence(self.seed)
        return [np.random.default_rng(child) for child in ss.spawn(self.n_chains)]
