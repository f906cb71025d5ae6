"""Multi-chain driver: runs sweeps, records kept draws, extends on demand.

Chains are fully independent: each owns a Generator spawned from the base
seed, so a run is deterministic given (seed, config, data) and chains could
execute concurrently without shared state.  Deviance and the realized and
replicated discrepancies are recorded at every kept iteration.
"""

import time

import numpy as np

from .. import kernels
from .config import McmcConfig
from .trace import TraceStore

__all__ = ["run_chains", "extend_chains", "McmcResult", "SamplerError"]


class SamplerError(RuntimeError):
    """A chain failed; carries the chain index."""

    def __init__(self, chain, cause):
        super().__init__(f"chain {chain} failed: {cause}")
        self.chain = chain
        self.cause = cause


class McmcResult:
    """Trace store plus the final chain states needed to continue sampling."""

    def __init__(self, model, config, store, states, runtime_seconds):
        self.model = model
        self.config = config
        self.store = store
        self.states = states
        self.runtime_seconds = runtime_seconds


def _allocate(model, config, n_kept):
    traces = {}
    labels = {}
    for name, (shape, labs) in model.families().items():
        dtype = np.int32 if name == "c" else np.float64
        traces[name] = np.empty((config.n_chains, n_kept) + tuple(shape), dtype=dtype)
        labels[name] = labs
    return traces, labels


def _advance(model, state, chain, n_iter, keep_from, thin, adapt_until,
             traces, dev, d_real, d_rep, progress=None, progress_every=None):
    yu8 = model.yu8
    kept = 0
    for it in range(n_iter):
        try:
            model.sweep(state, it < adapt_until)
        except Exception as exc:  # surface per-chain failures with the chain id
            raise SamplerError(chain, exc) from exc
        if it >= keep_from and (it - keep_from) % thin == 0:
            snap = model.snapshot(state)
            for name, value in snap.items():
                traces[name][chain, kept] = value
            # keep probabilities inside the open interval: one transiently
            # saturated logistic cell must not poison deviance or the PPMC
            p = np.clip(model.person_prob_matrix(state), 1e-12, 1.0 - 1e-12)
            dev[chain, kept] = -2.0 * kernels.bernoulli_loglik(yu8, p)
            u = state.rng.random(p.shape)
            d_real[chain, kept], d_rep[chain, kept] = kernels.pearson_pair(yu8, p, u)
            kept += 1
        if progress is not None and progress_every and (it + 1) % progress_every == 0:
            progress(chain, it + 1, n_iter, model.acceptance_rates(state))
    return kept


def run_chains(model, config: McmcConfig, progress=None):
    """Run all chains from overdispersed starts; deterministic in the seed."""
    t0 = time.perf_counter()
    n_kept = config.n_kept
    traces, labels = _allocate(model, config, n_kept)
    dev = np.empty((config.n_chains, n_kept))
    d_real = np.empty_like(dev)
    d_rep = np.empty_like(dev)
    states = []
    progress_every = max(1, config.n_iter // 20) if progress else None
    for chain, rng in enumerate(config.chain_rngs()):
        state = model.init_state(rng, chain)
        _advance(model, state, chain, config.n_iter, config.n_burnin, config.thin,
                 config.adapt_iters, traces, dev, d_real, d_rep,
                 progress, progress_every)
        states.append(state)
    acceptance = {f"chain{j}": model.acceptance_rates(s) for j, s in enumerate(states)}
    store = TraceStore(traces, labels, dev, d_real, d_rep, acceptance)
    return McmcResult(model, config, store, states, time.perf_counter() - t0)


def extend_chains(result: McmcResult, extra_iters, progress=None):
    """Continue every chain in place and append the new kept draws.

    No burn-in is discarded and proposal scales stay frozen (adaptation is
    over), so the appended draws come from the same transition kernel.
    """
    model, config = result.model, result.config
    thin = config.thin
    n_kept = (extra_iters + thin - 1) // thin
    traces, labels = _allocate(model, config, n_kept)
    dev = np.empty((config.n_chains, n_kept))
    d_real = np.empty_like(dev)
    d_rep = np.empty_like(dev)
    progress_every = max(1, extra_iters // 10) if progress else None
    for chain, state in enumerate(result.states):
        _advance(model, state, chain, extra_iters, 0, thin, 0,
                 traces, dev, d_real, d_rep, progress, progress_every)
    acceptance = {f"chain{j}": model.acceptance_rates(s) for j, s in enumerate(result.states)}
    appended = TraceStore(traces, labels, dev, d_real, d_rep, acceptance)
    result.store = result.store.extended_with(appended)
    return result
