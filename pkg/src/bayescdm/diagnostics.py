"""Convergence assessment and posterior summarization.

R-hat is the corrected potential scale reduction factor (between/within
chain variances with the sampling-variability degrees-of-freedom
adjustment).  Effective draws use the multi-chain autocorrelation estimate,
truncated at the first non-positive paired autocorrelation sum; exact
agreement with any particular package's column is not a goal.  Quantiles
use linear interpolation between order statistics (numpy's default).
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "rhat",
    "effective_draws",
    "ParamSummary",
    "summarize",
    "format_summary_table",
    "modal_classes",
    "ensure_converged",
]

_QUANTS = (2.5, 25.0, 50.0, 75.0, 97.5)


def _check_chains(chains):
    arr = np.asarray(chains, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a (n_chains, n_draws) array")
    if arr.shape[0] < 2:
        raise ValueError("the diagnostic needs at least two chains")
    if arr.shape[1] < 10:
        raise ValueError("the diagnostic needs at least 10 draws per chain")
    return arr


def rhat(chains) -> float:
    """Corrected potential scale reduction factor over parallel chains.

    Identically constant chains return exactly 1 (the 0/0 case is read as
    perfect agreement).
    """
    x = _check_chains(chains)
    m, n = x.shape
    means = x.mean(axis=1)
    variances = x.var(axis=1, ddof=1)
    w = variances.mean()
    b = n * means.var(ddof=1)
    if w <= 1e-300:
        return 1.0 if b <= 1e-300 else np.inf
    sig2 = (n - 1.0) / n * w + b / n
    vhat = sig2 + b / (m * n)
    # degrees-of-freedom correction from the variance of the variance estimate
    var_w = variances.var(ddof=1) / m
    var_b = 2.0 * b * b / (m - 1.0)
    cov_wb = (n / m) * (
        np.cov(variances, means ** 2, ddof=1)[0, 1]
        - 2.0 * means.mean() * np.cov(variances, means, ddof=1)[0, 1]
    )
    var_v = ((n - 1.0) ** 2 * var_w + (1.0 + 1.0 / m) ** 2 * var_b
             + 2.0 * (n - 1.0) * (1.0 + 1.0 / m) * cov_wb) / n ** 2
    ratio = vhat / w
    if var_v <= 0 or not np.isfinite(var_v):
        return float(np.sqrt(ratio))
    df = 2.0 * vhat * vhat / var_v
    return float(np.sqrt(ratio * (df + 3.0) / (df + 1.0)))


def _chain_autocorr(x):
    """Per-chain autocorrelation estimates via FFT, biased normalization."""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real / n
    return acov


def effective_draws(chains) -> float:
    """Autocorrelation-based effective sample size across chains.

    The summed autocorrelation is truncated at the first lag pair whose sum
    is non-positive; the result never exceeds the total kept draws.
    """
    x = _check_chains(chains)
    m, n = x.shape
    acov = _chain_autocorr(x)
    w = (acov[:, 0] * n / (n - 1.0)).mean()
    b_over_n = x.mean(axis=1).var(ddof=1)
    vhat = (n - 1.0) / n * w + b_over_n
    if vhat <= 1e-300:
        return float(m * n)
    rho = 1.0 - (w - acov.mean(axis=0)) / vhat  # rho[0] == 1 by construction
    tau = 0.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tau += pair
        t += 2
    ess = m * n / (1.0 + 2.0 * tau)
    return float(min(ess, m * n))


@dataclass(frozen=True)
class ParamSummary:
    """One monitored scalar: posterior moments, quantiles, and diagnostics."""

    name: str
    mean: float
    sd: float
    q2_5: float
    q25: float
    q50: float
    q75: float
    q97_5: float
    rhat: float
    n_eff: float

    def quantiles(self):
        return (self.q2_5, self.q25, self.q50, self.q75, self.q97_5)


def _summary_of(name, draws):
    pooled = draws.reshape(-1)
    qs = np.percentile(pooled, _QUANTS)
    if draws.shape[0] >= 2 and draws.shape[1] >= 10:
        r = rhat(draws)
        ess = effective_draws(draws)
    else:
        r = np.nan
        ess = float(pooled.size)
    return ParamSummary(name, float(pooled.mean()), float(pooled.std(ddof=1)),
                        *(float(v) for v in qs), float(r), float(ess))


def modal_classes(class_draws):
    """Posterior mode and median of per-person class labels.

    `class_draws` has shape (n_chains, n_kept, n_persons) (or an extra
    trailing axis for multiple occasions).  Returns (mode, median) arrays of
    the trailing shape.
    """
    arr = np.asarray(class_draws)
    flat = arr.reshape(-1, *arr.shape[2:])
    draws = flat.reshape(flat.shape[0], -1)
    modes = np.empty(draws.shape[1], dtype=np.int64)
    for j in range(draws.shape[1]):
        values, counts = np.unique(draws[:, j], return_counts=True)
        modes[j] = values[np.argmax(counts)]
    medians = np.median(draws, axis=0)
    return modes.reshape(arr.shape[2:]), medians.reshape(arr.shape[2:])


def summarize(store, monitored=None, include_deviance=True):
    """Summaries of the monitored continuous parameters plus class estimates.

    Returns (summaries, classes) where `classes` is None when the model has
    no class labels, else a dict with the posterior mode and median per
    person.
    """
    summaries = []
    names = monitored if monitored is not None else store.families()
    for name in names:
        if name == "c":
            continue
        for label, draws in store.scalar_traces(name):
            summaries.append(_summary_of(label, draws))
    if include_deviance:
        summaries.append(_summary_of("deviance", store.deviance))
    classes = None
    if "c" in store.families() and (monitored is None or "c" in monitored):
        mode, median = modal_classes(store.get("c"))
        classes = {"mode": mode, "median": median}
    return summaries, classes


def format_summary_table(summaries):
    """Whitespace-delimited summary text: mean sd quantiles Rhat n.eff."""
    header = ["", "mean", "sd", "2.5%", "25%", "50%", "75%", "97.5%", "Rhat", "n.eff"]
    name_w = max(len(s.name) for s in summaries) + 2
    lines = [f"{header[0]:<{name_w}}" + " ".join(f"{h:>12}" for h in header[1:])]
    for s in summaries:
        cells = [s.mean, s.sd, *s.quantiles(), s.rhat, s.n_eff]
        lines.append(
            f"{s.name:<{name_w}}" + " ".join(f"{v:>12.6g}" for v in cells)
        )
    return "\n".join(lines) + "\n"


def ensure_converged(result, monitored, threshold=1.2, increment=None,
                     max_rounds=0, extend=None, progress=None):
    """Auto-continue loop: extend chains until every monitored R-hat clears.

    Returns (result, report dict).  `extend` defaults to the engine's
    extend_chains; `increment` defaults to the original post-burn-in length.
    """
    from .sampler.engine import extend_chains as _default_extend

    extend = extend or _default_extend
    increment = increment or (result.config.n_iter - result.config.n_burnin)
    rounds = 0
    while True:
        worst_name, worst = None, -np.inf
        for name in monitored:
            if name == "c" or name not in result.store.families():
                continue
            for label, draws in result.store.scalar_traces(name):
                r = rhat(draws)
                if r > worst:
                    worst_name, worst = label, r
        converged = bool(worst < threshold)
        if converged or rounds >= max_rounds:
            report = {
                "converged": converged,
                "worst_rhat": float(worst),
                "worst_param": worst_name,
                "rounds": rounds,
                "total_iterations": result.config.n_iter + rounds * increment,
            }
            return result, report
        rounds += 1
        result = extend(result, increment, progress)
