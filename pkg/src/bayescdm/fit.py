"""Absolute fit (posterior predictive checking) and relative fit indices.

The discrepancy is the sum of squared Pearson residuals; its posterior
predictive probability compares realized against replicated data at every
kept iteration.  Deviance is conditional on the sampled latent state at
each iteration (the convention behind the reference results), and the
information criteria are deviance-based: DIC = mean + var/2, AIC = mean +
NP, BIC = mean + (log N - 1) * NP.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["FitReport", "discrepancy", "ppp", "dic", "aic_bic", "fit_report"]


def discrepancy(y, p):
    """Sum over cells of (y - p)^2 / (p (1 - p)); probabilities must be open."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError("observation and probability matrices must match")
    if (p <= 0.0).any() or (p >= 1.0).any():
        raise ValueError("discrepancy needs probabilities strictly inside (0, 1)")
    return float(np.sum((y - p) ** 2 / (p * (1.0 - p))))


def ppp(store):
    """Fraction of kept iterations with replicated >= realized discrepancy."""
    rep = np.asarray(store.disc_replicated, dtype=np.float64).ravel()
    real = np.asarray(store.disc_realized, dtype=np.float64).ravel()
    if rep.size == 0:
        raise ValueError("no recorded discrepancies")
    return float(np.mean(rep >= real))


def dic(deviance_trace):
    """(mean deviance, effective parameters, DIC) from the deviance trace.

    The effective parameter count is half the sample variance of the
    deviance (n-1 denominator).
    """
    d = np.asarray(deviance_trace, dtype=np.float64).ravel()
    if d.size < 2:
        raise ValueError("need at least two deviance draws")
    dbar = float(d.mean())
    p_e = float(d.var(ddof=1) / 2.0)
    return dbar, p_e, dbar + p_e


def aic_bic(dbar, n_params, n_persons):
    """Deviance-based AIC and BIC."""
    if n_params < 0 or n_persons < 1:
        raise ValueError("need n_params >= 0 and n_persons >= 1")
    aic = dbar + n_params
    bic = dbar + (np.log(n_persons) - 1.0) * n_params
    return float(aic), float(bic)


@dataclass(frozen=True)
class FitReport:
    """Deviance-based indices plus the posterior predictive probability."""

    dbar: float
    p_e: float
    dic: float
    aic: float
    bic: float
    np_: int
    ppp: float
    runtime_seconds: float

    def __post_init__(self):
        if not np.isclose(self.dic, self.dbar + self.p_e):
            raise ValueError("DIC must equal mean deviance plus effective parameters")
        if self.p_e < 0:
            raise ValueError("effective parameter count cannot be negative")
        if not 0.0 <= self.ppp <= 1.0:
            raise ValueError("ppp must be a probability")


def fit_report(result, n_persons, n_params=None):
    """Assemble the fit report for a finished run.

    `n_params` defaults to the model's own sampled-parameter count (item
    parameters actually drawn, the free mixing proportions, and structural
    parameters); pass an explicit value to use a different convention.
    """
    store = result.store
    dbar, p_e, dic_value = dic(store.deviance)
    np_used = int(n_params if n_params is not None else result.model.n_params)
    aic, bic = aic_bic(dbar, np_used, n_persons)
    return FitReport(
        dbar=dbar,
        p_e=p_e,
        dic=dic_value,
        aic=aic,
        bic=bic,
        np_=np_used,
        ppp=ppp(store),
        runtime_seconds=result.runtime_seconds,
    )
