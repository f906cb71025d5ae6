"""Pure-numpy implementations of the hot sampler kernels.

These are the fallback backend; the Cython module `_speedups` mirrors the
same signatures.  All randomness comes in as pre-drawn uniforms so both
backends are driven by identical random streams.
"""

import numpy as np

BACKEND = "numpy"


def person_class_loglik(y, log_p, log_q):
    """(N, C) log-likelihood of each person's responses under each class.

    y is the (N, I) uint8 response matrix; log_p/log_q are the (C, I)
    elementwise log success/failure probabilities.
    """
    yf = y.astype(np.float64)
    return yf @ (log_p - log_q).T + log_q.sum(axis=1)[None, :]


def draw_categorical_rows(log_weights, u):
    """One categorical draw per row from unnormalized log weights.

    Cumulative-sum inversion with a single uniform per row; weights are
    renormalized once per draw.
    """
    w = np.exp(log_weights - log_weights.max(axis=1, keepdims=True))
    cs = np.cumsum(w, axis=1)
    targets = u * cs[:, -1]
    idx = (cs < targets[:, None]).sum(axis=1)
    return np.minimum(idx, w.shape[1] - 1).astype(np.int64)


def class_counts(classes, y, n_classes):
    """Per-class person counts and per-class-item correct counts."""
    m = np.bincount(classes, minlength=n_classes).astype(np.float64)
    r = np.zeros((n_classes, y.shape[1]), dtype=np.float64)
    np.add.at(r, classes, y.astype(np.float64))
    return m, r


def bernoulli_loglik(y, p):
    """Total log-likelihood of a 0/1 matrix under cellwise probabilities."""
    yf = y.astype(np.float64)
    with np.errstate(divide="ignore"):
        return float(np.sum(yf * np.log(p) + (1.0 - yf) * np.log1p(-p)))


def pearson_pair(y, p, u):
    """(realized, replicated) squared-Pearson-residual discrepancies.

    The replicate is drawn cellwise as Bernoulli(p) from the supplied
    uniforms, so both backends replicate identically.
    """
    yf = y.astype(np.float64)
    denom = p * (1.0 - p)
    realized = float(np.sum((yf - p) ** 2 / denom))
    yrep = (u < p).astype(np.float64)
    replicated = float(np.sum((yrep - p) ** 2 / denom))
    return realized, replicated
