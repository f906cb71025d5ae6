"""Storage for post-burn-in, thinned draws across chains."""

import numpy as np

__all__ = ["TraceStore"]


class TraceStore:
    """Per-parameter draw arrays keyed by family, plus fit traces.

    `traces[name]` has shape (n_chains, n_kept, *param_shape).  `labels[name]`
    lists one output label per scalar component (already 1-based where the
    output format calls for indices).  The deviance and the realized and
    replicated discrepancies are recorded at every kept iteration.
    """

    def __init__(self, traces, labels, deviance, disc_realized, disc_replicated,
                 acceptance=None):
        self.traces = traces
        self.labels = labels
        self.deviance = np.asarray(deviance)
        self.disc_realized = np.asarray(disc_realized)
        self.disc_replicated = np.asarray(disc_replicated)
        self.acceptance = acceptance or {}
        shapes = {v.shape[:2] for v in traces.values()}
        shapes.add(self.deviance.shape[:2])
        if len(shapes) != 1:
            raise ValueError("trace arrays disagree on (n_chains, n_kept)")

    @property
    def n_chains(self):
        return self.deviance.shape[0]

    @property
    def n_kept(self):
        return self.deviance.shape[1]

    def families(self):
        return list(self.traces)

    def get(self, name):
        return self.traces[name]

    def pooled(self, name):
        """Draws with chains concatenated: (n_chains * n_kept, *shape)."""
        arr = self.traces[name]
        return arr.reshape(arr.shape[0] * arr.shape[1], *arr.shape[2:])

    def scalar_traces(self, name):
        """Yield (label, (n_chains, n_kept) array) per scalar component."""
        arr = self.traces[name]
        flat = arr.reshape(arr.shape[0], arr.shape[1], -1)
        labels = self.labels[name]
        if flat.shape[2] != len(labels):
            raise ValueError(f"label count mismatch for {name}")
        for j, label in enumerate(labels):
            yield label, flat[:, :, j]

    def equals(self, other):
        """Exact equality of every recorded draw (determinism checks)."""
        if self.families() != other.families():
            return False
        if not np.array_equal(self.deviance, other.deviance):
            return False
        if not np.array_equal(self.disc_realized, other.disc_realized):
            return False
        if not np.array_equal(self.disc_replicated, other.disc_replicated):
            return False
        return all(
            np.array_equal(self.traces[k], other.traces[k]) for k in self.traces
        )

    def extended_with(self, other):
        """New store with `other`'s kept draws appended chainwise."""
        if self.families() != other.families():
            raise ValueError("cannot extend: trace families differ")
        traces = {
            k: np.concatenate([self.traces[k], other.traces[k]], axis=1)
            for k in self.traces
        }
        return TraceStore(
            traces,
            self.labels,
            np.concatenate([self.deviance, other.deviance], axis=1),
            np.concatenate([self.disc_realized, other.disc_realized], axis=1),
            np.concatenate([self.disc_replicated, other.disc_replicated], axis=1),
            other.acceptance or self.acceptance,
        )
