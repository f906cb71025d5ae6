"""Q-matrix handling, attribute-pattern enumeration, and ideal-response kernels.

Attribute patterns are enumerated in odometer order with attribute 1 varying
fastest; every class index used elsewhere in the package (mixing proportions,
pattern files) refers to a row of that enumeration.  Per-attribute levels are
the sorted unique values of {0} union the Q-matrix column, which covers both
binary and ordered-category (polytomous) codings.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataParseError",
    "DimensionMismatchError",
    "QMatrix",
    "PatternSpace",
    "ResponseMatrix",
    "enumerate_patterns",
    "ideal_conjunctive",
    "ideal_disjunctive",
    "ideal_polytomous",
    "conjunctive_table",
    "disjunctive_table",
    "polytomous_table",
    "conjunctive_eta",
    "read_matrix_csv",
    "write_patterns_csv",
]


class DataParseError(ValueError):
    """A data file could not be parsed into a matrix of the expected kind."""


class DimensionMismatchError(ValueError):
    """Inputs that must agree in shape (Y columns vs Q rows, etc.) do not."""


def _as_int_matrix(entries, name):
    arr = np.asarray(entries)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D matrix")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError(f"{name} entries must be integers")
        arr = rounded.astype(np.int64)
    return np.ascontiguousarray(arr, dtype=np.int64)


@dataclass(frozen=True)
class QMatrix:
    """Item-by-attribute requirement matrix with non-negative integer entries.

    Binary entries mark whether an attribute is required; larger entries mark
    the required ordered-category level.  Every item must require something.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_int_matrix(self.entries, "Q-matrix")
        if (arr < 0).any():
            raise ValueError("Q-matrix entries must be non-negative")
        if (arr.sum(axis=1) == 0).any():
            raise ValueError("every Q-matrix row needs at least one positive entry")
        object.__setattr__(self, "entries", arr)

    @property
    def n_items(self):
        return self.entries.shape[0]

    @property
    def n_attributes(self):
        return self.entries.shape[1]

    @property
    def binary_view(self):
        """0/1 matrix marking which attributes each item requires at all."""
        return (self.entries > 0).astype(np.int64)

    @property
    def is_binary(self):
        return bool((self.entries <= 1).all())


@dataclass(frozen=True)
class PatternSpace:
    """All admissible attribute patterns, one per row, odometer-ordered."""

    patterns: np.ndarray
    level_sets: tuple = field(default=None)

    def __post_init__(self):
        arr = _as_int_matrix(self.patterns, "pattern matrix")
        object.__setattr__(self, "patterns", arr)
        if self.level_sets is None:
            levels = tuple(
                tuple(np.unique(np.concatenate(([0], arr[:, k]))))
                for k in range(arr.shape[1])
            )
            object.__setattr__(self, "level_sets", levels)
        else:
            object.__setattr__(
                self, "level_sets", tuple(tuple(int(v) for v in ls) for ls in self.level_sets)
            )
        if len({tuple(row) for row in arr}) != arr.shape[0]:
            raise ValueError("pattern rows must be distinct")

    @property
    def n_patterns(self):
        return self.patterns.shape[0]

    @property
    def n_attributes(self):
        return self.patterns.shape[1]

    def index_of(self, alpha):
        """Row index of one pattern (odometer order, attribute 1 fastest)."""
        alpha = np.asarray(alpha).ravel()
        idx = 0
        stride = 1
        for k, levels in enumerate(self.level_sets):
            pos = levels.index(int(alpha[k]))
            idx += pos * stride
            stride *= len(levels)
        return idx

    def indices_of(self, alphas):
        """Vectorized :meth:`index_of` for an (N, K) pattern matrix."""
        alphas = np.asarray(alphas)
        idx = np.zeros(alphas.shape[0], dtype=np.int64)
        stride = 1
        for k, levels in enumerate(self.level_sets):
            lookup = {v: i for i, v in enumerate(levels)}
            pos = np.array([lookup[int(v)] for v in alphas[:, k]])
            idx += pos * stride
            stride *= len(levels)
        return idx


@dataclass(frozen=True)
class ResponseMatrix:
    """Person-by-item matrix of 0/1 scored responses."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_int_matrix(self.entries, "response matrix")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("responses must be 0 or 1")
        object.__setattr__(self, "entries", np.ascontiguousarray(arr, dtype=np.uint8))

    @property
    def n_persons(self):
        return self.entries.shape[0]

    @property
    def n_items(self):
        return self.entries.shape[1]


def enumerate_patterns(q: QMatrix) -> PatternSpace:
    """Enumerate every admissible attribute pattern for a Q-matrix.

    Level set of attribute k = sorted unique values of {0} union column k.
    Rows are the Cartesian product in odometer order, attribute 1 fastest,
    so for a binary Q the C = 2**K rows are exactly all bit vectors.
    """
    levels = [
        tuple(int(v) for v in np.unique(np.concatenate(([0], q.entries[:, k]))))
        for k in range(q.n_attributes)
    ]
    # itertools.product varies the *last* factor fastest; reverse twice so
    # attribute 1 is the fast axis.
    rows = [row[::-1] for row in itertools.product(*reversed(levels))]
    return PatternSpace(np.array(rows, dtype=np.int64), tuple(levels))


def _require_binary(arr, name):
    arr = np.asarray(arr)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    return arr.astype(np.int64)


def ideal_conjunctive(alpha, q_row) -> int:
    """1 iff all attributes the item requires are mastered (0**0 == 1)."""
    alpha = _require_binary(alpha, "alpha")
    q_row = _require_binary(q_row, "q_row")
    return int((alpha >= q_row).all())


def ideal_disjunctive(alpha, q_row) -> int:
    """1 iff at least one required attribute is mastered."""
    alpha = _require_binary(alpha, "alpha")
    q_row = _require_binary(q_row, "q_row")
    return int((alpha & q_row).any())


def ideal_polytomous(alpha, q_row) -> int:
    """Conjunctive ideal response for ordered-category attribute levels.

    Attribute k passes when alpha_k >= q_k; only attributes with q_k > 0
    count.  Reduces to :func:`ideal_conjunctive` on binary inputs.
    """
    alpha = np.asarray(alpha, dtype=np.int64)
    q_row = np.asarray(q_row, dtype=np.int64)
    if (alpha < 0).any() or (q_row < 0).any():
        raise ValueError("levels must be non-negative")
    passed = alpha >= q_row
    required = q_row > 0
    return int(passed[required].all())


def conjunctive_table(patterns, q_entries):
    """(C, I) ideal-response table under the conjunctive rule, binary inputs."""
    p = _require_binary(patterns, "patterns")
    q = _require_binary(q_entries, "Q")
    return (p[:, None, :] >= q[None, :, :]).all(axis=2).astype(np.float64)

def disjunctive_table(patterns, q_entries):
    """(C, I) ideal-response table under the disjunctive rule, binary inputs."""
    p = _require_binary(patterns, "patterns")
    q = _require_binary(q_entries, "Q")
    return ((p[:, None, :] * q[None, :, :]) > 0).any(axis=2).astype(np.float64)

def polytomous_table(patterns, q_entries):
    """(C, I) conjunctive ideal-response table for ordered-category levels."""
    p = np.asarray(patterns, dtype=np.int64)
    q = np.asarray(q_entries, dtype=np.int64)
    if (p < 0).any() or (q < 0).any():
        raise ValueError("levels must be non-negative")
    passed = p[:, None, :] >= q[None, :, :]
    return (passed | (q[None, :, :] == 0)).all(axis=2).astype(np.float64)


def conjunctive_eta(alpha, q_entries):
    """(N, I) conjunctive ideal responses for a person-level binary pattern matrix."""
    a = np.asarray(alpha, dtype=np.int64)
    q = np.asarray(q_entries, dtype=np.int64)
    hits = a @ q.T
    return (hits == q.sum(axis=1)[None, :]).astype(np.float64)


def read_matrix_csv(path, kind="int"):
    """Read a headerless matrix file, comma- or whitespace-delimited.

    One row per line; `kind` is "int" (Q, testlet ids) or "binary" (responses).
    """
    rows = []
    width = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.replace(",", " ").split()
                try:
                    row = [float(p) for p in parts]
                except ValueError as exc:
                    raise DataParseError(f"{path}:{lineno}: {exc}") from None
                if width is None:
                    width = len(row)
                elif len(row) != width:
                    raise DataParseError(
                        f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                    )
                rows.append(row)
    except OSError as exc:
        raise DataParseError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataParseError(f"{path}: no data rows")
    arr = np.array(rows)
    if kind in ("int", "binary"):
        if not np.array_equal(np.rint(arr), arr):
            raise DataParseError(f"{path}: expected integer entries")
        arr = arr.astype(np.int64)
        if kind == "binary" and not np.isin(arr, (0, 1)).all():
            raise DataParseError(f"{path}: expected 0/1 entries")
    return arr


def write_patterns_csv(space: PatternSpace, path):
    """Write the pattern enumeration as CSV for audit, one pattern per row."""
    np.savetxt(path, space.patterns, fmt="%d", delimiter=",")
