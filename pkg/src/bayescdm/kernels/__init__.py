"""Hot-loop kernels with a compiled core and a numpy fallback.

Importing this package picks the Cython extension when it is built and
silently falls back to the numpy implementations otherwise.  `BACKEND`
reports which one is active; `available_backends()` lists both when the
extension is present (the benchmark and the cross-backend tests use it).
"""

from . import _numpy

try:  # pragma: no cover - depends on whether the extension was built
    from . import _speedups  # type: ignore
    _active = _speedups
except ImportError:  # pragma: no cover
    _speedups = None
    _active = _numpy

BACKEND = _active.BACKEND

person_class_loglik = _active.person_class_loglik
draw_categorical_rows = _active.draw_categorical_rows
class_counts = _active.class_counts
bernoulli_loglik = _active.bernoulli_loglik
pearson_pair = _active.pearson_pair

__all__ = [
    "BACKEND",
    "person_class_loglik",
    "draw_categorical_rows",
    "class_counts",
    "bernoulli_loglik",
    "pearson_pair",
    "available_backends",
    "get_backend",
]


def available_backends():
    """Mapping of backend name to its kernel module."""
    backends = {"numpy": _numpy}
    if _speedups is not None:
        backends["cython"] = _speedups
    return backends


def get_backend(name=None):
    """Kernel module for `name` (default: the active backend)."""
    if name is None:
        return _active
    return available_backends()[name]
