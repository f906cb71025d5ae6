"""Multi-chain Metropolis-within-Gibbs engine for every supported model."""

from ..core import enumerate_patterns
from .config import DEFAULT_PROPOSAL_SD, McmcConfig
from .engine import McmcResult, SamplerError, extend_chains, run_chains
from .higher_order import HigherOrderDina
from .longitudinal import LongitudinalDina, longitudinal_layout
from .mixture import PatternMixtureModel, TestletMixtureModel
from .trace import TraceStore

__all__ = [
    "McmcConfig",
    "DEFAULT_PROPOSAL_SD",
    "TraceStore",
    "McmcResult",
    "SamplerError",
    "run_chains",
    "extend_chains",
    "build_model",
    "PatternMixtureModel",
    "TestletMixtureModel",
    "HigherOrderDina",
    "LongitudinalDina",
    "longitudinal_layout",
    "MODEL_KINDS",
]

MODEL_KINDS = (
    "dina", "rdina", "dino", "llm", "rrum", "lcdm", "rpa-dina",
    "ho-dina", "testlet-dina", "long-dina",
)


def build_model(kind, y, q, priors, config, *, testlet_ids=None, n_testlets=None,
                items_per_occasion=None, n_anchor_items=None, dirichlet_scale=None):
    """Assemble the sampler for one model kind over one dataset."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if kind == "ho-dina":
        space = enumerate_patterns(q)
        return HigherOrderDina(y, q, space, priors, config)
    if kind == "long-dina":
        if items_per_occasion is None or n_anchor_items is None:
            raise ValueError("long-dina needs items_per_occasion and n_anchor_items")
        return LongitudinalDina(y, q, priors, config, items_per_occasion, n_anchor_items)
    space = enumerate_patterns(q)
    if kind == "testlet-dina":
        if testlet_ids is None or n_testlets is None:
            raise ValueError("testlet-dina needs testlet_ids and n_testlets")
        return TestletMixtureModel(y, q, space, priors, config, testlet_ids,
                                   n_testlets, dirichlet_scale)
    return PatternMixtureModel(kind, y, q, space, priors, config, dirichlet_scale)
