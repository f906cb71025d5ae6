"""Batch front end: configuration parsing, runs, and the output file set.

A run is declared in one flat key-value file (``key = value`` per line,
``#`` comments), optionally overridden with ``--set key=value`` flags.  The
``fit`` command writes, for model tag TAG: ``pattern_TAG.txt`` (modal class
per person, 1-based), ``itempar_TAG.txt`` (posterior means then sds of the
item parameters), ``summary_TAG.txt`` (mean/sd/quantiles/Rhat/n.eff rows),
and the single-value files ``DIC_TAG.txt``, ``deviance_TAG.txt``,
``ppp_TAG.txt``, ``time_TAG.txt``.  Exit codes: 0 success, 2 parse failure,
3 dimension mismatch, 4 non-convergence after the extension cap, 5 sampler
failure.
"""

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DataParseError,
    DimensionMismatchError,
    QMatrix,
    ResponseMatrix,
    enumerate_patterns,
    read_matrix_csv,
    write_patterns_csv,
)
from .diagnostics import ensure_converged, format_summary_table, rhat, summarize
from .fit import fit_report
from .latent import HigherOrderLatent, LongitudinalLatent, PriorSpec, UnstructuredLatent
from .models import DinaParams, LcdmParams, RdinaParams, RrumParams
from .sampler import MODEL_KINDS, McmcConfig, SamplerError, build_model, run_chains
from .simulate import SimDesign, simulate_responses

__all__ = ["main", "RunConfig", "load_config"]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DIMENSION = 3
EXIT_NONCONVERGED = 4
EXIT_SAMPLER = 5

_PRIOR_FIELDS = {f.name for f in dataclasses.fields(PriorSpec)}


class ConfigError(DataParseError):
    """The run configuration is malformed."""


@dataclass
class RunConfig:
    """Declarative description of one run (see README for the schema)."""

    model: str
    q_matrix: str = None
    responses: str = None
    output_dir: str = None
    n_chains: int = 2
    n_iter: int = 10000
    n_burnin: int = None
    thin: int = 1
    seed: int = 0
    monitor: tuple = None
    delta: tuple = None
    priors: str = "noninformative"
    prior_overrides: dict = field(default_factory=dict)
    testlet_ids: tuple = None
    n_testlets: int = None
    items_per_occasion: tuple = None
    n_anchor_items: int = None
    rhat_threshold: float = 1.2
    adapt_iters: int = None
    extend_increment: int = None
    extend_rounds: int = 0
    np_override: int = None
    n_persons: int = None
    true_params: str = None
    write_pattern_space: bool = False
    overdispersion: float = 2.0
    proposal_sd: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(
                f"unknown model {self.model!r}; expected one of {', '.join(MODEL_KINDS)}")
        if self.output_dir is None:
            self.output_dir = os.environ.get("BAYESCDM_OUTDIR", ".")

    @property
    def model_tag(self):
        return self.model.upper().replace("-", "_")

    def prior_spec(self):
        if self.priors == "noninformative":
            base = PriorSpec.noninformative
        elif self.priors in ("good-items", "good_items"):
            base = PriorSpec.good_items
        else:
            raise ConfigError(f"unknown prior preset {self.priors!r}")
        try:
            return base(**self.prior_overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad prior settings: {exc}") from None

    def mcmc_config(self):
        return McmcConfig(
            n_chains=self.n_chains,
            n_iter=self.n_iter,
            n_burnin=self.n_burnin,
            thin=self.thin,
            seed=self.seed,
            proposal_sd=self.proposal_sd,
            adapt_iters=self.adapt_iters,
            overdispersion=self.overdispersion,
        )


_INT_KEYS = {"n_chains", "n_iter", "n_burnin", "thin", "seed", "n_testlets",
             "n_anchor_items", "adapt_iters", "extend_increment", "extend_rounds",
             "np_override", "n_persons"}
_FLOAT_KEYS = {"rhat_threshold", "overdispersion"}
_BOOL_KEYS = {"write_pattern_space"}
_LIST_KEYS = {"monitor", "testlet_ids", "items_per_occasion", "delta"}


def _parse_value(key, raw):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if key in _LIST_KEYS:
            parts = [p for p in raw.replace(",", " ").split() if p]
            if key == "monitor":
                return tuple(parts)
            if key == "delta":
                return tuple(float(p) for p in parts)
            return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None
    return raw


def load_config(path, overrides=()):
    """Read the key-value run file, then apply --set overrides in order."""
    pairs = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, raw = stripped.split("=", 1)
                pairs.append((key.strip(), raw))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        pairs.append((key.strip(), raw))

    known = {f.name for f in dataclasses.fields(RunConfig)} - {"prior_overrides", "proposal_sd"}
    values = {}
    prior_overrides = {}
    proposal_sd = {}
    for key, raw in pairs:
        if key in known:
            values[key] = _parse_value(key, raw)
        elif key in _PRIOR_FIELDS:
            raw = raw.strip()
            if key in ("slope_nonneg", "estimate_beta_scales"):
                prior_overrides[key] = raw.lower() in ("true", "yes", "1")
            else:
                try:
                    prior_overrides[key] = float(raw)
                except ValueError:
                    raise ConfigError(f"bad prior value for {key}: {raw!r}") from None
        elif key.startswith("proposal_sd."):
            try:
                proposal_sd[key.split(".", 1)[1]] = float(raw)
            except ValueError:
                raise ConfigError(f"bad proposal scale for {key}") from None
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    if "model" not in values:
        raise ConfigError("the config must set 'model'")
    try:
        return RunConfig(prior_overrides=prior_overrides, proposal_sd=proposal_sd, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# data loading and model assembly

def _load_q(rc):
    if rc.q_matrix is None:
        raise ConfigError("the config must set 'q_matrix'")
    return QMatrix(read_matrix_csv(rc.q_matrix, kind="int"))


def _load_y(rc, q):
    if rc.responses is None:
        raise ConfigError("the config must set 'responses'")
    arr = read_matrix_csv(rc.responses, kind="binary")
    if arr.shape[1] != q.n_items:
        raise DimensionMismatchError(
            f"responses have {arr.shape[1]} columns but the Q-matrix has {q.n_items} items")
    return ResponseMatrix(arr)


def _resolve_testlets(rc, q):
    if rc.testlet_ids is None or rc.n_testlets is None:
        raise ConfigError("testlet models need 'testlet_ids' and 'n_testlets'")
    d = np.asarray(rc.testlet_ids, dtype=np.int64)
    if d.shape[0] != q.n_items:
        raise DimensionMismatchError(
            f"testlet_ids has {d.shape[0]} entries but the Q-matrix has {q.n_items} items")
    # config ids are 1-based with M+1 marking standalone items
    if (d < 1).any() or (d > rc.n_testlets + 1).any():
        raise ConfigError(
            f"testlet ids must lie in 1..{rc.n_testlets + 1} (standalone = {rc.n_testlets + 1})")
    return d - 1


def _resolve_occasions(rc, q):
    if rc.items_per_occasion is None or rc.n_anchor_items is None:
        raise ConfigError("the longitudinal model needs 'items_per_occasion' and 'n_anchor_items'")
    if sum(rc.items_per_occasion) != q.n_items:
        raise DimensionMismatchError(
            f"items_per_occasion sums to {sum(rc.items_per_occasion)} "
            f"but the Q-matrix has {q.n_items} rows")
    return tuple(rc.items_per_occasion), int(rc.n_anchor_items)


def _resolve_delta(rc, n_patterns):
    if rc.delta is None:
        return None
    if len(rc.delta) == 1:
        return np.full(n_patterns, rc.delta[0])
    if len(rc.delta) != n_patterns:
        raise DimensionMismatchError(
            f"delta has {len(rc.delta)} entries but there are {n_patterns} patterns")
    return np.asarray(rc.delta, dtype=np.float64)


def _build(rc):
    q = _load_q(rc)
    y = _load_y(rc, q)
    priors = rc.prior_spec()
    mcmc = rc.mcmc_config()
    kwargs = {}
    if rc.model == "testlet-dina":
        kwargs["testlet_ids"] = _resolve_testlets(rc, q)
        kwargs["n_testlets"] = rc.n_testlets
    if rc.model == "long-dina":
        ipo, anchors = _resolve_occasions(rc, q)
        kwargs["items_per_occasion"] = ipo
        kwargs["n_anchor_items"] = anchors
    if rc.model not in ("ho-dina", "long-dina"):
        space = enumerate_patterns(q)
        kwargs["dirichlet_scale"] = _resolve_delta(rc, space.n_patterns)
    model = build_model(rc.model, y, q, priors, mcmc, **kwargs)
    return model, q, y, mcmc


# ---------------------------------------------------------------------------
# output files

def _write_single_value(path, value):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{value:.6g}\n")


def _item_parameter_table(model, store):
    """Per-item posterior means then sds, one row per item (or free slot)."""
    kind = model.kind
    if kind in ("dina", "dino", "rpa-dina", "ho-dina"):
        fams = ["g", "s"]
    elif kind in ("rdina", "testlet-dina", "long-dina"):
        fams = ["lambda0", "lambdaK"]
    elif kind == "llm":
        fams = ["lambda0", "lambda"]
    elif kind == "rrum":
        fams = ["pi_star", "r_star"]
    elif kind == "lcdm":
        fams = ["lambda0", "effects"]
    else:
        raise ValueError(f"no item table for {kind!r}")

    def stats(name):
        pooled = store.pooled(name)
        return pooled.mean(axis=0), pooled.std(axis=0, ddof=1)

    packed = getattr(getattr(model, "kernel", None), "packed_index", None)
    columns = []
    n_rows = store.pooled(fams[0]).shape[1]
    for which in (0, 1):  # means first, then sds
        for fam in fams:
            mean, sd = stats(fam)
            vec = (mean, sd)[which]
            if packed is not None and fam in ("lambda", "r_star", "effects"):
                if fam == "effects":
                    keys = sorted({sub for _, sub in packed},
                                  key=lambda s: (len(s), s))
                    grid = np.zeros((n_rows, len(keys)))
                    for j, (i, sub) in enumerate(packed):
                        grid[i, keys.index(sub)] = vec[j]
                else:
                    n_attr = model.q.n_attributes
                    grid = np.zeros((n_rows, n_attr))
                    for j, (i, k) in enumerate(packed):
                        grid[i, k] = vec[j]
                columns.append(grid)
            else:
                columns.append(vec[:, None])
    return np.hstack(columns)


def _write_outputs(rc, model, y, result, summaries, classes, report):
    os.makedirs(rc.output_dir, exist_ok=True)
    tag = rc.model_tag

    def path(stem):
        return os.path.join(rc.output_dir, f"{stem}_{tag}.txt")

    modal = np.asarray(classes["mode"]) + 1  # classes are 1-based in files
    np.savetxt(path("pattern"), modal.reshape(modal.shape[0], -1), fmt="%d")
    np.savetxt(path("itempar"), _item_parameter_table(model, result.store), fmt="%.6g")
    with open(path("summary"), "w", encoding="utf-8") as fh:
        fh.write(format_summary_table(summaries))
    _write_single_value(path("DIC"), report.dic)
    _write_single_value(path("deviance"), report.dbar)
    _write_single_value(path("ppp"), report.ppp)
    _write_single_value(path("time"), report.runtime_seconds)
    if rc.write_pattern_space and hasattr(model, "space"):
        write_patterns_csv(model.space, os.path.join(rc.output_dir, f"patterns_{tag}.csv"))


def _monitored_families(rc, model):
    available = list(model.families())
    if rc.monitor is None:
        return available
    unknown = [m for m in rc.monitor if m not in available]
    if unknown:
        raise ConfigError(
            f"monitor lists unknown families {unknown}; available: {available}")
    return list(rc.monitor)


def cmd_fit(rc, verbose=False):
    model, q, y, mcmc = _build(rc)
    progress = _progress_printer(rc) if verbose else None
    result = run_chains(model, mcmc, progress=progress)
    monitored = _monitored_families(rc, model)
    status = EXIT_OK
    convergence = None
    if rc.extend_rounds:
        result, convergence = ensure_converged(
            result,
            [m for m in monitored if m != "c"],
            threshold=rc.rhat_threshold,
            increment=rc.extend_increment,
            max_rounds=rc.extend_rounds,
        )
        if not convergence["converged"]:
            status = EXIT_NONCONVERGED
    summaries, classes = summarize(result.store, monitored)
    if classes is None:
        raise SamplerError(-1, "model produced no class labels")
    report = fit_report(result, y.n_persons, rc.np_override)
    _write_outputs(rc, model, y, result, summaries, classes, report)
    print(f"model={rc.model} dbar={report.dbar:.2f} p_e={report.p_e:.2f} "
          f"dic={report.dic:.2f} aic={report.aic:.2f} bic={report.bic:.2f} "
          f"np={report.np_} ppp={report.ppp:.3f} time={report.runtime_seconds:.2f}s")
    if convergence is not None:
        print(f"convergence: worst Rhat {convergence['worst_rhat']:.3f} "
              f"({convergence['worst_param']}) after {convergence['rounds']} extension(s)")
    return status


def cmd_preflight(rc):
    short = dataclasses.replace(
        rc,
        n_iter=min(rc.n_iter, 1000),
        n_burnin=None,
        extend_rounds=rc.extend_rounds or 3,
    )
    model, q, y, mcmc = _build(short)
    result = run_chains(model, mcmc)
    monitored = [m for m in _monitored_families(short, model) if m != "c"]
    increment = short.extend_increment or short.n_iter
    result, report = ensure_converged(
        result, monitored, threshold=rc.rhat_threshold,
        increment=increment, max_rounds=short.extend_rounds)
    degenerate = _degenerate_chains(result)
    print(f"preflight model={rc.model}: converged={report['converged']} "
          f"worst Rhat={report['worst_rhat']:.4f} ({report['worst_param']}) "
          f"iterations={report['total_iterations']}"
          + (" [degenerate: identical chains]" if degenerate else ""))
    return EXIT_OK if report["converged"] else EXIT_NONCONVERGED


def _degenerate_chains(result):
    """Identical per-chain traces make the diagnostic trivially pass."""
    dev = result.store.deviance
    return bool(all(np.array_equal(dev[0], dev[j]) for j in range(1, dev.shape[0])))


def _progress_printer(rc):
    def progress(chain, iteration, total, rates):
        pct = 100.0 * iteration / total
        print(f"[chain {chain}] {pct:5.1f}% ({iteration}/{total})", file=sys.stderr)
    return progress


# ---------------------------------------------------------------------------
# simulation

def _true_params_from_json(rc, q):
    if rc.true_params is None:
        raise ConfigError("simulate needs 'true_params' (a JSON file of true values)")
    try:
        with open(rc.true_params, "r", encoding="utf-8") as fh:
            tp = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read true_params: {exc}") from None
    return tp


def _array(tp, key, required=True):
    if key not in tp:
        if required:
            raise ConfigError(f"true_params is missing {key!r}")
        return None
    return np.asarray(tp[key], dtype=np.float64)


def cmd_simulate(rc):
    q = _load_q(rc)
    if rc.n_persons is None:
        raise ConfigError("simulate needs 'n_persons'")
    tp = _true_params_from_json(rc, q)
    kind = rc.model
    space = enumerate_patterns(q)
    mixing = _array(tp, "mixing", required=False)
    if mixing is None:
        mixing = np.full(space.n_patterns, 1.0 / space.n_patterns)
    extras = {}
    if kind in ("dina", "dino", "rpa-dina"):
        params = DinaParams(_array(tp, "slip"), _array(tp, "guess"))
        structure = UnstructuredLatent(mixing)
    elif kind == "rdina":
        params = RdinaParams(_array(tp, "intercept"), _array(tp, "kway"))
        structure = UnstructuredLatent(mixing)
    elif kind == "llm":
        from .models import LlmParams
        params = LlmParams(_array(tp, "intercept"), _array(tp, "main"))
        structure = UnstructuredLatent(mixing)
    elif kind == "rrum":
        params = RrumParams(_array(tp, "baseline"), _array(tp, "penalty"))
        structure = UnstructuredLatent(mixing)
    elif kind == "lcdm":
        effects = tuple(
            {tuple(int(v) - 1 for v in key.split(",")): val for key, val in item.items()}
            for item in tp.get("effects", [])
        )
        params = LcdmParams(_array(tp, "intercept"), effects)
        structure = UnstructuredLatent(mixing)
    elif kind == "ho-dina":
        params = DinaParams(_array(tp, "slip"), _array(tp, "guess"))
        structure = HigherOrderLatent(_array(tp, "attr_slope"), _array(tp, "attr_intercept"))
    elif kind == "testlet-dina":
        params = RdinaParams(_array(tp, "intercept"), _array(tp, "kway"))
        structure = UnstructuredLatent(mixing)
        extras = {
            "testlet_sigma2": _array(tp, "testlet_sigma2"),
            "testlet_ids": _resolve_testlets(rc, q),
            "n_testlets": rc.n_testlets,
        }
    elif kind == "long-dina":
        ipo, anchors = _resolve_occasions(rc, q)
        structure = LongitudinalLatent(_array(tp, "occasion_mean"),
                                       np.asarray(tp["cholesky"], dtype=np.float64))
        params = {"intercept": _array(tp, "intercept"), "kway": _array(tp, "kway")}
        extras = {
            "attr_structure": HigherOrderLatent(
                _array(tp, "attr_slope"), _array(tp, "attr_intercept")),
            "testlet_sigma2": _array(tp, "testlet_sigma2"),
            "items_per_occasion": ipo,
            "n_anchor_items": anchors,
        }
    else:
        raise ConfigError(f"simulate does not support model {kind!r}")

    design = SimDesign(kind=kind, q=q, n_persons=rc.n_persons, seed=rc.seed,
                       item_params=params, structure=structure, **extras)
    y, alpha, info = simulate_responses(design)
    os.makedirs(rc.output_dir, exist_ok=True)
    tag = rc.model_tag
    np.savetxt(os.path.join(rc.output_dir, f"Y_{tag}.csv"),
               y.entries, fmt="%d", delimiter=",")
    np.savetxt(os.path.join(rc.output_dir, f"alpha_{tag}.csv"),
               alpha.reshape(alpha.shape[0], -1), fmt="%d", delimiter=",")
    truth = {"model": kind, "seed": rc.seed, "n_persons": rc.n_persons}
    for key, val in tp.items():
        truth[key] = val
    for key, val in info.items():
        if key != "prob":
            truth[f"realized_{key}"] = np.asarray(val).tolist()
    with open(os.path.join(rc.output_dir, f"truth_{tag}.json"), "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=1)
    print(f"simulated {rc.n_persons} persons x {q.n_items} items -> {rc.output_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bayescdm",
        description="Bayesian cognitive diagnosis modeling by MCMC")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "estimate a model and write the output file set"),
        ("simulate", "generate data from a model with known true values"),
        ("preflight", "short run reporting the iterations needed to converge"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the key-value run file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key")
        if name == "fit":
            p.add_argument("--verbose", action="store_true", help="print chain progress")
    args = parser.parse_args(argv)
    try:
        rc = load_config(args.config, args.set)
        if args.command == "fit":
            return cmd_fit(rc, verbose=getattr(args, "verbose", False))
        if args.command == "simulate":
            return cmd_simulate(rc)
        return cmd_preflight(rc)
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except DataParseError as exc:  # includes ConfigError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SamplerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


if __name__ == "__main__":
    sys.exit(main())
