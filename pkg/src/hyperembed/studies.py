"""Simulation-study harness: generate, fit every method, evaluate, summarise.

Each replicate draws a fresh network from :class:`GenSpec` with its own seed,
tunes the ridge weight of every method on validation data, tunes the
augmentation cutoff for the augmented joint method, and scores the test sets.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import io
from .augment import DEFAULT_CAP, augment_and_refit, embed_observed
from .metrics import EvaluationError, auc, evaluate, score_pairs, validation_auc
from .model import ModelConfig, pairwise_sum, sigmoid
from .optim import FitError, TuningError, tune_lambda, variant_config
from .simgen import GenSpec, make_splits, split_pairs

log = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "DEFAULT_LAMBDA_GRID",
    "DEFAULT_DELTA_GRID",
    "MethodResult",
    "Replicate",
    "run_replicate",
    "run_study",
    "summarize",
    "format_table",
    "run_ego",
]

METHODS = ("PLE", "HLE", "JLE", "AugJLE")
DEFAULT_LAMBDA_GRID = (3e-5, 1e-4, 3e-4, 1e-3)
DEFAULT_DELTA_GRID = (0.05, 0.1, 0.2)
STUDY_ITERS = 3000


@dataclass
class MethodResult:
    report: object          # EvalReport on the test sets
    lam: float
    delta: float | None = None
    augmented: int = 0
    seconds: float = 0.0


@dataclass
class Replicate:
    spec: GenSpec
    results: dict = field(default_factory=dict)   # method -> MethodResult
    errors: dict = field(default_factory=dict)    # method -> message
    info: dict = field(default_factory=dict)


def _score(Z, cfg, bundle):
    return evaluate(Z, cfg, bundle.test_pair, bundle.test_hyper,
                    bundle.test_pair_truth, bundle.test_hyper_truth)


def _augmented(train_pair, train_hyper, valid_pair, valid_hyper, config, lam, delta_grid, cap):
    """Aug JLE with the joint method's ridge weight and a validation-tuned cutoff."""
    cfg = config.with_(lam=lam)
    z_obs, _ = embed_observed(train_pair, train_hyper, cfg)
    best = None
    for delta in sorted(set(delta_grid)):
        Z, extra, _ = augment_and_refit(train_pair, train_hyper, cfg, delta, cap, z_obs=z_obs)
        score = validation_auc(Z, cfg, valid_pair, valid_hyper)
        if best is None or score >= best[0]:  # ties: larger cutoff
            best = (score, delta, Z, len(extra))
    return best


def run_replicate(spec, methods=METHODS, config=None, lambda_grid=DEFAULT_LAMBDA_GRID,
                  delta_grid=DEFAULT_DELTA_GRID, cap_per_class=DEFAULT_CAP):
    """Fit and score the requested methods on one simulated network."""
    config = config or ModelConfig(r=spec.r, beta=3.0).with_(max_iter=STUDY_ITERS)
    config = config.with_(seed=spec.seed)
    bundle = make_splits(spec)
    rep = Replicate(spec=spec, info=dict(bundle.info))
    rep.info.update(train_pairs=len(bundle.train_pair), train_hyper=len(bundle.train_hyper),
                    test_hyper=len(bundle.test_hyper))
    lam_by_kind = {}
    for method in methods:
        start = time.perf_counter()
        try:
            if method == "AugJLE":
                lam = lam_by_kind.get("JLE")
                if lam is None:
                    lam, _ = tune_lambda(lambda_grid, bundle.train_pair, bundle.train_hyper,
                                         bundle.valid_pair, bundle.valid_hyper, config, "JLE")
                _, delta, Z, count = _augmented(bundle.train_pair, bundle.train_hyper,
                                                bundle.valid_pair, bundle.valid_hyper, config,
                                                lam, delta_grid, cap_per_class)
                report = _score(Z, config.with_(lam=lam), bundle)
                result = MethodResult(report, lam, delta, count)
            else:
                lam, _, (Z, _) = tune_lambda(lambda_grid, bundle.train_pair, bundle.train_hyper,
                                             bundle.valid_pair, bundle.valid_hyper, config,
                                             method, return_fit=True)
                lam_by_kind[method] = lam
                report = _score(Z, variant_config(method, config.with_(lam=lam)), bundle)
                result = MethodResult(report, lam)
        except (FitError, TuningError, EvaluationError, ValueError) as exc:
            log.warning("study %d seed %d %s failed: %s", spec.study, spec.seed, method, exc)
            rep.errors[method] = str(exc)
            continue
        result.seconds = time.perf_counter() - start
        rep.results[method] = result
        log.info("study %d n=%d seed %d %s lam=%g: %s", spec.study, spec.n, spec.seed, method,
                 result.lam, {k: round(v, 3) for k, v in sorted(report.auc.items())})
    return rep


def run_study(study, n, seeds, methods=METHODS, config=None, lambda_grid=DEFAULT_LAMBDA_GRID,
              delta_grid=DEFAULT_DELTA_GRID, **spec_fields):
    """One replicate per seed; extra keyword arguments go to :class:`GenSpec`."""
    out = []
    for seed in seeds:
        spec = GenSpec(study=study, n=n, seed=int(seed), **spec_fields)
        out.append(run_replicate(spec, methods, config, lambda_grid, delta_grid))
    return out


def summarize(replicates, sets=None):
    """``{(method, set): (mean, sd, count)}`` over replicates with a finite AUC."""
    values = {}
    for rep in replicates:
        for method, res in rep.results.items():
            for name, a in res.report.auc.items():
                if sets is not None and name not in sets:
                    continue
                if math.isfinite(a):
                    values.setdefault((method, name), []).append(a)
    out = {}
    for key, vals in values.items():
        arr = np.array(vals)
        sd = float(arr.std(ddof=1)) if len(arr) > 1 else float("nan")
        out[key] = (float(arr.mean()), sd, len(arr))
    return out


def format_table(summary, methods=METHODS, sets=None, show_sd=True):
    """Rows are test sets, columns methods; cells ``mean(sd)`` as in the study tables."""
    sets = sets or sorted({name for _, name in summary})
    methods = [m for m in methods if any((m, s) in summary for s in sets)]
    width = 14
    lines = ["set".ljust(12) + "".join(m.rjust(width) for m in methods)]
    for name in sets:
        cells = []
        for m in methods:
            if (m, name) not in summary:
                cells.append("-".rjust(width))
                continue
            mean, sd, _ = summary[(m, name)]
            text = f"{mean:.2f}"
            if show_sd and math.isfinite(sd):
                text += f"({sd:.2f})"
            cells.append(text.rjust(width))
        lines.append(name.ljust(12) + "".join(cells))
    return "\n".join(lines)


def run_ego(edges_path, circles_path, seed=0, config=None, lambda_grid=DEFAULT_LAMBDA_GRID,
            delta_grid=DEFAULT_DELTA_GRID, hyper_train=600, hyper_valid=600, test_size=2000,
            orders=(6, 10)):
    """Ego-network experiment: pairwise AUC and generalized m-order circle AUC.

    Friendships are split 40/20/40; the largest circle is dropped; training and
    validation hyperlinks are class-balanced 3-tuple samples labelled by circle
    co-membership; test hyperlinks are balanced m-tuples scored from pairwise
    inner products only. Returns ``{method: {set: auc}}`` plus run info.
    """
    edges, id_map = io.load_edges(edges_path)
    circles = io.load_circles(circles_path, id_map=id_map)
    n = circles.n
    circles = circles.drop_largest()
    pairs = io.edges_to_pairs(n, edges)
    rng = np.random.default_rng(seed)
    tr, va, te = split_pairs(pairs, (0.4, 0.2, 0.4), rng)
    train_pair, valid_pair, test_pair = pairs.subset(tr), pairs.subset(va), pairs.subset(te)

    sample = io.circles_to_hyperlinks(circles, hyper_train + hyper_valid, balance=True, seed=seed)
    perm = rng.permutation(len(sample))
    train_hyper = sample.subset(np.sort(perm[:hyper_train]))
    valid_hyper = sample.subset(np.sort(perm[hyper_train:]))
    tests = {m: io.circles_to_hyperlinks(circles, test_size, balance=True, seed=seed + m, m=m)
             for m in orders}

    config = config or ModelConfig(r=5, beta=3.0).with_(max_iter=STUDY_ITERS)
    config = config.with_(seed=seed)
    fits = {}
    for method in ("PLE", "HLE", "JLE"):
        lam, _, (Z, _) = tune_lambda(lambda_grid, train_pair, train_hyper, valid_pair, valid_hyper,
                                     config, method, return_fit=True)
        fits[method] = (Z, lam)
    lam = fits["JLE"][1]
    _, delta, Z, count = _augmented(train_pair, train_hyper, valid_pair, valid_hyper, config, lam,
                                    delta_grid, DEFAULT_CAP)
    fits["AugJLE"] = (Z, lam)
    info = {"n": n, "links": int(pairs.y.sum()), "circles": len(circles.names),
            "delta": delta, "augmented": count}
    results = {}
    for method, (Z, lam) in fits.items():
        row = {"pair_test": auc(score_pairs(Z, test_pair), test_pair.y), "lambda": lam}
        for m, t in tests.items():
            row[f"hyper{m}_test"] = auc(sigmoid(pairwise_sum(Z, t.tuples)), t.y)
        results[method] = row
    return results, info
