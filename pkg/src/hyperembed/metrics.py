"""AUC scoring, truth-stratified test sets and overlap diagnostics."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import rankdata

from .model import hyper_logits, pair_logits, sigmoid

log = logging.getLogger(__name__)

__all__ = [
    "EvaluationError",
    "EvalReport",
    "auc",
    "stratify_by_truth",
    "overlap_degree",
    "score_pairs",
    "score_hyper",
    "validation_auc",
    "evaluate",
]


class EvaluationError(ValueError):
    pass


def auc(scores, labels):
    """Mann-Whitney AUC with ties counted 1/2."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise EvaluationError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUC needs both classes")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def stratify_by_truth(true_prob, low=0.2, high=0.8):
    """Boolean masks (A1, A2): truth inside ``[low, high]`` and the rest."""
    if low > high:
        raise ValueError("low must not exceed high")
    true_prob = np.asarray(true_prob, dtype=float)
    if np.any(np.isnan(true_prob)):
        raise ValueError("missing truth")
    a1 = (true_prob >= low) & (true_prob <= high)
    return a1, ~a1


def overlap_degree(pair_obs, hyper_obs):
    """Largest number of observed hyperlinks containing one observed pair."""
    if pair_obs is None or hyper_obs is None or len(pair_obs) == 0 or len(hyper_obs) == 0:
        return 0
    n = max(pair_obs.n, hyper_obs.n)
    counts = Counter()
    for a, b in combinations(range(hyper_obs.m), 2):
        keys = hyper_obs.tuples[:, a] * n + hyper_obs.tuples[:, b]
        counts.update(keys.tolist())
    observed = pair_obs.i * n + pair_obs.j
    return max((counts.get(k, 0) for k in observed.tolist()), default=0)


def score_pairs(Z, obs):
    return sigmoid(pair_logits(Z, obs.i, obs.j))


def score_hyper(Z, obs, config):
    return sigmoid(hyper_logits(Z, obs.tuples, config.beta, config.concordance))


def validation_auc(Z, config, valid_pair=None, valid_hyper=None):
    """Mean of the pairwise and hyperlink AUCs that are available."""
    values = []
    if valid_pair is not None and len(valid_pair):
        values.append(auc(score_pairs(Z, valid_pair), valid_pair.y))
    if valid_hyper is not None and len(valid_hyper):
        values.append(auc(score_hyper(Z, valid_hyper, config), valid_hyper.y))
    if not values:
        raise EvaluationError("no validation data")
    return float(np.mean(values))


@dataclass
class EvalReport:
    """Per-set AUC and size; ``mse`` holds probability error where truth is known."""

    auc: dict = field(default_factory=dict)
    count: dict = field(default_factory=dict)
    mse: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def add(self, name, scores, labels, truth=None):
        self.count[name] = int(len(labels))
        try:
            self.auc[name] = auc(scores, labels)
        except EvaluationError as exc:
            self.auc[name] = float("nan")
            self.errors[name] = str(exc)
            log.warning("set %s: %s", name, exc)
        if truth is not None and len(labels):
            self.mse[name] = float(np.mean((np.asarray(scores) - truth) ** 2))

    def names(self):
        return sorted(self.count)


def evaluate(Z, config, test_pair=None, test_hyper=None, pair_truth=None, hyper_truth=None,
             low=0.2, high=0.8):
    """Score test sets; with truth also report the A1/A2 strata."""
    has_pair = test_pair is not None and len(test_pair) > 0
    has_hyper = test_hyper is not None and len(test_hyper) > 0
    if not (has_pair or has_hyper):
        raise ValueError("no test data")
    report = EvalReport()
    for kind, obs, truth in (("pair", test_pair if has_pair else None, pair_truth),
                             ("hyper", test_hyper if has_hyper else None, hyper_truth)):
        if obs is None:
            continue
        scores = score_pairs(Z, obs) if kind == "pair" else score_hyper(Z, obs, config)
        if truth is not None:
            truth = np.asarray(truth, dtype=float)
            if truth.shape != scores.shape:
                raise ValueError(f"{kind} truth does not match test set size")
        report.add(f"{kind}_test", scores, obs.y, truth)
        if truth is not None:
            a1, a2 = stratify_by_truth(truth, low, high)
            report.add(f"{kind}_A1", scores[a1], obs.y[a1], truth[a1])
            report.add(f"{kind}_A2", scores[a2], obs.y[a2], truth[a2])
    return report
