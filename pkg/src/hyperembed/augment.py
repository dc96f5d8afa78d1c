"""Hyperlink augmentation from pairwise cliques.

The pipeline embeds the observed network, gathers candidate tuples whose
internal pairs are all observed with one constant label, keeps the ones the
first embedding scores confidently, and refits with them added.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import adjacency, ordered_cliques, tuple_keys
from .metrics import EvaluationError, validation_auc
from .model import HyperObservations, hyper_logits, sigmoid
from .optim import FitError, TuningError, fit_variant, variant_config

log = logging.getLogger(__name__)

__all__ = [
    "CandidatePools",
    "AugmentedSet",
    "embed_observed",
    "build_candidate_pools",
    "select_augmented",
    "augment_and_refit",
    "tune_delta",
]

DEFAULT_CAP = 20_000


@dataclass
class CandidatePools:
    n: int
    m: int
    clique: np.ndarray      # (k1, m) tuples whose internal pairs are all observed links
    non_clique: np.ndarray  # (k0, m) tuples whose internal pairs are all observed non-links

    def __len__(self):
        return len(self.clique) + len(self.non_clique)


@dataclass
class AugmentedSet:
    n: int
    m: int
    tuples: np.ndarray
    y: np.ndarray
    source: np.ndarray  # "clique" or "nonClique" per entry
    score: np.ndarray

    def __len__(self):
        return len(self.y)

    def as_observations(self):
        return HyperObservations(self.n, self.m, self.tuples, self.y)

    def keys(self):
        return set(tuple_keys(self.tuples, self.n).tolist())


def embed_observed(pair_obs, hyper_obs, config):
    """Step-1 embedding: a joint fit on the observed data with no ridge penalty."""
    if pair_obs is None or len(pair_obs) == 0:
        raise ValueError("augmentation needs pairwise observations")
    return fit_variant("JLE", pair_obs, hyper_obs, config.with_(lam=0.0))


def _cap(rng, tuples, cap):
    if cap is None or len(tuples) <= cap:
        return tuples
    keep = np.sort(rng.choice(len(tuples), size=cap, replace=False))
    return tuples[keep]


def build_candidate_pools(pair_obs, hyper_obs=None, m=3, cap_per_class=DEFAULT_CAP, seed=0):
    """Tuples whose internal pairs are all observed and all 1 (clique) or all 0."""
    if pair_obs is None or len(pair_obs) == 0:
        raise ValueError("candidate pools need pairwise observations")
    n = pair_obs.n
    ones = pair_obs.y == 1
    clique = ordered_cliques(adjacency(n, pair_obs.i, pair_obs.j, ones), m)
    non_clique = ordered_cliques(adjacency(n, pair_obs.i, pair_obs.j, ~ones), m)
    if hyper_obs is not None and len(hyper_obs):
        if hyper_obs.m != m:
            raise ValueError("hyperlink order does not match m")
        seen = tuple_keys(hyper_obs.tuples, n)
        clique = clique[~np.isin(tuple_keys(clique, n), seen)]
        non_clique = non_clique[~np.isin(tuple_keys(non_clique, n), seen)]
    rng = np.random.default_rng(seed)
    return CandidatePools(n, m, _cap(rng, clique, cap_per_class), _cap(rng, non_clique, cap_per_class))


def _check_delta(delta):
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")


def select_augmented(Z, pools, beta, delta):
    """Keep clique tuples scored >= 1-delta as links, non-clique ones <= delta as non-links."""
    _check_delta(delta)
    parts = []
    for tuples, label, name in ((pools.clique, 1, "clique"), (pools.non_clique, 0, "nonClique")):
        if len(tuples) == 0:
            continue
        p = sigmoid(hyper_logits(Z, tuples, beta))
        keep = p >= 1.0 - delta if label == 1 else p <= delta
        parts.append((tuples[keep], np.full(keep.sum(), label, np.int8),
                      np.full(keep.sum(), name, dtype=object), p[keep]))
    if not parts:
        return AugmentedSet(pools.n, pools.m, np.empty((0, pools.m), np.int64),
                            np.empty(0, np.int8), np.empty(0, dtype=object), np.empty(0))
    return AugmentedSet(pools.n, pools.m, *(np.concatenate(c) for c in zip(*parts)))


def augment_and_refit(pair_obs, hyper_obs, config, delta, cap_per_class=DEFAULT_CAP,
                      pool_seed=None, z_obs=None):
    """Embed, augment and refit. Returns ``(Z, AugmentedSet, FitReport)``.

    The refit starts from the Step-1 embedding and uses the configured ridge
    weight. An empty augmented set yields the plain joint fit instead.
    ``z_obs`` reuses a precomputed Step-1 embedding.
    """
    _check_delta(delta)
    if pair_obs is None or len(pair_obs) == 0:
        raise ValueError("augmentation needs pairwise observations")
    m = hyper_obs.m if hyper_obs is not None and len(hyper_obs) else 3
    if z_obs is None:
        z_obs, _ = embed_observed(pair_obs, hyper_obs, config)
    seed = config.optimizer.seed if pool_seed is None else pool_seed
    pools = build_candidate_pools(pair_obs, hyper_obs, m, cap_per_class, seed)
    extra = select_augmented(z_obs, pools, config.beta, delta)
    log.info("augmented %d tuples (%d links) from pools of %d/%d", len(extra),
             int(extra.y.sum()), len(pools.clique), len(pools.non_clique))
    if len(extra) == 0:
        Z, report = fit_variant("JLE", pair_obs, hyper_obs, config)
        return Z, extra, report
    observed = extra.as_observations()
    if hyper_obs is not None and len(hyper_obs):
        observed = hyper_obs.concat(observed)
    Z, report = fit_variant("JLE", pair_obs, observed, config, init=z_obs)
    return Z, extra, report


def tune_delta(grid, pair_obs, hyper_obs, valid_pair, valid_hyper, config,
               cap_per_class=DEFAULT_CAP, return_fit=False):
    """Grid search for the augmentation cutoff by validation AUC.

    Ties go to the larger cutoff. Returns ``(best_delta, {delta: auc})``, plus
    the winning ``(Z, AugmentedSet, FitReport)`` with ``return_fit``.
    """
    grid = sorted(set(float(d) for d in grid))
    if not grid:
        raise ValueError("empty delta grid")
    for d in grid:
        _check_delta(d)
    if (valid_pair is None or len(valid_pair) == 0) and (valid_hyper is None or len(valid_hyper) == 0):
        raise ValueError("no validation data")
    z_obs, _ = embed_observed(pair_obs, hyper_obs, config)
    cfg = variant_config("JLE", config)
    table, best = {}, None
    for d in grid:
        try:
            Z, extra, report = augment_and_refit(pair_obs, hyper_obs, config, d, cap_per_class,
                                                 z_obs=z_obs)
            score = validation_auc(Z, cfg, valid_pair, valid_hyper)
        except (FitError, EvaluationError) as exc:
            log.warning("delta=%g failed: %s", d, exc)
            continue
        table[d] = score
        if best is None or score >= best[1]:
            best = (d, score, (Z, extra, report))
    if best is None:
        raise TuningError("every delta in the grid failed")
    if return_fit:
        return best[0], table, best[2]
    return best[0], table
