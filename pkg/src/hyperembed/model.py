"""Link probabilities and losses over node latent factors.

Latent factors are plain ``(n, r)`` float arrays; row ``i`` embeds node ``i``.
Observation sets hold only observed statuses; a pair or tuple that is absent
from the set is unobserved.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np
from scipy.special import expit

__all__ = [
    "PairObservations",
    "HyperObservations",
    "OptimizerSettings",
    "ModelConfig",
    "sigmoid",
    "sign_consistency",
    "concordance_f",
    "concordance_batch",
    "pair_prob",
    "hyper_prob",
    "hyper_prob_generalized",
    "pair_logits",
    "pairwise_sum",
    "hyper_logits",
    "loss_pair",
    "loss_hyper",
    "loss_joint",
]

CONCORDANCES = ("signed", "cp")


def sigmoid(x):
    """Logistic function; stable for large ``|x|``."""
    return expit(x)


@dataclass
class PairObservations:
    """Observed pairwise statuses, stored canonically with ``i < j``."""

    n: int
    i: np.ndarray
    j: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.int64).reshape(-1)
        self.j = np.asarray(self.j, dtype=np.int64).reshape(-1)
        self.y = np.asarray(self.y, dtype=np.int8).reshape(-1)
        if not (len(self.i) == len(self.j) == len(self.y)):
            raise ValueError("i, j and y must have equal length")
        if self.n < 1:
            raise ValueError("n must be positive")
        if len(self.i):
            if np.any(self.i >= self.j):
                raise ValueError("pairs must satisfy i < j")
            if self.i.min() < 0 or self.j.max() >= self.n:
                raise ValueError("node index out of range")
            if not np.all((self.y == 0) | (self.y == 1)):
                raise ValueError("labels must be 0 or 1")
            keys = self.keys()
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate pair")

    @classmethod
    def from_records(cls, n, records):
        """Build from ``(i, j, y)`` records; each pair is sorted."""
        records = list(records)
        if not records:
            return cls.empty(n)
        arr = np.asarray(records, dtype=np.int64).reshape(-1, 3)
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        return cls(n, lo, hi, arr[:, 2])

    @classmethod
    def empty(cls, n):
        return cls(n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8))

    def __len__(self):
        return len(self.y)

    def keys(self):
        """Unique integer key ``i * n + j`` per pair."""
        return self.i * self.n + self.j

    def subset(self, index):
        return PairObservations(self.n, self.i[index], self.j[index], self.y[index])

    def records(self):
        return list(zip(self.i.tolist(), self.j.tolist(), self.y.tolist()))


@dataclass
class HyperObservations:
    """Observed m-order hyperlink statuses with per-entry weights."""

    n: int
    m: int
    tuples: np.ndarray
    y: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("hyperlink order must be at least 2")
        self.tuples = np.asarray(self.tuples, dtype=np.int64).reshape(-1, self.m)
        self.y = np.asarray(self.y, dtype=np.int8).reshape(-1)
        if self.w is None:
            self.w = np.ones(len(self.y))
        self.w = np.asarray(self.w, dtype=float).reshape(-1)
        if not (len(self.tuples) == len(self.y) == len(self.w)):
            raise ValueError("tuples, y and w must have equal length")
        if len(self.y):
            if np.any(np.diff(self.tuples, axis=1) <= 0):
                raise ValueError("tuples must be strictly increasing")
            if self.tuples.min() < 0 or self.tuples.max() >= self.n:
                raise ValueError("node index out of range")
            if not np.all((self.y == 0) | (self.y == 1)):
                raise ValueError("labels must be 0 or 1")
            if np.any(self.w <= 0) or not np.all(np.isfinite(self.w)):
                raise ValueError("weights must be positive and finite")
            if len(np.unique(self.tuples, axis=0)) != len(self.tuples):
                raise ValueError("duplicate tuple")

    @classmethod
    def from_records(cls, n, m, records):
        """Build from ``(nodes, y[, w])`` records; node tuples are sorted."""
        tuples, ys, ws = [], [], []
        for rec in records:
            nodes = sorted(int(v) for v in rec[0])
            tuples.append(nodes)
            ys.append(rec[1])
            ws.append(rec[2] if len(rec) > 2 else 1.0)
        if not tuples:
            return cls.empty(n, m)
        return cls(n, m, np.array(tuples), ys, ws)

    @classmethod
    def empty(cls, n, m=3):
        return cls(n, m, np.empty((0, m), np.int64), np.empty(0, np.int8), np.empty(0))

    def __len__(self):
        return len(self.y)

    def subset(self, index):
        return HyperObservations(self.n, self.m, self.tuples[index], self.y[index], self.w[index])

    def concat(self, other):
        if other.m != self.m:
            raise ValueError("cannot mix hyperlink orders")
        return HyperObservations(
            max(self.n, other.n),
            self.m,
            np.vstack([self.tuples, other.tuples]),
            np.concatenate([self.y, other.y]),
            np.concatenate([self.w, other.w]),
        )

    def records(self):
        return [
            (tuple(t), int(y), float(w))
            for t, y, w in zip(self.tuples.tolist(), self.y.tolist(), self.w.tolist())
        ]


@dataclass
class OptimizerSettings:
    step: float = 0.01
    decay1: float = 0.9
    decay2: float = 0.999
    max_iter: int = 5000
    tol: float = 1e-5
    seed: int = 0
    init_scale: float = 0.5
    threads: int = 1


@dataclass
class ModelConfig:
    """Hyperparameters of the joint embedding.

    ``concordance`` selects the high-order term: ``"signed"`` is the
    sign-consistent concordance, ``"cp"`` the plain CP product used by the
    hyperlink-only baseline.
    """

    r: int = 5
    beta: float = 1.0
    lam: float = 0.0
    cap: float = 10.0
    concordance: str = "signed"
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be positive")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.cap <= 0:
            raise ValueError("cap must be positive")
        if self.concordance not in CONCORDANCES:
            raise ValueError(f"unknown concordance {self.concordance!r}")

    def with_(self, **changes):
        """Copy with top-level or optimizer fields replaced."""
        opt_fields = OptimizerSettings.__dataclass_fields__
        opt_changes = {k: changes.pop(k) for k in list(changes) if k in opt_fields}
        cfg = replace(self, **changes)
        if opt_changes:
            cfg = replace(cfg, optimizer=replace(cfg.optimizer, **opt_changes))
        return cfg


# --- scalar forms -----------------------------------------------------------

def sign_consistency(coords):
    """+1 if all coordinates are >= 0 or all are < 0, else -1."""
    coords = np.asarray(coords, dtype=float).reshape(-1)
    if coords.size == 0:
        raise ValueError("empty coordinate list")
    if np.all(coords >= 0) or np.all(coords < 0):
        return 1
    return -1


def _rows(rows, min_m):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("expected an (m, r) array of latent rows")
    if rows.shape[0] < min_m:
        raise ValueError(f"need at least {min_m} rows, got {rows.shape[0]}")
    # canonical row order, so float results are bitwise independent of input order
    return rows[np.lexsort(rows.T[::-1])]


def concordance_f(rows):
    """Sign-adjusted sum over coordinates of the m-fold product."""
    rows = _rows(rows, 3)
    psi = np.array([sign_consistency(rows[:, k]) for k in range(rows.shape[1])])
    return float(np.sum(psi * np.abs(np.prod(rows, axis=0))))


def pair_prob(zi, zj):
    zi = np.asarray(zi, dtype=float)
    zj = np.asarray(zj, dtype=float)
    if zi.shape != zj.shape:
        raise ValueError("latent rows differ in length")
    # same arithmetic as the batched form, so both paths agree bit for bit
    return float(sigmoid(pair_logits(np.stack([zi, zj]), [0], [1])[0]))


def _pair_sum_rows(rows):
    return sum(float(rows[a] @ rows[b]) for a, b in combinations(range(len(rows)), 2))


def hyper_prob(rows, beta):
    rows = _rows(rows, 3)
    return float(sigmoid(_pair_sum_rows(rows) + beta * concordance_f(rows)))


def hyper_prob_generalized(rows):
    """m-order membership probability from pairwise inner products only."""
    rows = _rows(rows, 2)
    return float(sigmoid(_pair_sum_rows(rows)))


# --- batched forms ----------------------------------------------------------

def pair_logits(Z, i, j):
    return np.einsum("ek,ek->e", Z[i], Z[j])


def pairwise_sum(Z, tuples):
    """Sum of inner products over all pairs inside each tuple."""
    rows = Z[tuples]  # (e, m, r)
    total = rows.sum(axis=1)
    # sum_{a<b} z_a.z_b = (|sum z|^2 - sum |z|^2) / 2
    return 0.5 * (np.einsum("ek,ek->e", total, total) - np.einsum("emk,emk->e", rows, rows))


def concordance_batch(Z, tuples, kind="signed"):
    rows = Z[tuples]
    prod = np.prod(rows, axis=1)
    if kind == "cp":
        return prod.sum(axis=1)
    psi = np.where(np.all(rows >= 0, axis=1) | np.all(rows < 0, axis=1), 1.0, -1.0)
    return np.sum(psi * np.abs(prod), axis=1)


def hyper_logits(Z, tuples, beta, kind="signed"):
    return pairwise_sum(Z, tuples) + beta * concordance_batch(Z, tuples, kind)


# --- losses -----------------------------------------------------------------

def loss_pair(Z, obs):
    if obs is None or len(obs) == 0:
        raise ValueError("no pairwise observations")
    p = sigmoid(pair_logits(Z, obs.i, obs.j))
    return float(np.mean((obs.y - p) ** 2))


def loss_hyper(Z, obs, beta, kind="signed"):
    if obs is None or len(obs) == 0:
        raise ValueError("no hyperlink observations")
    p = sigmoid(hyper_logits(Z, obs.tuples, beta, kind))
    return float(np.sum(obs.w * (obs.y - p) ** 2) / len(obs))


def loss_joint(Z, pair_obs, hyper_obs, config):
    """Hyperlink loss + pairwise loss + ridge penalty; a missing set adds 0."""
    has_pair = pair_obs is not None and len(pair_obs) > 0
    has_hyper = hyper_obs is not None and len(hyper_obs) > 0
    if not (has_pair or has_hyper):
        raise ValueError("both observation sets are empty")
    total = 0.0
    if has_hyper:
        total += loss_hyper(Z, hyper_obs, config.beta, config.concordance)
    if has_pair:
        total += loss_pair(Z, pair_obs)
    if config.lam:
        total += config.lam * float(np.sum(Z * Z))
    return total
