"""Analytic gradient of the joint loss and the adaptive first-order fitter."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .metrics import EvaluationError, validation_auc
from .model import sigmoid

log = logging.getLogger(__name__)

__all__ = [
    "FitError",
    "TuningError",
    "FitReport",
    "JointObjective",
    "grad_joint",
    "fit",
    "fit_variant",
    "variant_config",
    "tune_lambda",
]


class FitError(RuntimeError):
    """Optimisation produced a non-finite loss; carries the last finite state."""

    def __init__(self, message, Z=None, report=None):
        super().__init__(message)
        self.Z = Z
        self.report = report


class TuningError(RuntimeError):
    pass


@dataclass
class FitReport:
    iterations: int = 0
    losses: list = field(default_factory=list)
    grad_norm: float = float("nan")
    converged: bool = False
    elapsed: float = 0.0


def _incidence(nodes, n):
    """Sparse (n, len(nodes)) matrix scattering row e onto node nodes[e]."""
    k = len(nodes)
    return sp.csr_matrix((np.ones(k), (nodes, np.arange(k))), shape=(n, k))


class _PairChunk:
    def __init__(self, obs, n, scale):
        self.i, self.j = obs.i, obs.j
        self.y = obs.y.astype(float)
        self.scale = scale
        # symmetric weight matrix with a fixed sparsity pattern; each call
        # only refills its data, so the gradient is one sparse product W @ Z
        k = len(self.i)
        W = sp.csr_matrix((np.arange(2 * k, dtype=float),
                           (np.concatenate([self.i, self.j]), np.concatenate([self.j, self.i]))),
                          shape=(n, n))
        self.order = W.data.astype(np.int64)
        self.W = W

    def __call__(self, Z):
        p = sigmoid(np.einsum("ek,ek->e", Z[self.i], Z[self.j]))
        resid = self.y - p
        loss = self.scale * float(resid @ resid)
        g = -2.0 * self.scale * resid * p * (1.0 - p)
        W = self.W.copy()
        W.data = np.concatenate([g, g])[self.order]
        return loss, W @ Z


class _HyperChunk:
    def __init__(self, obs, n, scale, beta, kind):
        self.T = obs.tuples
        self.y = obs.y.astype(float)
        self.w = obs.w
        self.scale = scale
        self.beta = beta
        self.kind = kind
        # position-major so block a of the stacked gradient belongs to column a
        self.S = _incidence(self.T.T.reshape(-1), n)

    def __call__(self, Z):
        m = self.T.shape[1]
        cols = [Z[self.T[:, a]] for a in range(m)]
        total = sum(cols)
        psum = 0.5 * (np.einsum("ek,ek->e", total, total)
                      - sum(np.einsum("ek,ek->e", c, c) for c in cols))
        # leave-one-out products from prefix and suffix products
        prefix = [None] * m
        suffix = [None] * m
        prefix[0] = np.ones_like(cols[0])
        suffix[m - 1] = np.ones_like(cols[0])
        for a in range(1, m):
            prefix[a] = prefix[a - 1] * cols[a - 1]
            suffix[m - 1 - a] = suffix[m - a] * cols[m - a]
        prod = prefix[m - 1] * cols[m - 1]
        if self.kind == "cp":
            conc = prod.sum(axis=1)
            coef = 1.0
        else:
            nonneg = cols[0] >= 0
            neg = ~nonneg
            for c in cols[1:]:
                nonneg &= c >= 0
                neg &= c < 0
            psi = np.where(nonneg | neg, 1.0, -1.0)
            conc = np.einsum("ek,ek->e", psi, np.abs(prod))
            # np.sign(0) == 0 gives the zero subgradient at the kink
            coef = self.beta * psi * np.sign(prod)
        p = sigmoid(psum + self.beta * conc)
        resid = self.y - p
        loss = self.scale * float(np.sum(self.w * resid * resid))
        g = (-2.0 * self.scale * self.w * resid * p * (1.0 - p))[:, None]
        if self.kind == "cp":
            coef = self.beta
        V = np.concatenate([g * (total - cols[a] + coef * prefix[a] * suffix[a]) for a in range(m)])
        return loss, self.S @ V


def _chunks(size, parts):
    bounds = np.linspace(0, size, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


class JointObjective:
    """Joint loss and gradient with precomputed scatter matrices.

    With ``threads > 1`` entries are split into fixed index chunks evaluated in
    a thread pool and reduced in chunk order.
    """

    def __init__(self, pair_obs, hyper_obs, config, n=None):
        has_pair = pair_obs is not None and len(pair_obs) > 0
        has_hyper = hyper_obs is not None and len(hyper_obs) > 0
        if not (has_pair or has_hyper):
            raise ValueError("both observation sets are empty")
        if n is None:
            n = _n_nodes(pair_obs, hyper_obs)
        self.n = n
        self.config = config
        threads = max(1, int(config.optimizer.threads))
        self.terms = []
        if has_hyper:
            scale = 1.0 / len(hyper_obs)
            for s in _chunks(len(hyper_obs), threads):
                self.terms.append(_HyperChunk(hyper_obs.subset(s), n, scale, config.beta,
                                              config.concordance))
        if has_pair:
            scale = 1.0 / len(pair_obs)
            for s in _chunks(len(pair_obs), threads):
                self.terms.append(_PairChunk(pair_obs.subset(s), n, scale))
        self.pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def __call__(self, Z):
        if self.pool is None:
            parts = [term(Z) for term in self.terms]
        else:
            parts = list(self.pool.map(lambda term: term(Z), self.terms))
        loss = 0.0
        grad = np.zeros_like(Z)
        for part_loss, part_grad in parts:
            loss += part_loss
            grad += part_grad
        lam = self.config.lam
        if lam:
            loss += lam * float(np.sum(Z * Z))
            grad += 2.0 * lam * Z
        return loss, grad

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def grad_joint(Z, pair_obs, hyper_obs, config):
    """Gradient of the joint loss with respect to Z."""
    obj = JointObjective(pair_obs, hyper_obs, config, n=len(Z))
    try:
        return obj(np.asarray(Z, dtype=float))[1]
    finally:
        obj.close()


def _n_nodes(pair_obs, hyper_obs):
    return max(o.n for o in (pair_obs, hyper_obs) if o is not None)


def fit(pair_obs, hyper_obs, config, init=None):
    """Minimise the joint loss with bias-corrected moment-averaged steps.

    Returns ``(Z, FitReport)``. Entries are clipped to ``[-cap, cap]`` after
    every step. ``init`` warm-starts from a given matrix instead of the
    seeded uniform draw.
    """
    opt = config.optimizer
    obj = JointObjective(pair_obs, hyper_obs, config)
    n = obj.n
    if init is None:
        rng = np.random.default_rng(opt.seed)
        Z = rng.uniform(-opt.init_scale, opt.init_scale, size=(n, config.r))
    else:
        Z = np.array(init, dtype=float, copy=True)
        if Z.shape != (n, config.r):
            raise ValueError(f"init has shape {Z.shape}, expected {(n, config.r)}")
    np.clip(Z, -config.cap, config.cap, out=Z)

    report = FitReport()
    start = time.perf_counter()
    m1 = np.zeros_like(Z)
    m2 = np.zeros_like(Z)
    b1, b2 = opt.decay1, opt.decay2
    stepped = False
    last_good = Z.copy()
    try:
        for t in range(1, opt.max_iter + 1):
            loss, grad = obj(Z)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                report.elapsed = time.perf_counter() - start
                raise FitError(f"non-finite loss at iteration {t}", last_good, report)
            last_good[...] = Z
            report.losses.append(loss)
            report.iterations = t
            report.grad_norm = float(np.linalg.norm(grad))
            if report.grad_norm < opt.tol:
                report.converged = True
                stepped = False
                break
            m1 *= b1
            m1 += (1.0 - b1) * grad
            m2 *= b2
            m2 += (1.0 - b2) * grad * grad
            step = opt.step / (1.0 - b1 ** t)
            Z -= step * m1 / (np.sqrt(m2 / (1.0 - b2 ** t)) + 1e-8)
            np.clip(Z, -config.cap, config.cap, out=Z)
            stepped = True
        if stepped:
            loss, grad = obj(Z)
            if not np.isfinite(loss):
                raise FitError("non-finite loss after final step", last_good, report)
            report.losses.append(loss)
            report.grad_norm = float(np.linalg.norm(grad))
    finally:
        obj.close()
    report.elapsed = time.perf_counter() - start
    return Z, report


VARIANTS = ("PLE", "HLE", "JLE")


def variant_config(kind, config):
    kind = kind.upper()
    if kind not in VARIANTS:
        raise ValueError(f"unknown variant {kind!r}")
    return config.with_(concordance="cp" if kind == "HLE" else "signed")


def fit_variant(kind, pair_obs, hyper_obs, config, init=None):
    """Fit the pairwise-only (PLE), hyperlink-only (HLE) or joint (JLE) embedding.

    Score the result with ``variant_config(kind, config)``.
    """
    kind = kind.upper()
    cfg = variant_config(kind, config)
    has_pair = pair_obs is not None and len(pair_obs) > 0
    has_hyper = hyper_obs is not None and len(hyper_obs) > 0
    if kind == "PLE":
        if not has_pair:
            raise ValueError("PLE needs pairwise observations")
        Z, report = fit(pair_obs, None, cfg, init)
    elif kind == "HLE":
        if not has_hyper:
            raise ValueError("HLE needs hyperlink observations")
        Z, report = fit(None, hyper_obs, cfg, init)
    else:
        if not (has_pair or has_hyper):
            raise ValueError("JLE needs at least one observation set")
        Z, report = fit(pair_obs if has_pair else None, hyper_obs if has_hyper else None,
                        cfg, init)
    return Z, report


def tune_lambda(grid, train_pair, train_hyper, valid_pair, valid_hyper, config, kind="JLE",
                return_fit=False):
    """Grid search for the ridge weight by validation AUC.

    Returns ``(best_lambda, {lambda: auc})``; ties go to the smaller lambda.
    With ``return_fit`` the winning ``(Z, report)`` is appended.
    """
    grid = sorted(set(float(v) for v in grid))
    if not grid:
        raise ValueError("empty lambda grid")
    if (valid_pair is None or len(valid_pair) == 0) and (valid_hyper is None or len(valid_hyper) == 0):
        raise ValueError("no validation data")
    table = {}
    best = None
    for lam in grid:
        try:
            cfg = variant_config(kind, config.with_(lam=lam))
            Z, report = fit_variant(kind, train_pair, train_hyper, cfg)
        except FitError as exc:
            log.warning("lambda=%g diverged: %s", lam, exc)
            continue
        try:
            score = validation_auc(Z, cfg, valid_pair, valid_hyper)
        except EvaluationError as exc:
            log.warning("lambda=%g not scorable: %s", lam, exc)
            continue
        table[lam] = score
        if best is None or score > best[1]:
            best = (lam, score, (Z, report))
    if best is None:
        raise TuningError("every lambda in the grid failed")
    if return_fit:
        return best[0], table, best[2]
    return best[0], table
