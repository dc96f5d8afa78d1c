"""Synthetic networks: latent factors, pairwise links, 3-order hyperlinks,
missing-not-at-random observation, and the train/validation/test recipes
used by the simulation studies.

Every generator is a pure function of its arguments and seed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import special_ortho_group

from .graph import adjacency, all_pairs, all_pairs_in, clique_indicator, ordered_cliques, sample_tuples
from .model import HyperObservations, PairObservations, concordance_batch, pair_logits, pairwise_sum, sigmoid

log = logging.getLogger(__name__)

ALPHA_PAIR = (1.0, 1.0, 1.0, 0.2, 0.2)
ALPHA_HYPER = (0.2, 0.2, 0.2, 1.0, 1.0)


class GenerationError(ValueError):
    pass


class EstimationError(ValueError):
    pass


# --- latent factors ---------------------------------------------------------

def gen_latent_mixture(n, r, seed):
    """Entries from mu*U(-1,-0.6) + (1-mu)*U(0.6,1), mu ~ Bernoulli(0.5)."""
    if n < 1 or r < 1:
        raise ValueError("n and r must be positive")
    rng = np.random.default_rng(seed)
    neg = rng.random((n, r)) < 0.5
    mag = rng.uniform(0.6, 1.0, size=(n, r))
    return np.where(neg, -mag, mag)


def _spread_directions(K, r, rng):
    """K unit vectors with zero centroid: a rotated regular simplex when K <= r+1."""
    if K <= r + 1:
        E = np.eye(K) - 1.0 / K
        U, _, _ = np.linalg.svd(E)
        P = np.zeros((K, r))
        P[:, : K - 1] = U[:, : K - 1]
    else:
        P = gen_latent_mixture(K, r, rng)
        P -= P.mean(axis=0)
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    if r > 1:
        P = P @ special_ortho_group.rvs(r, random_state=rng).T
    return P


CLUSTER_NOISE = 0.1


def _cluster_rates(scale, dirs, u, eps, a, b):
    """Mean link probability within and between clusters for a centre scale."""
    zi = (scale * u[:, 0])[:, None] * dirs[a] + CLUSTER_NOISE * eps[:, 0]
    zj = (scale * u[:, 1])[:, None] * dirs[a] + CLUSTER_NOISE * eps[:, 1]
    zk = (scale * u[:, 2])[:, None] * dirs[b] + CLUSTER_NOISE * eps[:, 2]
    within = sigmoid(np.einsum("ek,ek->e", zi, zj)).mean()
    between = sigmoid(np.einsum("ek,ek->e", zi, zk)).mean()
    return within, between


@lru_cache(maxsize=None)
def cluster_scale(K, r, within=0.90, between=0.25, samples=50_000):
    """Centre scale whose expected within/between link rates best match the targets."""
    rng = np.random.default_rng(12345)
    dirs = _spread_directions(K, r, rng)
    a = rng.integers(K, size=samples)
    b = (a + rng.integers(1, K, size=samples)) % K
    u = rng.uniform(size=(samples, 3))
    eps = rng.normal(size=(samples, 3, r))

    def err(scale):
        w, bt = _cluster_rates(scale, dirs, u, eps, a, b)
        return (w - within) ** 2 + (bt - between) ** 2

    res = minimize_scalar(err, bounds=(0.1, 20.0), method="bounded", options={"xatol": 1e-4})
    return float(res.x)


def gen_latent_clustered(n, r, K, seed, within=0.90, between=0.25):
    """Latent rows grouped into K equal clusters.

    Row i is ``scale * u_i * d_k + noise`` with ``d_k`` the cluster direction,
    ``u_i ~ U(0, 1)`` a node-specific magnitude and small Gaussian noise. The
    scale is calibrated so within/between link rates approach the targets.
    Returns ``(Z, labels)``.
    """
    if K < 1 or K > n:
        raise ValueError("need 1 <= K <= n")
    rng = np.random.default_rng(seed)
    scale = cluster_scale(K, r, within, between)
    dirs = _spread_directions(K, r, rng)
    labels = rng.permutation(np.arange(n) % K)
    u = rng.uniform(size=n)
    Z = (scale * u)[:, None] * dirs[labels] + CLUSTER_NOISE * rng.normal(size=(n, r))
    return Z, labels


def cluster_link_rates(probs, i, j, labels):
    """Average link probability (or label) within and between clusters."""
    same = labels[i] == labels[j]
    return float(np.mean(probs[same])), float(np.mean(probs[~same]))


# --- links ------------------------------------------------------------------

def weighted(Z, alpha):
    return Z * np.asarray(alpha, dtype=float)


def gen_pair_links(Z, seed, alpha=None):
    """Every pair i<j linked independently with probability sigmoid(z_i.z_j).

    Returns ``(full PairObservations, probabilities)`` in row-major pair order.
    """
    Zw = Z if alpha is None else weighted(Z, alpha)
    n = len(Zw)
    i, j = all_pairs(n)
    probs = sigmoid(pair_logits(Zw, i, j))
    y = (np.random.default_rng(seed).random(len(probs)) < probs).astype(np.int8)
    return PairObservations(n, i, j, y), probs


def hyper_marginal(Z, tuples, c=1.0, beta=3.0):
    """sigmoid(c * pairwise sum + beta * signed concordance)."""
    return sigmoid(c * pairwise_sum(Z, tuples) + beta * concordance_batch(Z, tuples))


def gen_hyper_independent(Z, tuples, seed, alpha=ALPHA_HYPER, c=1.0, beta=3.0):
    """Independent 3-order hyperlinks on the given tuples; returns ``(labels, probs)``."""
    if c <= 0 or beta < 1:
        raise ValueError("need c > 0 and beta >= 1")
    Zw = Z if alpha is None else weighted(Z, alpha)
    probs = hyper_marginal(Zw, tuples, c, beta)
    y = (np.random.default_rng(seed).random(len(probs)) < probs).astype(np.int8)
    return y, probs


def links_matrix(full_pairs):
    """Boolean matrix of realised links from a full pair label set."""
    return adjacency(full_pairs.n, full_pairs.i, full_pairs.j, full_pairs.y == 1)


def pair_prob_matrix(n, i, j, probs):
    P = np.zeros((n, n))
    P[i, j] = probs
    P[j, i] = probs
    return P


def dependent_probs(theta, clique_prob, clique, rho):
    """Hyperlink probabilities given the clique indicator.

    ``p0 = theta - rho * q`` and ``p1 = p0 + rho`` keep the marginal at
    ``theta``; when that leaves [0, 1], p0 is clipped to ``[0, 1 - rho]`` so
    that ``p1 - p0 == rho`` still holds exactly.
    """
    p0 = np.clip(theta - rho * clique_prob, 0.0, 1.0 - rho)
    return p0 + rho * clique


def gen_hyper_dependent(Z, tuples, links, pair_probs, rho, seed, c=1.0, beta=3.0, alpha=None,
                        clique=None):
    """Hyperlinks whose probability jumps by ``rho`` when the tuple is a clique.

    ``links`` is the realised boolean link matrix, ``pair_probs`` the matrix of
    pairwise link probabilities. ``clique`` overrides the realised indicator.
    Returns ``(labels, GroundTruth)``.
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    tuples = np.asarray(tuples, dtype=np.int64)
    Zw = Z if alpha is None else weighted(Z, alpha)
    theta = hyper_marginal(Zw, tuples, c, beta)
    q = np.ones(len(tuples))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        q *= pair_probs[tuples[:, a], tuples[:, b]]
    if clique is None:
        clique = clique_indicator(links, tuples)
    p = dependent_probs(theta, q, clique, rho)
    y = (np.random.default_rng(seed).random(len(p)) < p).astype(np.int8)
    clamped = float(np.mean((theta - rho * q < 0) | (theta - rho * q > 1 - rho)))
    truth = GroundTruth(Z=Zw, hyper_tuples=tuples, hyper_prob=p, clique=np.asarray(clique),
                        extra={"theta": theta, "clique_prob": q, "clamped": clamped})
    return y, truth


def gen_hyper_clique_misspecified(cluster_labels, links, tuples, seed, p_same=0.90, p_cross=0.10):
    """Hyperlinks driven only by cliques and cluster membership, not latent factors."""
    tuples = np.asarray(tuples, dtype=np.int64)
    lab = np.asarray(cluster_labels)[tuples]
    same = np.all(lab == lab[:, :1], axis=1)
    clique = clique_indicator(links, tuples).astype(bool)
    p = np.where(clique, np.where(same, p_same, p_cross), 0.0)
    return (np.random.default_rng(seed).random(len(p)) < p).astype(np.int8)


def estimate_link_dependency(Z, tuples, links, pair_probs, rho, seed, **kwargs):
    """Monte-Carlo estimate of P(Y=1 | clique) - P(Y=1 | no clique) at fixed Z.

    Draws every tuple once with the indicator forced to 1 and once forced to 0
    and differences the empirical hyperlink rates.
    """
    ones = np.ones(len(tuples), dtype=np.int8)
    y1, _ = gen_hyper_dependent(Z, tuples, links, pair_probs, rho, seed, clique=ones, **kwargs)
    y0, _ = gen_hyper_dependent(Z, tuples, links, pair_probs, rho, seed + 1, clique=0 * ones, **kwargs)
    return float(y1.mean() - y0.mean())


# --- observation sampling ---------------------------------------------------

def estimate_rho_obs(pair_obs, n=None, seed=0, n_wedges=100_000):
    """Correlation between 'both wedge edges observed' and 'closing edge observed'."""
    n = pair_obs.n if n is None else n
    if n < 3:
        raise EstimationError("need at least 3 nodes")
    A = adjacency(n, pair_obs.i, pair_obs.j)
    rng = np.random.default_rng(seed)
    centre = rng.integers(0, n, size=n_wedges)
    j = (centre + rng.integers(1, n, size=n_wedges)) % n
    k = (centre + rng.integers(1, n, size=n_wedges)) % n
    ok = j != k
    if ok.sum() < 100:
        raise EstimationError("fewer than 100 valid wedges")
    centre, j, k = centre[ok], j[ok], k[ok]
    both = (A[centre, j] & A[centre, k]).astype(float)
    closing = A[j, k].astype(float)
    if both.std() == 0 or closing.std() == 0:
        raise EstimationError("observation indicators have zero variance")
    return float(np.corrcoef(both, closing)[0, 1])


def _closure_sample(n, pair_index, quota, closing_share, rng, batches=20):
    """Uniform seed sample, then batches drawn in proportion to closed wedges squared."""
    total = len(pair_index)
    n_seed = quota - int(round(closing_share * quota))
    chosen = np.zeros(total, dtype=bool)
    chosen[rng.choice(total, size=n_seed, replace=False)] = True
    iu, ju = np.triu_indices(n, k=1)
    batch = max(1, -(-(quota - n_seed) // batches))
    while chosen.sum() < quota:
        A = np.zeros((n, n))
        A[iu[chosen], ju[chosen]] = 1.0
        A += A.T
        wedges = (A @ A)[iu, ju]
        weight = np.where(chosen, 0.0, wedges ** 2)
        take = min(batch, quota - int(chosen.sum()))
        free = np.flatnonzero(~chosen)
        if weight.sum() <= 0:
            picks = rng.choice(free, size=take, replace=False)
        else:
            w = weight[free]
            nz = np.count_nonzero(w)
            if nz < take:
                picks = np.concatenate([free[w > 0], rng.choice(free[w == 0], size=take - nz, replace=False)])
            else:
                picks = rng.choice(free, size=take, replace=False, p=w / w.sum())
        chosen[picks] = True
    return chosen


def sample_observations(full_pairs, target_rate, rho_obs, seed, tol=0.01, max_iter=14):
    """Observe ``round(target_rate * #pairs)`` pairs, missing not at random.

    ``rho_obs == 0`` samples uniformly. Otherwise a share of the quota is
    drawn by wedge closure, with the share tuned by bisection until the
    measured observation dependency matches ``rho_obs``.
    """
    if not 0 < target_rate <= 1:
        raise ValueError("target_rate must lie in (0, 1]")
    if not 0 <= rho_obs < 1:
        raise ValueError("rho_obs must lie in [0, 1)")
    n = full_pairs.n
    total = len(full_pairs)
    quota = int(round(target_rate * total))
    if quota < 1:
        raise GenerationError("target rate yields no observed pairs")
    if rho_obs == 0:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(total, size=quota, replace=False))
        return full_pairs.subset(idx)

    def attempt(share):
        mask = _closure_sample(n, np.arange(total), quota, share, np.random.default_rng(seed))
        obs = full_pairs.subset(np.flatnonzero(mask))
        try:
            est = estimate_rho_obs(obs, n, seed=seed)
        except EstimationError:
            est = 0.0
        return obs, est

    lo, hi = 0.0, 1.0
    best_obs, hi_est = attempt(hi)
    best = (abs(hi_est - rho_obs), best_obs, hi_est)
    if hi_est < rho_obs - tol:
        raise GenerationError(
            f"observation dependency {rho_obs} unreachable at rate {target_rate} (max {hi_est:.3f})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        obs, est = attempt(mid)
        if abs(est - rho_obs) < best[0]:
            best = (abs(est - rho_obs), obs, est)
        if abs(est - rho_obs) <= tol / 2:
            break
        if est < rho_obs:
            lo = mid
        else:
            hi = mid
    log.debug("rho_obs target %.3f reached %.3f", rho_obs, best[2])
    return best[1]


# --- study recipes ----------------------------------------------------------

@dataclass
class GroundTruth:
    Z: np.ndarray
    pair_prob: np.ndarray | None = None
    hyper_tuples: np.ndarray | None = None
    hyper_prob: np.ndarray | None = None
    clique: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class GenSpec:
    """Settings of one simulated network and its splits.

    ``study`` picks the recipe (1, 2 or 3); unset fields take that study's
    defaults in :func:`make_splits`.
    """

    study: int = 1
    n: int = 100
    r: int = 5
    seed: int = 0
    alpha_pair: tuple = ALPHA_PAIR
    alpha_hyper: tuple = ALPHA_HYPER
    c: float = 1.0
    beta_gen: float = 3.0
    rho: float = 0.0
    rho_obs: float = 0.0
    clusters: int = 6
    pair_props: tuple | None = None
    missing_rate: float | None = None
    hyper_train_rate: float | None = None
    hyper_train_count: int | None = None
    max_eval_tuples: int | None = 50_000
    study3_eval_size: int = 2000

    def __post_init__(self):
        if self.study not in (1, 2, 3):
            raise ValueError("study must be 1, 2 or 3")
        if not (0 <= self.rho < 1 and 0 <= self.rho_obs < 1):
            raise ValueError("rho and rho_obs must lie in [0, 1)")
        if self.c <= 0 or any(a <= 0 for a in self.alpha_pair + self.alpha_hyper):
            raise ValueError("c and alpha entries must be positive")


@dataclass
class SplitBundle:
    spec: GenSpec
    train_pair: PairObservations
    valid_pair: PairObservations
    test_pair: PairObservations
    train_hyper: HyperObservations
    valid_hyper: HyperObservations
    test_hyper: HyperObservations
    test_pair_truth: np.ndarray
    test_hyper_truth: np.ndarray
    valid_hyper_truth: np.ndarray
    truth: GroundTruth
    info: dict = field(default_factory=dict)


def split_pairs(full_pairs, props, rng):
    """Random partition of a full pair set by proportions summing to 1."""
    props = np.asarray(props, dtype=float)
    if props.shape != (3,) or np.any(props < 0) or abs(props.sum() - 1) > 1e-9:
        raise ValueError("pair proportions must be three nonnegative numbers summing to 1")
    total = len(full_pairs)
    perm = rng.permutation(total)
    cut1 = int(round(props[0] * total))
    cut2 = cut1 + int(round(props[1] * total))
    parts = [np.sort(perm[:cut1]), np.sort(perm[cut1:cut2]), np.sort(perm[cut2:])]
    return parts


def _missing_rate_props(missing_rate):
    if not 0 < missing_rate < 1:
        raise ValueError("missing rate must lie in (0, 1)")
    observed = 1.0 - missing_rate
    return (0.8 * observed, 0.2 * observed, missing_rate)


def _subsample(rng, idx, cap):
    if cap is None or len(idx) <= cap:
        return idx
    return np.sort(rng.choice(idx, size=cap, replace=False))


def _balanced(rng, y, size):
    """Indices of a class-balanced subsample of at most ``size``."""
    pos, neg = np.flatnonzero(y == 1), np.flatnonzero(y == 0)
    k = min(len(pos), len(neg), size // 2)
    if k == 0:
        raise GenerationError("cannot balance: one class is empty")
    return np.sort(np.concatenate([rng.choice(pos, k, replace=False), rng.choice(neg, k, replace=False)]))


def _hyper(n, tuples, y):
    return HyperObservations(n, 3, tuples, y)


def make_splits(spec):
    """Generate a network and its train/validation/test splits for one study."""
    if spec.study in (1, 2):
        return _splits_latent(spec)
    return _splits_dependent(spec)


def _splits_latent(spec):
    n = spec.n
    seeds = np.random.SeedSequence(spec.seed).spawn(5)
    rng = np.random.default_rng(seeds[0])
    Z = gen_latent_mixture(n, spec.r, seeds[1])
    full, pprob = gen_pair_links(Z, seeds[2], alpha=spec.alpha_pair)
    if spec.pair_props is not None:
        props = spec.pair_props
    elif spec.missing_rate is not None:
        props = _missing_rate_props(spec.missing_rate)
    else:
        props = (0.6, 0.2, 0.2)
    tr, va, te = split_pairs(full, props, rng)
    train = full.subset(tr)

    observed = adjacency(n, train.i, train.j)
    pool = ordered_cliques(observed, 3)
    if spec.hyper_train_count is not None:
        n_train = spec.hyper_train_count
    elif spec.study == 1:
        n_train = int(round((spec.hyper_train_rate or 0.002) * comb(n, 3)))
    else:
        n_train = int(round((spec.hyper_train_rate or 0.01) * len(pool)))
    if n_train > len(pool) or n_train < 1:
        raise GenerationError(f"pool of {len(pool)} tuples cannot supply {n_train} training hyperlinks")
    perm = rng.permutation(len(pool))
    train_idx = np.sort(perm[:n_train])
    rest = perm[n_train:]
    half = len(rest) // 2
    valid_idx = _subsample(rng, np.sort(rest[:half]), spec.max_eval_tuples)
    test_idx = _subsample(rng, np.sort(rest[half:]), spec.max_eval_tuples)
    used = np.concatenate([train_idx, valid_idx, test_idx])
    y, hprob = gen_hyper_independent(Z, pool[used], seeds[3], alpha=spec.alpha_hyper, c=spec.c,
                                     beta=spec.beta_gen)
    a, b = len(train_idx), len(train_idx) + len(valid_idx)
    truth = GroundTruth(Z=Z, pair_prob=pprob, hyper_tuples=pool[used], hyper_prob=hprob)
    return SplitBundle(
        spec=spec,
        train_pair=train,
        valid_pair=full.subset(va),
        test_pair=full.subset(te),
        train_hyper=_hyper(n, pool[train_idx], y[:a]),
        valid_hyper=_hyper(n, pool[valid_idx], y[a:b]),
        test_hyper=_hyper(n, pool[test_idx], y[b:]),
        test_pair_truth=pprob[te],
        test_hyper_truth=hprob[b:],
        valid_hyper_truth=hprob[a:b],
        truth=truth,
        info={"pool_size": int(len(pool)), "pair_props": tuple(float(p) for p in props)},
    )


def _splits_dependent(spec):
    n = spec.n
    seeds = np.random.SeedSequence(spec.seed).spawn(6)
    rng = np.random.default_rng(seeds[0])
    Z, labels = gen_latent_clustered(n, spec.r, spec.clusters, seeds[1])
    full, pprob = gen_pair_links(Z, seeds[2])
    props = spec.pair_props or (0.4, 0.2, 0.4)
    total = len(full)
    train = sample_observations(full, props[0], spec.rho_obs,
                                int(seeds[3].generate_state(1)[0]))
    keys = full.keys()
    train_mask = np.isin(keys, train.keys())
    rest = rng.permutation(np.flatnonzero(~train_mask))
    n_valid = int(round(props[1] * total))
    va, te = np.sort(rest[:n_valid]), np.sort(rest[n_valid:])

    links = links_matrix(full)
    P = pair_prob_matrix(n, full.i, full.j, pprob)
    observed = adjacency(n, train.i, train.j)
    pool = ordered_cliques(observed, 3)
    n_train = spec.hyper_train_count or 30
    if n_train > len(pool):
        raise GenerationError(f"pool of {len(pool)} tuples cannot supply {n_train} training hyperlinks")
    perm = rng.permutation(len(pool))
    train_t = pool[np.sort(perm[:n_train])]
    valid_cand = pool[_subsample(rng, np.sort(perm[n_train:]), 20 * spec.study3_eval_size)]
    # test tuples: internal pairs not all observed
    cand = sample_tuples(n, 20 * spec.study3_eval_size, rng)
    cand = cand[~all_pairs_in(observed, cand)]

    tuples = np.vstack([train_t, valid_cand, cand])
    y, truth = gen_hyper_dependent(Z, tuples, links, P, spec.rho, seeds[4], c=spec.c,
                                   beta=spec.beta_gen)
    a, b = len(train_t), len(train_t) + len(valid_cand)
    v_idx = _balanced(rng, y[a:b], spec.study3_eval_size // 2)
    t_idx = _balanced(rng, y[b:], spec.study3_eval_size)
    hp = truth.hyper_prob
    truth.pair_prob = pprob
    truth.extra["cluster_labels"] = labels
    info = {
        "rho_obs_measured": estimate_rho_obs(train, n, seed=spec.seed),
        "rho_measured": estimate_link_dependency(Z, tuples[b:], links, P, spec.rho, spec.seed,
                                                 c=spec.c, beta=spec.beta_gen),
        "clamped_share": truth.extra["clamped"],
        "pool_size": int(len(pool)),
    }
    return SplitBundle(
        spec=spec,
        train_pair=train,
        valid_pair=full.subset(va),
        test_pair=full.subset(te),
        train_hyper=_hyper(n, train_t, y[:a]),
        valid_hyper=_hyper(n, valid_cand[v_idx], y[a:b][v_idx]),
        test_hyper=_hyper(n, cand[t_idx], y[b:][t_idx]),
        test_pair_truth=pprob[te],
        test_hyper_truth=hp[b:][t_idx],
        valid_hyper_truth=hp[a:b][v_idx],
        truth=truth,
        info=info,
    )
