import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperembed.augment import (
    CandidatePools,
    augment_and_refit,
    build_candidate_pools,
    embed_observed,
    select_augmented,
    tune_delta,
)
from hyperembed.graph import all_pairs, tuple_keys
from hyperembed.model import HyperObservations, ModelConfig, PairObservations, hyper_prob, sigmoid
from hyperembed.optim import fit_variant


def triangle(labels):
    return PairObservations.from_records(3, [(0, 1, labels[0]), (0, 2, labels[1]), (1, 2, labels[2])])


def test_pool_examples():
    pools = build_candidate_pools(triangle((1, 1, 1)))
    assert pools.clique.tolist() == [[0, 1, 2]] and len(pools.non_clique) == 0
    pools = build_candidate_pools(triangle((0, 0, 0)))
    assert pools.non_clique.tolist() == [[0, 1, 2]] and len(pools.clique) == 0
    pools = build_candidate_pools(triangle((1, 0, 1)))
    assert len(pools) == 0
    seen = HyperObservations.from_records(3, 3, [((0, 1, 2), 1)])
    assert len(build_candidate_pools(triangle((1, 1, 1)), seen)) == 0
    with pytest.raises(ValueError):
        build_candidate_pools(PairObservations.empty(3))


def random_network(seed, n=14, observed=0.7, p_link=0.5):
    rng = np.random.default_rng(seed)
    i, j = all_pairs(n)
    keep = rng.uniform(size=len(i)) < observed
    pairs = PairObservations(n, i[keep], j[keep], (rng.uniform(size=keep.sum()) < p_link).astype(int))
    return pairs, rng


def all_internal_constant(pairs, tuples, label):
    lookup = {(a, b): y for a, b, y in pairs.records()}
    for t in tuples.tolist():
        for a, b in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
            if lookup.get((a, b)) != label:
                return False
    return True


@given(st.integers(0, 10_000))
def test_pool_invariants(seed):
    pairs, rng = random_network(seed)
    hyper = HyperObservations(pairs.n, 3, np.array([[0, 1, 2], [3, 4, 5]]), [1, 0])
    pools = build_candidate_pools(pairs, hyper)
    assert all_internal_constant(pairs, pools.clique, 1)
    assert all_internal_constant(pairs, pools.non_clique, 0)
    c, nc = set(tuple_keys(pools.clique, 14).tolist()), set(tuple_keys(pools.non_clique, 14).tolist())
    h = set(tuple_keys(hyper.tuples, 14).tolist())
    assert not (c & nc) and not (c & h) and not (nc & h)


def test_pool_cap_is_seeded_subsample():
    pairs, _ = random_network(1, n=20, observed=1.0)
    full = build_candidate_pools(pairs, cap_per_class=None)
    capped = build_candidate_pools(pairs, cap_per_class=10, seed=3)
    assert len(capped.clique) == min(10, len(full.clique))
    assert set(tuple_keys(capped.clique, 20).tolist()) <= set(tuple_keys(full.clique, 20).tolist())
    again = build_candidate_pools(pairs, cap_per_class=10, seed=3)
    np.testing.assert_array_equal(capped.clique, again.clique)


def scored_pools(scores_clique, scores_non):
    """Pools whose tuples score exactly the requested values under Z with beta=1.

    Rows (z, z, z) with z >= 0 give logit 3 z^2 + z^3; rows (a, a, -a) with
    a > 0 give -a^2 - a^3 (one positive pair, two negative, mixed signs).
    Every tuple uses its own three nodes.
    """
    from scipy.optimize import brentq

    def rows_for(p):
        target = np.log(p / (1 - p))
        if target >= 0:
            z = brentq(lambda z: 3 * z * z + z ** 3 - target, 0, 30)
            return [[z], [z], [z]]
        a = brentq(lambda a: a * a + a ** 3 + target, 0, 30)
        return [[a], [a], [-a]]

    rows, clique, non = [], [], []
    for scores, out in ((scores_clique, clique), (scores_non, non)):
        for p in scores:
            base = len(rows)
            rows.extend(rows_for(p))
            out.append([base, base + 1, base + 2])
    Z = np.array(rows, dtype=float)
    pools = CandidatePools(len(Z), 3, np.array(clique, dtype=np.int64).reshape(-1, 3),
                           np.array(non, dtype=np.int64).reshape(-1, 3))
    return Z, pools


def test_selection_examples():
    Z, pools = scored_pools([0.99, 0.6], [0.05, 0.4])
    np.testing.assert_allclose([hyper_prob(Z[t], 1.0) for t in pools.clique], [0.99, 0.6], atol=1e-9)
    np.testing.assert_allclose([hyper_prob(Z[t], 1.0) for t in pools.non_clique], [0.05, 0.4], atol=1e-9)
    chosen = select_augmented(Z, pools, 1.0, 0.1)
    assert chosen.tuples.tolist() == [pools.clique[0].tolist(), pools.non_clique[0].tolist()]
    assert chosen.y.tolist() == [1, 0]
    assert chosen.source.tolist() == ["clique", "nonClique"]
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            select_augmented(Z, pools, 1.0, bad)


@given(st.integers(0, 10_000), st.floats(0.01, 0.49), st.floats(0.01, 0.49))
def test_selection_monotone_and_consistent(seed, d1, d2):
    d1, d2 = sorted((d1, d2))
    pairs, rng = random_network(seed, n=12, observed=1.0)
    pools = build_candidate_pools(pairs)
    Z = rng.normal(scale=0.8, size=(12, 2))
    a = select_augmented(Z, pools, 2.0, d1)
    b = select_augmented(Z, pools, 2.0, d2)
    assert a.keys() <= b.keys()
    for res, d in ((a, d1), (b, d2)):
        for y, src, score in zip(res.y, res.source, res.score):
            assert (y == 1 and src == "clique" and score >= 1 - d) or \
                (y == 0 and src == "nonClique" and score <= d)
        assert np.all((res.score > 0) & (res.score < 1))


@pytest.fixture(scope="module")
def augment_data():
    rng = np.random.default_rng(2)
    n = 18
    Zt = rng.normal(scale=1.0, size=(n, 2))
    i, j = all_pairs(n)
    y = (rng.uniform(size=len(i)) < sigmoid(np.einsum("ek,ek->e", Zt[i], Zt[j]))).astype(int)
    order = rng.permutation(len(i))
    tr, va = np.sort(order[:110]), np.sort(order[110:])
    train = PairObservations(n, i[tr], j[tr], y[tr])
    valid = PairObservations(n, i[va], j[va], y[va])
    hyper = HyperObservations(n, 3, np.array([[0, 1, 2], [3, 4, 5], [6, 7, 8]]), [1, 0, 1])
    cfg = ModelConfig(r=2, beta=2.0, lam=1e-3).with_(max_iter=300)
    return train, valid, hyper, cfg


def test_embed_observed_forces_zero_lambda(augment_data):
    train, _, hyper, cfg = augment_data
    Z1, r1 = embed_observed(train, hyper, cfg.with_(lam=0.5))
    Z0, r0 = fit_variant("JLE", train, hyper, cfg.with_(lam=0.0))
    np.testing.assert_array_equal(Z1, Z0)
    Zp, _ = embed_observed(train, None, cfg)
    Zq, _ = fit_variant("PLE", train, None, cfg.with_(lam=0.0))
    np.testing.assert_array_equal(Zp, Zq)
    with pytest.raises(ValueError):
        embed_observed(None, hyper, cfg)


def test_empty_augmentation_is_plain_jle(augment_data):
    train, _, hyper, cfg = augment_data
    # a cutoff this strict keeps nothing
    Z, extra, report = augment_and_refit(train, hyper, cfg, 1e-300)
    assert len(extra) == 0
    Zj, rj = fit_variant("JLE", train, hyper, cfg)
    np.testing.assert_array_equal(Z, Zj)
    assert report.losses == rj.losses


def test_augment_and_refit_uses_augmented_set(augment_data):
    train, _, hyper, cfg = augment_data
    Z, extra, report = augment_and_refit(train, hyper, cfg, 0.3)
    assert len(extra) > 0
    assert not extra.keys() & set(tuple_keys(hyper.tuples, train.n).tolist())
    assert all_internal_constant(train, extra.tuples[extra.y == 1], 1)
    assert all_internal_constant(train, extra.tuples[extra.y == 0], 0)
    np.testing.assert_array_equal(extra.as_observations().w, 1.0)
    # refit objective includes the augmented tuples
    from hyperembed.model import loss_joint
    assert report.losses[-1] == pytest.approx(
        loss_joint(Z, train, hyper.concat(extra.as_observations()), cfg), abs=1e-10)


def test_tune_delta(augment_data):
    train, valid, hyper, cfg = augment_data
    best, table = tune_delta([0.2], train, hyper, valid, None, cfg)
    assert best == 0.2 and list(table) == [0.2]
    best, table = tune_delta([0.05, 0.2, 0.3], train, hyper, valid, None, cfg)
    assert all(table[best] >= v for v in table.values())
    top = max(table.values())
    assert best == max(d for d, v in table.items() if v == top)


def test_tune_delta_rejects_before_fitting(augment_data, monkeypatch):
    train, valid, hyper, cfg = augment_data
    import hyperembed.augment as augment

    def boom(*args, **kwargs):
        raise AssertionError("fit ran before validation")

    monkeypatch.setattr(augment, "fit_variant", boom)
    with pytest.raises(ValueError):
        tune_delta([0.1, 0.5], train, hyper, valid, None, cfg)
