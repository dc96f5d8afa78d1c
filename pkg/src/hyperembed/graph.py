"""Small graph utilities: pair indexing, clique enumeration, tuple sampling."""
from __future__ import annotations

from itertools import combinations

import numpy as np

__all__ = [
    "all_pairs",
    "adjacency",
    "ordered_cliques",
    "tuple_keys",
    "all_pairs_in",
    "clique_indicator",
    "sample_tuples",
]


def all_pairs(n):
    """Index arrays ``(i, j)`` of every pair ``i < j`` in row-major order."""
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64), j.astype(np.int64)


def adjacency(n, i, j, mask=None):
    """Symmetric boolean adjacency over the given pairs (optionally masked)."""
    A = np.zeros((n, n), dtype=bool)
    if mask is not None:
        i, j = i[mask], j[mask]
    A[i, j] = True
    A[j, i] = True
    return A


def ordered_cliques(A, m):
    """All m-cliques of adjacency ``A`` as sorted rows, in lexicographic order.

    Grows cliques one node at a time by intersecting neighbourhoods and only
    extending with larger indices, so each clique is produced once. For m=3
    this is the common-neighbour intersection over edges.
    """
    n = len(A)
    if m < 2:
        raise ValueError("m must be at least 2")
    upper = np.triu(A, k=1)
    out = []

    def grow(prefix, cand):
        if len(prefix) == m - 1:
            block = np.empty((len(cand), m), dtype=np.int64)
            block[:, :-1] = prefix
            block[:, -1] = cand
            out.append(block)
            return
        for v in cand:
            nxt = cand[(cand > v) & A[v, cand]]
            if len(nxt) >= m - len(prefix) - 1:
                grow(prefix + [v], nxt)

    for v in range(n):
        cand = np.flatnonzero(upper[v])
        if len(cand) >= m - 1:
            grow([v], cand)
    if not out:
        return np.empty((0, m), dtype=np.int64)
    return np.concatenate(out)


def tuple_keys(tuples, n):
    """Unique integer key per sorted tuple (mixed-radix in base n)."""
    tuples = np.asarray(tuples, dtype=np.int64)
    keys = np.zeros(len(tuples), dtype=np.int64)
    for col in range(tuples.shape[1]):
        keys = keys * n + tuples[:, col]
    return keys


def all_pairs_in(A, tuples):
    """True where every internal pair of the tuple is set in ``A``."""
    tuples = np.asarray(tuples)
    ok = np.ones(len(tuples), dtype=bool)
    for a, b in combinations(range(tuples.shape[1]), 2):
        ok &= A[tuples[:, a], tuples[:, b]]
    return ok


def clique_indicator(links, tuples):
    """1 where all internal pairs are linked in the boolean matrix ``links``."""
    return all_pairs_in(links, tuples).astype(np.int8)


def sample_tuples(n, count, rng, m=3, exclude=None):
    """Draw ``count`` distinct sorted m-tuples uniformly, avoiding ``exclude`` keys."""
    from math import comb

    excluded = set() if exclude is None else set(np.asarray(exclude).tolist())
    if count > comb(n, m) - len(excluded):
        raise ValueError("not enough tuples to sample from")
    seen = set(excluded)
    rows = []
    while len(rows) < count:
        need = count - len(rows)
        draw = np.sort(rng.integers(0, n, size=(2 * need + 16, m)), axis=1)
        draw = draw[np.all(np.diff(draw, axis=1) > 0, axis=1)]
        for key, row in zip(tuple_keys(draw, n).tolist(), draw):
            if key not in seen:
                seen.add(key)
                rows.append(row)
                if len(rows) == count:
                    break
    return np.asarray(rows, dtype=np.int64).reshape(-1, m)
