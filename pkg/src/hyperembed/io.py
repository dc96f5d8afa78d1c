"""Text formats for pairs, hyperlinks, circles, fitted models and reports.

Every loader rejects invalid input with a :class:`ParseError` that names the
file and line; nothing is silently repaired.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .graph import tuple_keys
from .model import HyperObservations, ModelConfig, PairObservations

__all__ = [
    "ParseError",
    "CirclesData",
    "load_pairs",
    "save_pairs",
    "load_hyper",
    "save_hyper",
    "load_circles",
    "load_edges",
    "edges_to_pairs",
    "circles_to_hyperlinks",
    "save_model",
    "load_model",
    "save_report",
    "load_truth",
    "save_truth",
]


class ParseError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _lines(path):
    """Yield ``(line_number, text)`` for non-blank, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            text = raw.rstrip("\r\n")
            if not text.strip() or text.lstrip().startswith("#"):
                continue
            yield no, text


def _header(path, lines, keys):
    try:
        no, text = next(lines)
    except StopIteration:
        raise ParseError(path, 0, "empty file, expected a header") from None
    found = dict(tok.split("=", 1) for tok in text.split() if "=" in tok)
    values = {}
    for key in keys:
        if key not in found:
            raise ParseError(path, no, f"header must define {key}=")
        try:
            values[key] = int(found[key])
        except ValueError:
            raise ParseError(path, no, f"{key} must be an integer") from None
    return values


def _int(path, no, token, what):
    try:
        return int(token)
    except ValueError:
        raise ParseError(path, no, f"{what} {token!r} is not an integer") from None


def _label(path, no, token):
    y = _int(path, no, token, "label")
    if y not in (0, 1):
        raise ParseError(path, no, f"label must be 0 or 1, got {y}")
    return y


# --- pairs ------------------------------------------------------------------

def load_pairs(path):
    lines = _lines(path)
    n = _header(path, lines, ["n"])["n"]
    if n < 1:
        raise ParseError(path, 1, "n must be positive")
    rows, seen = [], set()
    for no, text in lines:
        parts = text.split("\t")
        if len(parts) != 3:
            raise ParseError(path, no, "expected i<TAB>j<TAB>y")
        i, j = (_int(path, no, t, "node") for t in parts[:2])
        y = _label(path, no, parts[2])
        if i == j:
            raise ParseError(path, no, "self-loop")
        i, j = min(i, j), max(i, j)
        if i < 0 or j >= n:
            raise ParseError(path, no, f"node index outside [0, {n})")
        if (i, j) in seen:
            raise ParseError(path, no, f"duplicate pair ({i}, {j})")
        seen.add((i, j))
        rows.append((i, j, y))
    return PairObservations.from_records(n, rows)


def save_pairs(path, obs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n={obs.n}\n")
        for i, j, y in obs.records():
            fh.write(f"{i}\t{j}\t{y}\n")


# --- hyperlinks -------------------------------------------------------------

def load_hyper(path):
    lines = _lines(path)
    head = _header(path, lines, ["n", "m"])
    n, m = head["n"], head["m"]
    if m < 2:
        raise ParseError(path, 1, "m must be at least 2")
    tuples, ys, ws, seen = [], [], [], set()
    for no, text in lines:
        parts = text.split("\t")
        if len(parts) not in (2, 3):
            raise ParseError(path, no, "expected nodes<TAB>y[<TAB>w]")
        nodes = sorted(_int(path, no, t, "node") for t in parts[0].split())
        if len(nodes) != m:
            raise ParseError(path, no, f"expected {m} nodes, got {len(nodes)}")
        if len(set(nodes)) != m:
            raise ParseError(path, no, "repeated node inside a tuple")
        if nodes[0] < 0 or nodes[-1] >= n:
            raise ParseError(path, no, f"node index outside [0, {n})")
        if tuple(nodes) in seen:
            raise ParseError(path, no, f"duplicate tuple {tuple(nodes)}")
        seen.add(tuple(nodes))
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise ParseError(path, no, f"weight {parts[2]!r} is not a number") from None
            if not (w > 0 and math.isfinite(w)):
                raise ParseError(path, no, "weight must be positive and finite")
        tuples.append(nodes)
        ys.append(_label(path, no, parts[1]))
        ws.append(w)
    if not tuples:
        return HyperObservations.empty(n, m)
    return HyperObservations(n, m, np.array(tuples), ys, ws)


def save_hyper(path, obs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n={obs.n} m={obs.m}\n")
        for nodes, y, w in obs.records():
            fh.write(" ".join(map(str, nodes)) + f"\t{y}\t{w!r}\n")


# --- ground-truth probabilities ----------------------------------------------

def save_truth(path, values):
    """One probability per line, aligned with the rows of a test file."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(values, dtype=float):
            fh.write(f"{v:.17g}\n")


def load_truth(path):
    out = []
    for no, text in _lines(path):
        try:
            out.append(float(text))
        except ValueError:
            raise ParseError(path, no, f"{text!r} is not a number") from None
    return np.array(out)


# --- circles ----------------------------------------------------------------

@dataclass
class CirclesData:
    n: int
    names: list
    members: list                               # list of sorted int arrays
    id_map: dict = field(default_factory=dict)  # raw id -> dense index

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("circle names must be unique")
        for name, mem in zip(self.names, self.members):
            if len(mem) == 0:
                raise ValueError(f"circle {name!r} is empty")
            if np.max(mem) >= self.n or np.min(mem) < 0:
                raise ValueError(f"circle {name!r} has members outside [0, n)")

    def drop_largest(self):
        """Copy without the largest circle (first one on ties)."""
        k = int(np.argmax([len(m) for m in self.members]))
        keep = [i for i in range(len(self.names)) if i != k]
        return CirclesData(self.n, [self.names[i] for i in keep],
                           [self.members[i] for i in keep], dict(self.id_map))


def load_circles(path, n=None, id_map=None):
    """Parse ``name<TAB>id id ...`` lines, remapping raw ids to dense indices.

    ``id_map`` extends an existing mapping (for example the one used for the
    ego network's edges); new ids are appended in order of appearance.
    """
    id_map = dict(id_map or {})
    names, members = [], []
    for no, text in _lines(path):
        parts = re.split(r"\s+", text.strip())
        name, raw = parts[0], parts[1:]
        if not raw:
            raise ParseError(path, no, f"circle {name!r} is empty")
        if name in names:
            raise ParseError(path, no, f"duplicate circle name {name!r}")
        idx = []
        for tok in raw:
            if tok not in id_map:
                id_map[tok] = len(id_map)
            idx.append(id_map[tok])
        names.append(name)
        members.append(np.unique(np.array(idx, dtype=np.int64)))
    total = len(id_map) if n is None else n
    if total < len(id_map):
        raise ParseError(path, 0, f"n={total} is smaller than the {len(id_map)} ids seen")
    return CirclesData(total, names, members, id_map)


def _in_some_circle(circles, tuples):
    hit = np.zeros(len(tuples), dtype=bool)
    for mem in circles.members:
        if len(mem) >= tuples.shape[1]:
            hit |= np.isin(tuples, mem).all(axis=1)
    return hit.astype(np.int8)


def circles_to_hyperlinks(circles, sample_size=0, balance=False, seed=0, m=3, nodes=None):
    """Label m-tuples 1 if some circle contains all of them, else 0.

    ``sample_size=0`` enumerates every tuple over ``nodes`` (default: all
    nodes). Otherwise tuples are drawn uniformly; with ``balance`` half of the
    sample is positive, drawn from within circles, and negatives are found by
    rejection sampling capped at 100 draws per requested tuple.
    """
    from .graph import sample_tuples

    rng = np.random.default_rng(seed)
    universe = np.arange(circles.n) if nodes is None else np.unique(np.asarray(nodes))
    if sample_size == 0:
        tuples = np.array(list(combinations(universe.tolist(), m)), dtype=np.int64).reshape(-1, m)
        y = _in_some_circle(circles, tuples)
        return HyperObservations(circles.n, m, tuples, y)
    if sample_size < 0:
        raise ValueError("sample_size must be >= 0")
    if not balance:
        local = sample_tuples(len(universe), sample_size, rng, m=m)
        tuples = np.sort(universe[local], axis=1)
        y = _in_some_circle(circles, tuples)
        return HyperObservations(circles.n, m, tuples, y)

    from .simgen import GenerationError

    n_pos = sample_size // 2
    n_neg = sample_size - n_pos
    pos_keys, neg_keys = {}, {}
    big = [mem for mem in circles.members if len(mem) >= m]
    if n_pos and not big:
        raise GenerationError("no circle is large enough to supply positive tuples")
    sizes = np.array([math.comb(len(mem), m) for mem in big], dtype=float)
    budget = 100 * sample_size
    draws = 0
    while (len(pos_keys) < n_pos or len(neg_keys) < n_neg) and draws < budget:
        draws += 1
        if len(pos_keys) < n_pos:
            mem = big[rng.choice(len(big), p=sizes / sizes.sum())]
            t = np.sort(rng.choice(mem, size=m, replace=False))
            key = int(tuple_keys(t[None, :], circles.n)[0])
            pos_keys.setdefault(key, t)
        if len(neg_keys) < n_neg:
            t = np.sort(rng.choice(universe, size=m, replace=False))
            if not _in_some_circle(circles, t[None, :])[0]:
                key = int(tuple_keys(t[None, :], circles.n)[0])
                neg_keys.setdefault(key, t)
    if len(pos_keys) < n_pos or len(neg_keys) < n_neg:
        raise GenerationError(
            f"balanced sample of {sample_size} not reached within {budget} draws "
            f"({len(pos_keys)} positive, {len(neg_keys)} negative)")
    keys = sorted(list(pos_keys) + list(neg_keys))
    table = {**pos_keys, **neg_keys}
    tuples = np.array([table[k] for k in keys], dtype=np.int64)
    y = np.array([1 if k in pos_keys else 0 for k in keys], dtype=np.int8)
    return HyperObservations(circles.n, m, tuples, y)


def load_edges(path, id_map=None):
    """Whitespace-separated ``a b`` raw-id edge list (ego-network convention).

    Returns ``(edges, id_map)`` with ``edges`` an ``(k, 2)`` array of dense
    indices, each row sorted, duplicates and self-loops dropped.
    """
    id_map = dict(id_map or {})
    rows = []
    for no, text in _lines(path):
        parts = text.split()
        if len(parts) != 2:
            raise ParseError(path, no, "expected two node ids")
        idx = []
        for tok in parts:
            if tok not in id_map:
                id_map[tok] = len(id_map)
            idx.append(id_map[tok])
        if idx[0] != idx[1]:
            rows.append(sorted(idx))
    edges = np.unique(np.array(rows, dtype=np.int64).reshape(-1, 2), axis=0)
    return edges, id_map


def edges_to_pairs(n, edges):
    """Fully observed pair set: listed edges are links, every other pair is not."""
    from .graph import all_pairs

    i, j = all_pairs(n)
    y = np.zeros(len(i), dtype=np.int8)
    linked = set((edges[:, 0] * n + edges[:, 1]).tolist())
    y[np.isin(i * n + j, list(linked))] = 1
    return PairObservations(n, i, j, y)


# --- models -----------------------------------------------------------------

_MODEL_KEYS = ("n", "r", "beta", "lambda", "cap")


def save_model(path, Z, config, m=None):
    """Header lines then one row of 17-significant-digit values per node.

    Optional trailing header lines record a non-default concordance and the
    hyperlink order the model was trained on.
    """
    Z = np.asarray(Z, dtype=float)
    n, r = Z.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n={n}\nr={r}\nbeta={config.beta!r}\nlambda={config.lam!r}\ncap={config.cap!r}\n")
        if config.concordance != "signed":
            fh.write(f"concordance={config.concordance}\n")
        if m is not None:
            fh.write(f"m={int(m)}\n")
        for row in Z:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_model(path, with_meta=False):
    """Return ``(Z, ModelConfig)``, plus a dict of optional headers with ``with_meta``."""
    head, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        lines = [(no, raw.strip()) for no, raw in enumerate(fh, start=1)]
    body = [(no, t) for no, t in lines if t and not t.startswith("#")]
    k = 0
    while k < len(body) and "=" in body[k][1]:
        key, _, value = body[k][1].partition("=")
        head[key.strip()] = (body[k][0], value.strip())
        k += 1
    for key in _MODEL_KEYS:
        if key not in head:
            raise ParseError(path, body[k][0] if k < len(body) else 0, f"missing header {key}=")
    try:
        n, r = int(head["n"][1]), int(head["r"][1])
        beta, lam, cap = (float(head[key][1]) for key in ("beta", "lambda", "cap"))
    except ValueError as exc:
        raise ParseError(path, 0, f"bad header value: {exc}") from None
    concordance = head.get("concordance", (0, "signed"))[1]
    for row_no, (no, text) in enumerate(body[k:], start=1):
        parts = text.split()
        if len(parts) != r:
            raise ParseError(path, no, f"row {row_no} has {len(parts)} values, header says r={r}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ParseError(path, no, f"row {row_no} has a non-numeric value") from None
    if len(rows) != n:
        last = body[-1][0] if body else 0
        raise ParseError(path, last, f"expected {n} rows, found {len(rows)} (row {len(rows) + 1} missing)")
    try:
        config = ModelConfig(r=r, beta=beta, lam=lam, cap=cap, concordance=concordance)
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None
    Z = np.array(rows, dtype=float).reshape(n, r)
    if not with_meta:
        return Z, config
    meta = {}
    if "m" in head:
        meta["m"] = int(head["m"][1])
    return Z, config, meta


# --- reports ----------------------------------------------------------------

def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def save_report(path, report):
    """CSV ``set,auc,count,mse`` sorted by set name; blank cells for missing values."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["set", "auc", "count", "mse"])
        for name in sorted(report.count):
            out.writerow([name, _fmt(report.auc.get(name)), report.count[name],
                          _fmt(report.mse.get(name))])


def load_report(path):
    from .metrics import EvalReport

    report = EvalReport()
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            name = row["set"]
            report.count[name] = int(row["count"])
            report.auc[name] = float(row["auc"]) if row["auc"] else float("nan")
            if row["mse"]:
                report.mse[name] = float(row["mse"])
    return report


def ensure_dir(path):
    Path(path).mkdir(parents=True, exist_ok=True)
    return Path(path)
