"""Graph containers, edge-list I/O and the walk/heat operators built on them.

Nodes are arbitrary string labels interned to dense integer ids in
first-seen order. Every container here is immutable after construction:
the underlying arrays are flagged read-only so they can be shared freely
between threads.
"""

from __future__ import annotations

import gzip
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DanglingNodeError, DomainError, ParseError

NORMALIZATIONS = ("sum-one", "mean-one", "max-one", "raw")
DANGLING_POLICIES = ("uniform", "self-loop", "error")
NODE_PRAGMA = "#!node\t"
SMALL_DENSE = 64


def _freeze_csr(m):
    m = sp.csr_matrix(m, dtype=float)
    m.sum_duplicates()
    m.sort_indices()
    for arr in (m.data, m.indices, m.indptr):
        arr.flags.writeable = False
    return m


def _frozen(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Weighted directed graph stored as a CSR matrix of strengths ``w_ij``.

    Undirected graphs are represented by symmetric edge pairs.
    """

    labels: tuple[str, ...]
    weights: sp.csr_matrix

    def __post_init__(self):
        w = _freeze_csr(self.weights)
        n = len(self.labels)
        if w.shape != (n, n):
            raise DomainError(f"weight matrix shape {w.shape} does not match {n} labels")
        if w.nnz and w.data.min() < 0:
            raise DomainError("edge weights must be non-negative")
        if w.nnz and (w.data == 0).any():
            w = w.copy()
            w.eliminate_zeros()
            w = _freeze_csr(w)
        if len(set(self.labels)) != n:
            raise DomainError("node labels must be unique")
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, edges, labels=None, node_count=None):
        """Build from ``(source, target[, weight])`` id tuples.

        Duplicate pairs are merged by summing their weights.
        """
        edges = list(edges)
        if labels is None:
            if node_count is None:
                node_count = 1 + max((max(e[0], e[1]) for e in edges), default=-1)
            labels = [str(i) for i in range(node_count)]
        n = len(labels)
        rows = np.array([e[0] for e in edges], dtype=np.int64)
        cols = np.array([e[1] for e in edges], dtype=np.int64)
        data = np.array([e[2] if len(e) > 2 else 1.0 for e in edges], dtype=float)
        if len(edges) and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n):
            raise DomainError("edge endpoint out of range")
        if (data < 0).any():
            raise DomainError("edge weights must be non-negative")
        w = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        return cls(tuple(labels), w)

    @classmethod
    def undirected(cls, edges, labels=None, node_count=None):
        """Build a symmetric graph, mirroring every non-loop edge."""
        mirrored = []
        for e in edges:
            mirrored.append(tuple(e))
            if e[0] != e[1]:
                mirrored.append((e[1], e[0], *e[2:]))
        return cls.from_edges(mirrored, labels=labels, node_count=node_count)

    @property
    def node_count(self):
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    @cached_property
    def index(self):
        return {label: i for i, label in enumerate(self.labels)}

    def id_of(self, label):
        try:
            return self.index[str(label)]
        except KeyError:
            raise DomainError(f"unknown node label {label!r}") from None

    @property
    def edges(self):
        w = self.weights.tocoo()
        return [(int(i), int(j), float(x)) for i, j, x in zip(w.row, w.col, w.data)]

    @property
    def edge_count(self):
        return self.weights.nnz

    @cached_property
    def adjacency(self):
        """Unweighted 0/1 adjacency with the same sparsity pattern."""
        a = self.weights.copy()
        a.data = np.ones_like(a.data)
        return _freeze_csr(a)

    @cached_property
    def out_strength(self):
        return _frozen(np.asarray(self.weights.sum(axis=1)).ravel())

    @cached_property
    def in_strength(self):
        return _frozen(np.asarray(self.weights.sum(axis=0)).ravel())

    @cached_property
    def out_degree(self):
        return _frozen(np.diff(self.weights.indptr), np.int64)

    @cached_property
    def in_degree(self):
        return _frozen(np.bincount(self.weights.indices, minlength=self.node_count), np.int64)

    @cached_property
    def is_symmetric(self):
        w = self.weights
        return (abs(w - w.T) > 1e-12 * max(1.0, abs(w).max() if w.nnz else 1.0)).nnz == 0

    def require_undirected(self, what="this measure"):
        if not self.is_symmetric:
            raise DomainError(f"{what} needs an undirected (symmetric) graph")

    @property
    def total_weight(self):
        """Sum of all ``w_ij``; for undirected graphs twice the edge weight total."""
        return float(self.weights.sum())

    def relabel(self, ids):
        return [self.labels[i] for i in ids]


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """User-item graph with optional ratings and timestamps per entry.

    Entries are stored as parallel arrays; a missing rating or timestamp
    is NaN.
    """

    user_labels: tuple[str, ...]
    item_labels: tuple[str, ...]
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray = None
    timestamps: np.ndarray = None

    def __post_init__(self):
        n = len(self.users)
        users = _frozen(self.users, np.int64)
        items = _frozen(self.items, np.int64)
        if len(items) != n:
            raise DomainError("users and items arrays differ in length")
        ratings = np.full(n, np.nan) if self.ratings is None else np.asarray(self.ratings, float)
        stamps = np.full(n, np.nan) if self.timestamps is None else np.asarray(self.timestamps, float)
        if n and (users.min() < 0 or users.max() >= len(self.user_labels)):
            raise DomainError("user id out of range")
        if n and (items.min() < 0 or items.max() >= len(self.item_labels)):
            raise DomainError("item id out of range")
        pairs = users * max(1, len(self.item_labels)) + items
        if len(np.unique(pairs)) != n:
            raise DomainError("duplicate (user, item) entries")
        object.__setattr__(self, "user_labels", tuple(map(str, self.user_labels)))
        object.__setattr__(self, "item_labels", tuple(map(str, self.item_labels)))
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "ratings", _frozen(ratings))
        object.__setattr__(self, "timestamps", _frozen(stamps))

    @classmethod
    def from_entries(cls, entries, user_labels=None, item_labels=None):
        """Build from ``(user, item[, rating[, timestamp]])`` id tuples."""
        entries = list(entries)
        if user_labels is None:
            user_labels = [str(i) for i in range(1 + max((e[0] for e in entries), default=-1))]
        if item_labels is None:
            item_labels = [str(i) for i in range(1 + max((e[1] for e in entries), default=-1))]

        def opt(e, k):
            return float(e[k]) if len(e) > k and e[k] is not None else np.nan

        return cls(
            tuple(user_labels),
            tuple(item_labels),
            np.array([e[0] for e in entries], dtype=np.int64),
            np.array([e[1] for e in entries], dtype=np.int64),
            np.array([opt(e, 2) for e in entries]),
            np.array([opt(e, 3) for e in entries]),
        )

    @property
    def user_count(self):
        return len(self.user_labels)

    @property
    def item_count(self):
        return len(self.item_labels)

    @property
    def entries(self):
        out = []
        for u, i, r, t in zip(self.users, self.items, self.ratings, self.timestamps):
            out.append((int(u), int(i), None if np.isnan(r) else float(r),
                        None if np.isnan(t) else int(t)))
        return out

    @cached_property
    def user_index(self):
        return {label: i for i, label in enumerate(self.user_labels)}

    @cached_property
    def item_index(self):
        return {label: i for i, label in enumerate(self.item_labels)}

    def user_id(self, label):
        try:
            return self.user_index[str(label)]
        except KeyError:
            raise DomainError(f"unknown user {label!r}") from None

    def item_id(self, label):
        try:
            return self.item_index[str(label)]
        except KeyError:
            raise DomainError(f"unknown item {label!r}") from None

    @cached_property
    def adjacency(self):
        """``A_{i alpha}`` as a CSR matrix of shape (users, items)."""
        a = sp.coo_matrix(
            (np.ones(len(self.users)), (self.users, self.items)),
            shape=(self.user_count, self.item_count),
        )
        return _freeze_csr(a)

    @cached_property
    def user_degree(self):
        return _frozen(np.bincount(self.users, minlength=self.user_count), np.int64)

    @cached_property
    def item_degree(self):
        return _frozen(np.bincount(self.items, minlength=self.item_count), np.int64)

    @property
    def has_ratings(self):
        return bool(len(self.ratings)) and not np.isnan(self.ratings).all()

    @cached_property
    def rating_matrix(self):
        """Dense (users, items) ratings with NaN where unrated."""
        r = np.full((self.user_count, self.item_count), np.nan)
        r[self.users, self.items] = self.ratings
        r.flags.writeable = False
        return r

    @cached_property
    def user_mean_rating(self):
        sums = np.bincount(self.users, weights=np.nan_to_num(self.ratings), minlength=self.user_count)
        counts = np.bincount(self.users, weights=~np.isnan(self.ratings), minlength=self.user_count)
        with np.errstate(invalid="ignore", divide="ignore"):
            mu = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        return _frozen(mu)

    def collected(self, user):
        """Sorted item ids collected by ``user``."""
        return np.sort(self.items[self.users == user])

    def subset(self, mask):
        """Entries selected by a boolean mask, keeping all labels."""
        mask = np.asarray(mask, bool)
        return BipartiteGraph(
            self.user_labels, self.item_labels, self.users[mask], self.items[mask],
            self.ratings[mask], self.timestamps[mask],
        )


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic walk matrix with its dangling-node policy recorded.

    Under the ``uniform`` policy the dangling rows (all ``1/N``) are kept
    implicit: ``matrix`` holds only the link part, and :meth:`rmatvec`
    adds the rank-one dangling correction.  Use :meth:`to_sparse` or
    :meth:`toarray` to materialize every row.
    """

    matrix: sp.csr_matrix
    dangling_policy: str = "uniform"
    dangling_rows: frozenset = frozenset()
    labels: tuple[str, ...] = None

    def __post_init__(self):
        if self.dangling_policy not in DANGLING_POLICIES:
            raise DomainError(f"unknown dangling policy {self.dangling_policy!r}")
        m = _freeze_csr(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise DomainError("transition matrix must be square")
        if m.nnz and (m.data.min() < 0 or m.data.max() > 1 + 1e-12):
            raise DomainError("transition probabilities must lie in [0, 1]")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dangling_rows", frozenset(int(i) for i in self.dangling_rows))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(m.shape[0])))
        mask = np.zeros(m.shape[0], bool)
        mask[list(self.dangling_rows)] = True
        mask.flags.writeable = False
        object.__setattr__(self, "_dangling_mask", mask)
        if not np.allclose(self.row_sums(), 1.0, rtol=0, atol=1e-12):
            raise DomainError("transition matrix rows must sum to one")

    @classmethod
    def from_dense(cls, p, labels=None):
        return cls(sp.csr_matrix(np.asarray(p, float)), "uniform", frozenset(), labels)

    @property
    def n(self):
        return self.matrix.shape[0]

    def __len__(self):
        return self.n

    def _implicit_uniform(self):
        return self.dangling_policy == "uniform" and bool(self.dangling_rows)

    def row_sums(self):
        s = np.asarray(self.matrix.sum(axis=1)).ravel()
        if self._implicit_uniform():
            s = s + self._dangling_mask
        return s

    @cached_property
    def _transposed(self):
        # tiny chains are faster as a dense product than through sparse dispatch
        if self.n <= SMALL_DENSE:
            return self.matrix.T.toarray()
        return self.matrix.T.tocsr()

    def rmatvec(self, h):
        """``P^T h`` without materializing dangling rows."""
        out = self._transposed @ h
        if self._implicit_uniform():
            out = out + h[self._dangling_mask].sum() / self.n
        return out

    def matvec(self, x):
        """``P x``."""
        out = self.matrix @ x
        if self._implicit_uniform():
            out = out + self._dangling_mask * (x.sum(axis=0) / self.n)
        return out

    def to_sparse(self):
        """CSR matrix with every row explicit (dense rows for uniform dangling)."""
        if not self._implicit_uniform():
            return self.matrix
        n = self.n
        rows = np.repeat(np.flatnonzero(self._dangling_mask), n)
        cols = np.tile(np.arange(n), len(self.dangling_rows))
        extra = sp.csr_matrix((np.full(len(rows), 1.0 / n), (rows, cols)), shape=(n, n))
        return _freeze_csr(self.matrix + extra)

    def toarray(self):
        return self.to_sparse().toarray()


@dataclass(frozen=True, eq=False)
class HeatOperator:
    """Neighbor-averaging operator ``O_ij = w_ij / s_j`` (columns sum to one).

    One heat step maps temperatures ``x`` to ``O^T x``.
    """

    matrix: sp.csr_matrix
    zero_columns: frozenset = frozenset()

    def step(self, x):
        return self.matrix.T @ np.asarray(x, float)


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Non-negative node scores with a declared normalization."""

    values: np.ndarray
    normalization: str = "raw"
    labels: tuple[str, ...] = None

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise DomainError("scores must be one-dimensional")
        if not np.isfinite(v).all():
            raise DomainError("scores contain NaN or infinite entries")
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(f"unknown normalization {self.normalization!r}")
        if self.normalization != "raw" and len(v):
            stat = {"sum-one": v.sum(), "mean-one": v.mean(), "max-one": v.max()}[self.normalization]
            if abs(stat - 1.0) > 1e-9:
                raise DomainError(f"{self.normalization} normalization violated ({stat!r})")
        if self.labels is not None:
            if len(self.labels) != len(v):
                raise DomainError("labels and values differ in length")
            object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, values, normalization="sum-one", labels=None):
        return cls(normalize(values, normalization), normalization, labels)

    def renormalized(self, normalization):
        return ScoreVector.normalized(self.values, normalization, self.labels)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def ranking(self):
        """Node ids by descending score, ties broken by ascending id."""
        return rank_order(self.values)

    def label_of(self, i):
        return self.labels[i] if self.labels is not None else str(i)

    def as_dict(self):
        return {self.label_of(i): float(x) for i, x in enumerate(self.values)}


def rank_order(values):
    values = np.asarray(values, float)
    return np.lexsort((np.arange(len(values)), -values))


def normalize(values, normalization="sum-one"):
    v = np.asarray(values, dtype=float)
    if normalization == "raw":
        return v.copy()
    if normalization not in NORMALIZATIONS:
        raise DomainError(f"unknown normalization {normalization!r}")
    stat = {"sum-one": v.sum, "mean-one": v.mean, "max-one": v.max}[normalization]()
    if not np.isfinite(stat) or stat == 0:
        raise DomainError(f"cannot apply {normalization} normalization to a zero vector")
    return v / stat


# ---------------------------------------------------------------------------
# edge-list I/O
# ---------------------------------------------------------------------------


def _lines(source):
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    return source


def open_text(path):
    """Open a UTF-8 text file, transparently decompressing gzip."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _parse_weight(text, lineno):
    try:
        w = float(text)
    except ValueError:
        raise ParseError(f"weight {text!r} is not a number", lineno) from None
    if math.isnan(w) or math.isinf(w):
        raise ParseError(f"weight {text!r} is not finite", lineno)
    if w < 0:
        raise DomainError(f"negative weight {w!r}", lineno)
    return w


def parse_directed_graph(source, *, undirected=False):
    """Parse ``source<TAB>target[<TAB>weight]`` lines into a graph.

    ``source`` is the text itself or any iterable of lines.  Lines starting
    with ``#`` are comments, except ``#!node<TAB>label`` which declares a
    node (used by :func:`dump_edge_list` to preserve id order and isolated
    nodes).  Zero-weight edges are dropped; their endpoints are kept.
    """
    index = {}
    labels = []
    rows, cols, data = [], [], []

    def intern(label):
        i = index.get(label)
        if i is None:
            i = index[label] = len(labels)
            labels.append(label)
        return i

    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if line.startswith(NODE_PRAGMA):
            label = line[len(NODE_PRAGMA):].strip()
            if not label:
                raise ParseError("empty node declaration", lineno)
            intern(label)
            continue
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) not in (2, 3) or not fields[0] or not fields[1]:
            raise ParseError(f"expected source<TAB>target[<TAB>weight], got {line!r}", lineno)
        w = _parse_weight(fields[2], lineno) if len(fields) == 3 else 1.0
        s, t = intern(fields[0]), intern(fields[1])
        if w == 0:
            continue
        rows.append(s)
        cols.append(t)
        data.append(w)
        if undirected and s != t:
            rows.append(t)
            cols.append(s)
            data.append(w)
    n = len(labels)
    w = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    return DirectedGraph(tuple(labels), w)


def load_directed_graph(path, *, undirected=False):
    """Read an edge-list file (optionally gzip-compressed)."""
    with open_text(path) as fh:
        return parse_directed_graph(fh, undirected=undirected)


def dump_edge_list(g: DirectedGraph) -> str:
    """Serialize so that :func:`parse_directed_graph` reproduces ``g`` exactly."""
    out = [f"{NODE_PRAGMA}{label}" for label in g.labels]
    for i, j, w in g.edges:
        out.append(f"{g.labels[i]}\t{g.labels[j]}\t{w!r}")
    return "\n".join(out) + "\n"


def parse_bipartite(source):
    """Parse ``user<TAB>item[<TAB>rating[<TAB>timestamp]]`` lines.

    A repeated (user, item) pair keeps the last line and emits a warning.
    """
    users, items = {}, {}
    entries = {}
    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if not 2 <= len(fields) <= 4 or not fields[0] or not fields[1]:
            raise ParseError(f"expected user<TAB>item[<TAB>rating[<TAB>timestamp]], got {line!r}", lineno)
        rating = stamp = None
        if len(fields) >= 3 and fields[2] != "":
            try:
                rating = float(fields[2])
            except ValueError:
                raise ParseError(f"rating {fields[2]!r} is not a number", lineno) from None
            if not math.isfinite(rating):
                raise ParseError(f"rating {fields[2]!r} is not finite", lineno)
        if len(fields) == 4:
            try:
                stamp = int(fields[3])
            except ValueError:
                raise ParseError(f"timestamp {fields[3]!r} is not an integer", lineno) from None
        u = users.setdefault(fields[0], len(users))
        i = items.setdefault(fields[1], len(items))
        if (u, i) in entries:
            warnings.warn(
                f"line {lineno}: duplicate entry ({fields[0]}, {fields[1]}); last one wins",
                stacklevel=2,
            )
            del entries[(u, i)]
        entries[(u, i)] = (u, i, rating, stamp)
    return BipartiteGraph.from_entries(entries.values(), tuple(users), tuple(items))


def load_bipartite(path):
    with open_text(path) as fh:
        return parse_bipartite(fh)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def build_transition(g: DirectedGraph, policy="uniform") -> TransitionMatrix:
    """Row-normalize ``w_ij`` into ``P_ij``, handling zero out-strength rows.

    ``uniform`` sends a dangling node to every node with probability 1/N,
    ``self-loop`` makes it absorbing, ``error`` rejects the graph.
    """
    if g.node_count == 0:
        raise DomainError("graph has no nodes")
    if policy not in DANGLING_POLICIES:
        raise DomainError(f"unknown dangling policy {policy!r}")
    s = g.out_strength
    dangling = np.flatnonzero(s == 0)
    if policy == "error" and len(dangling):
        raise DanglingNodeError(dangling.tolist())
    inv = np.zeros_like(s)
    inv[s > 0] = 1.0 / s[s > 0]
    p = g.weights.copy()
    p.data *= np.repeat(inv, np.diff(p.indptr))
    if policy == "self-loop" and len(dangling):
        p = p + sp.csr_matrix((np.ones(len(dangling)), (dangling, dangling)), shape=p.shape)
    return TransitionMatrix(p, policy, frozenset(dangling.tolist()), g.labels)


def build_heat_operator(g: DirectedGraph) -> HeatOperator:
    s = g.in_strength
    zero = np.flatnonzero(s == 0)
    if len(zero):
        warnings.warn(f"nodes {zero.tolist()} have zero in-strength; their heat columns are zero",
                      stacklevel=2)
    inv = np.zeros_like(s)
    inv[s > 0] = 1.0 / s[s > 0]
    return HeatOperator(_freeze_csr(g.weights @ sp.diags(inv)), frozenset(zero.tolist()))


def add_ground_node(g: DirectedGraph, label="ground") -> DirectedGraph:
    """Append a node linked to and from every original node with unit weight."""
    n = g.node_count
    while label in g.index:
        label = "_" + label
    idx = np.arange(n)
    extra = sp.csr_matrix(
        (np.ones(2 * n), (np.r_[idx, np.full(n, n)], np.r_[np.full(n, n), idx])),
        shape=(n + 1, n + 1),
    )
    w = sp.bmat([[g.weights, None], [None, sp.csr_matrix((1, 1))]], format="csr") + extra
    return DirectedGraph(g.labels + (label,), w)
