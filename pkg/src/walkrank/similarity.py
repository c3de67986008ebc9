"""Random-walk node similarities: commute time, local and superposed
random walk, the regularized (resolvent) transform, and the Pearson and
cosine baselines used by collaborative filtering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConnectivityError, DomainError, SizeError
from .graph import BipartiteGraph, DirectedGraph, TransitionMatrix

KINDS = ("commute-time", "ectd", "lrw", "srw", "regularized", "pearson", "cosine")
DENSE_LIMIT = 10_000


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    values: np.ndarray
    kind: str
    labels: tuple[str, ...] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown similarity kind {self.kind!r}")
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DomainError("similarity matrix must be square")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def is_distance(self):
        """Commute time and ECTD grow with dissimilarity."""
        return self.kind in ("commute-time", "ectd")

    def most_similar(self, i, k=10):
        """Top ``k`` other nodes for node ``i``: nearest first for distances,
        highest similarity first otherwise; ties by ascending id."""
        row = self.values[i]
        key = row if self.is_distance else -row
        ids = np.lexsort((np.arange(len(row)), key))
        ids = ids[ids != i]
        return [(int(j), float(row[j])) for j in ids[:k]]


def _guard(n):
    if n > DENSE_LIMIT:
        raise SizeError(f"{n} nodes exceeds the dense similarity limit {DENSE_LIMIT}")


def _require_connected(g):
    if g.node_count == 0:
        raise DomainError("graph has no nodes")
    n_comp, comp = connected_components(g.weights, directed=False)
    if n_comp > 1:
        stray = np.flatnonzero(comp != comp[0]).tolist()
        raise ConnectivityError("graph is not connected", stray)


def laplacian_pseudoinverse(g: DirectedGraph) -> np.ndarray:
    """Moore-Penrose pseudoinverse of ``L = D - W`` via the rank-one shift
    ``L+ = (L - J/N)^{-1} + J/N`` with ``J`` the all-ones matrix."""
    g.require_undirected("the Laplacian pseudoinverse")
    _require_connected(g)
    n = g.node_count
    _guard(n)
    lap = np.diag(g.out_strength) - g.weights.toarray()
    j = np.full((n, n), 1.0 / n)
    lp = np.linalg.solve(lap - j, np.eye(n)) + j
    return 0.5 * (lp + lp.T)


def commute_time(g: DirectedGraph, pinv=None) -> SimilarityMatrix:
    """Expected round-trip time ``C(i,j) = 2E (l+_ii + l+_jj - 2 l+_ij)``,
    with ``E`` the total (undirected) edge weight."""
    lp = laplacian_pseudoinverse(g) if pinv is None else np.asarray(pinv, float)
    d = np.diag(lp)
    c = g.total_weight * (d[:, None] + d[None, :] - 2.0 * lp)
    c = np.maximum(0.5 * (c + c.T), 0.0)
    np.fill_diagonal(c, 0.0)
    return SimilarityMatrix(c, "commute-time", g.labels)


def ectd(g: DirectedGraph, pinv=None) -> SimilarityMatrix:
    """Euclidean commute-time distance, the square root of :func:`commute_time`."""
    return SimilarityMatrix(np.sqrt(commute_time(g, pinv).values), "ectd", g.labels)


def _walk_powers(g, t):
    """Yield ``pi(theta)`` for theta = 1..t, where ``pi[i, j]`` is the
    probability of a walk from ``i`` sitting at ``j`` after theta steps."""
    g.require_undirected("random-walk similarity")
    n = g.node_count
    _guard(n)
    k = g.out_strength
    if (k == 0).any():
        raise DomainError("random-walk similarity needs every node to have an edge")
    pt = (sp.diags(1.0 / k) @ g.weights).T.tocsr()
    # column i of pi_t is the distribution after theta steps from e_i
    cols = np.eye(n)
    for _ in range(t):
        cols = pt @ cols
        yield cols.T


def lrw_similarity(g: DirectedGraph, t=3) -> SimilarityMatrix:
    """Local random walk: ``(k_i pi_ij(t) + k_j pi_ji(t)) / 2E``."""
    if t < 1:
        raise DomainError("t must be at least 1")
    k = g.out_strength
    scale = g.total_weight
    pi = None
    for pi in _walk_powers(g, t):
        continue
    s = k[:, None] * pi
    return SimilarityMatrix((s + s.T) / scale, "lrw", g.labels)


def srw_similarity(g: DirectedGraph, t=3) -> SimilarityMatrix:
    """Superposed random walk: local random walk similarity summed over 1..t."""
    if t < 1:
        raise DomainError("t must be at least 1")
    k = g.out_strength
    scale = g.total_weight
    acc = np.zeros((g.node_count, g.node_count))
    for pi in _walk_powers(g, t):
        s = k[:, None] * pi
        acc += (s + s.T) / scale
    return SimilarityMatrix(acc, "srw", g.labels)


def _row_stochastic(x):
    if isinstance(x, TransitionMatrix):
        return x.toarray(), x.labels
    labels = None
    if isinstance(x, SimilarityMatrix):
        x, labels = x.values, x.labels
    a = np.array(x, dtype=float)
    if (a < 0).any():
        raise DomainError("regularization needs non-negative similarities")
    rows = a.sum(axis=1)
    n = a.shape[0]
    out = np.where(rows[:, None] > 0, a / np.where(rows > 0, rows, 1.0)[:, None], 1.0 / n)
    return out, labels


def regularized_similarity(s, alpha=0.5) -> SimilarityMatrix:
    """``P (I - alpha P)^{-1} = sum_k alpha^(k-1) P^k`` of the row-normalized
    input.  Rows with no similarity mass become uniform jumps.  The result
    links pairs that share no direct similarity; ``1/alpha`` sets how many
    steps similarity travels."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    p, labels = _row_stochastic(s)
    _guard(len(p))
    r = np.linalg.solve(np.eye(len(p)) - alpha * p, p)
    return SimilarityMatrix(np.maximum(r, 0.0), "regularized", labels)


def pearson_similarity(b: BipartiteGraph, axis="user", min_support=2) -> SimilarityMatrix:
    """Pearson correlation over co-rated support (means taken on that support).

    Pairs with fewer than ``min_support`` co-rated entries, or with zero
    variance on the support, get 0.  The diagonal is 1 where defined.
    """
    if axis not in ("user", "item"):
        raise DomainError("axis must be 'user' or 'item'")
    r = b.rating_matrix if axis == "user" else b.rating_matrix.T
    labels = b.user_labels if axis == "user" else b.item_labels
    _guard(r.shape[0])
    mask = ~np.isnan(r)
    x = np.where(mask, r, 0.0)
    m = mask.astype(float)
    support = m @ m.T
    sx = x @ m.T          # sum of i's ratings over the (i, j) support
    sxx = (x * x) @ m.T
    sxy = x @ x.T
    with np.errstate(invalid="ignore", divide="ignore"):
        n = np.maximum(support, 1.0)
        cov = sxy - sx * sx.T / n
        var_i = sxx - sx * sx / n
        var_j = var_i.T
        denom = np.sqrt(np.maximum(var_i, 0.0) * np.maximum(var_j, 0.0))
        rho = np.where((support >= min_support) & (denom > 1e-12), cov / denom, 0.0)
    return SimilarityMatrix(np.clip(rho, -1.0, 1.0), "pearson", labels)


def cosine_similarity(b: BipartiteGraph, axis="user", min_support=1) -> SimilarityMatrix:
    """``|common| / sqrt(k_i k_j)`` on the binary collection matrix."""
    if axis not in ("user", "item"):
        raise DomainError("axis must be 'user' or 'item'")
    a = b.adjacency if axis == "user" else b.adjacency.T.tocsr()
    labels = b.user_labels if axis == "user" else b.item_labels
    _guard(a.shape[0])
    common = (a @ a.T).toarray()
    k = np.asarray(a.sum(axis=1)).ravel()
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(np.outer(k, k) > 0, common / np.sqrt(np.outer(k, k)), 0.0)
    s[common < min_support] = 0.0
    return SimilarityMatrix(s, "cosine", labels)
