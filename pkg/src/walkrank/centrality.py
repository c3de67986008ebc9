"""Node centralities normalized to mean one: degree, shortest-path
betweenness, random-walk (current-flow) betweenness and second-order
centrality."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConnectivityError, DomainError, InsufficientSamplesError
from .graph import DirectedGraph, ScoreVector, normalize
from .similarity import laplacian_pseudoinverse


def _scores(values, normalization, g):
    return ScoreVector(normalize(values, normalization), normalization, g.labels)


def degree_centrality(g: DirectedGraph, normalization="mean-one", weighted=False) -> ScoreVector:
    """In-degree (equal to degree on symmetric graphs)."""
    values = g.in_strength if weighted else g.in_degree
    return _scores(np.asarray(values, float), normalization, g)


# ---------------------------------------------------------------------------
# shortest paths
# ---------------------------------------------------------------------------


def _sssp_unweighted(w, s):
    n = w.shape[0]
    sigma = np.zeros(n)
    dist = np.full(n, -1)
    preds = [[] for _ in range(n)]
    order = []
    sigma[s] = 1.0
    dist[s] = 0
    queue = deque([s])
    while queue:
        v = queue.popleft()
        order.append(v)
        for u in w.indices[w.indptr[v]:w.indptr[v + 1]]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue.append(u)
            if dist[u] == dist[v] + 1:
                sigma[u] += sigma[v]
                preds[u].append(v)
    return order, preds, sigma


def _sssp_weighted(w, s, rtol=1e-12):
    n = w.shape[0]
    sigma = np.zeros(n)
    dist = np.full(n, np.inf)
    preds = [[] for _ in range(n)]
    order = []
    done = np.zeros(n, bool)
    sigma[s] = 1.0
    dist[s] = 0.0
    heap = [(0.0, s, s)]
    while heap:
        d, pred, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        order.append(v)
        lo, hi = w.indptr[v], w.indptr[v + 1]
        for u, length in zip(w.indices[lo:hi], w.data[lo:hi]):
            nd = d + length
            tol = rtol * max(1.0, nd)
            if nd < dist[u] - tol:
                dist[u] = nd
                sigma[u] = sigma[v]
                preds[u] = [v]
                heapq.heappush(heap, (nd, v, u))
            elif abs(nd - dist[u]) <= tol and not done[u]:
                sigma[u] += sigma[v]
                preds[u].append(v)
    return order, preds, sigma


def shortest_path_betweenness(g: DirectedGraph, normalization="mean-one", endpoints=True) -> ScoreVector:
    """Fraction of shortest paths through each node, summed over node pairs.

    With ``endpoints=True`` a path's two ends count as lying on it, so
    every node collects one unit per reachable partner.  Edge weights are
    path lengths; a graph whose weights are all equal is searched by BFS.
    Symmetric graphs count each unordered pair once.
    """
    w = g.weights
    n = g.node_count
    uniform = w.nnz == 0 or np.all(w.data == w.data[0])
    search = _sssp_unweighted if uniform else _sssp_weighted
    bc = np.zeros(n)
    for s in range(n):
        order, preds, sigma = search(w, s)
        delta = np.zeros(n)
        for v in reversed(order):
            coeff = (1.0 + delta[v]) / sigma[v]
            for p in preds[v]:
                delta[p] += sigma[p] * coeff
            if v != s:
                bc[v] += delta[v] + (1.0 if endpoints else 0.0)
        if endpoints:
            bc[s] += len(order) - 1
    if g.is_symmetric:
        bc /= 2.0
    return _scores(bc, normalization, g)


# ---------------------------------------------------------------------------
# random-walk betweenness
# ---------------------------------------------------------------------------


def random_walk_betweenness(g: DirectedGraph, normalization="mean-one") -> ScoreVector:
    """Current-flow betweenness averaged over all unordered node pairs.

    For a unit current injected at ``s`` and removed at ``t`` the potentials
    are ``L^+ (e_s - e_t)``.  A node's throughput is half the absolute
    current on its incident edges, and exactly 1 for ``s`` and ``t``.
    Runs in O((E + N) N^2).
    """
    g.require_undirected("random-walk betweenness")
    n = g.node_count
    if n < 2:
        raise DomainError("random-walk betweenness needs at least two nodes")
    lp = laplacian_pseudoinverse(g)
    upper = sp.triu(g.weights, k=1).tocoo()
    ei, ej, cond = upper.row, upper.col, upper.data
    n_edges = len(cond)
    incidence = sp.csr_matrix(
        (np.full(2 * n_edges, 0.5), (np.r_[ei, ej], np.r_[np.arange(n_edges), np.arange(n_edges)])),
        shape=(n, n_edges),
    )
    drop = lp[ei] - lp[ej]  # drop[e, s]: potential difference on e per unit injected at s
    total = np.zeros(n)
    for s in range(n - 1):
        targets = np.arange(s + 1, n)
        flow = cond[:, None] * np.abs(drop[:, [s]] - drop[:, targets])
        through = incidence @ flow
        through[s, :] = 1.0
        through[targets, np.arange(len(targets))] = 1.0
        total += through.sum(axis=1)
    b = total / (0.5 * n * (n - 1))
    return _scores(b, normalization, g)


# ---------------------------------------------------------------------------
# second-order centrality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecondOrderParams:
    """``power`` is the exponent in ``centrality = sigma ** -power``; the
    default 2 (inverse variance of the return times) separates peripheral
    nodes more sharply than ``power = 1``."""

    rng_seed: int
    walk_steps: int = 10_000_000
    burn_in: int | None = None
    min_returns: int = 50
    power: float = 2.0

    def __post_init__(self):
        if self.rng_seed is None:
            raise DomainError("second-order centrality needs an explicit rng_seed")
        if self.walk_steps < 1:
            raise DomainError("walk_steps must be positive")
        if self.burn_in is not None and not 0 <= self.burn_in < self.walk_steps:
            raise DomainError("burn_in must lie in [0, walk_steps)")
        if self.min_returns < 10:
            raise DomainError("min_returns must be at least 10")
        if self.power <= 0:
            raise DomainError("power must be positive")

    def burn_in_for(self, n):
        b = 10 * n if self.burn_in is None else self.burn_in
        if b >= self.walk_steps:
            raise DomainError(f"burn_in {b} leaves no steps out of {self.walk_steps}")
        return b


@numba.njit(cache=True)
def _mh_step(indptr, indices, cur, rng):
    k = indptr[cur + 1] - indptr[cur]
    nxt = indices[indptr[cur] + rng.integers(0, k)]
    kn = indptr[nxt + 1] - indptr[nxt]
    if kn <= k or rng.random() * kn < k:
        return nxt
    return cur


@numba.njit(cache=True)
def _mh_return_stats(indptr, indices, steps, burn_in, start, rng):
    n = len(indptr) - 1
    last = np.full(n, -1, np.int64)
    count = np.zeros(n, np.int64)
    mean = np.zeros(n)
    m2 = np.zeros(n)
    visits = np.zeros(n, np.int64)
    cur = start
    for t in range(steps):
        cur = _mh_step(indptr, indices, cur, rng)
        if t < burn_in:
            continue
        visits[cur] += 1
        if last[cur] >= 0:
            r = t - last[cur]
            count[cur] += 1
            d = r - mean[cur]
            mean[cur] += d / count[cur]
            m2[cur] += d * (r - mean[cur])
        last[cur] = t
    return count, mean, m2, visits


@numba.njit(cache=True)
def _mh_trajectory(indptr, indices, steps, burn_in, thin, start, rng):
    out = np.empty((steps - burn_in) // thin, np.int64)
    cur = start
    j = 0
    for t in range(steps):
        cur = _mh_step(indptr, indices, cur, rng)
        if t >= burn_in and (t - burn_in) % thin == thin - 1:
            out[j] = cur
            j += 1
    return out


def _walk_arrays(g: DirectedGraph, what):
    g.require_undirected(what)
    n = g.node_count
    if n < 3:
        raise DomainError(f"{what} needs at least three nodes")
    a = g.adjacency
    # self-loops would make the walk stay put without a Metropolis rejection
    a = (a - sp.diags(a.diagonal())).tocsr()
    a.eliminate_zeros()
    if (np.diff(a.indptr) == 0).any() or connected_components(a, directed=False)[0] > 1:
        raise ConnectivityError(f"{what} needs a connected graph")
    return a.indptr.astype(np.int64), a.indices.astype(np.int64)


def mh_trajectory(g: DirectedGraph, steps, seed, burn_in=0, thin=1, start=0):
    """Nodes visited by the degree-unbiased Metropolis-Hastings walk,
    recorded every ``thin`` steps after ``burn_in``."""
    indptr, indices = _walk_arrays(g, "the Metropolis-Hastings walk")
    rng = np.random.default_rng(seed)
    return _mh_trajectory(indptr, indices, int(steps), int(burn_in), int(thin), int(start), rng)


def return_time_statistics(g: DirectedGraph, params: SecondOrderParams):
    """Run the Metropolis-Hastings walk and return per-node
    ``(returns, mean return time, sample std of return times, visits)``."""
    indptr, indices = _walk_arrays(g, "second-order centrality")
    rng = np.random.default_rng(params.rng_seed)
    burn = params.burn_in_for(g.node_count)
    count, mean, m2, visits = _mh_return_stats(
        indptr, indices, int(params.walk_steps), int(burn), 0, rng)
    with np.errstate(invalid="ignore", divide="ignore"):
        std = np.sqrt(m2 / (count - 1))
    return count, mean, std, visits


def second_order_centrality(g: DirectedGraph, params: SecondOrderParams,
                            normalization="mean-one") -> ScoreVector:
    """Centrality from the spread of return times of an unbiased walk.

    The walk proposes a uniform neighbor ``j`` of the current node ``i`` and
    accepts with probability ``min(1, k_i / k_j)``, which makes its
    stationary distribution uniform.  Regularly revisited (central) nodes
    have a small return-time standard deviation ``sigma``; the score is
    ``sigma ** -params.power``.
    """
    count, _, std, _ = return_time_statistics(g, params)
    short = np.flatnonzero(count < params.min_returns)
    if len(short):
        raise InsufficientSamplesError(short.tolist(), count[short].tolist(), params.min_returns)
    if (std <= 0).any():
        raise DomainError("a node has zero return-time spread; centrality is undefined")
    return _scores(std ** -params.power, normalization, g)
