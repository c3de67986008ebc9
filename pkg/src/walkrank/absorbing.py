"""Random walks with absorbing sinks or emitting sources.

Every quantity here reduces to solves against ``I - P_TT`` (the
transient-to-transient block), which is factorized once with sparse LU.
No explicit inverse is formed except where the caller asks for the
fundamental matrix itself.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AcyclicityError, DomainError, ReachabilityError
from .graph import DirectedGraph, ScoreVector, TransitionMatrix, rank_order
from .ranking import PageRankParams, pagerank

RESIDUAL_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class AbsorbingPartition:
    """Transition matrix split into sink (or source) and transient blocks.

    Ids in ``sinks`` and ``transients`` are ascending; block rows and
    columns follow that order.  With ``semantics="sink"`` the sink rows are
    made absorbing (``P_SS = I``, ``P_ST = 0``); with ``"source"`` the
    original outgoing rows of the sources are kept so they can emit.
    """

    sinks: tuple[int, ...]
    transients: tuple[int, ...]
    P_SS: sp.csr_matrix
    P_ST: sp.csr_matrix
    P_TS: sp.csr_matrix
    P_TT: sp.csr_matrix
    semantics: str = "sink"
    labels: tuple[str, ...] = None

    @property
    def M(self):
        return len(self.transients)

    @property
    def N(self):
        return len(self.sinks) + len(self.transients)


@dataclass(frozen=True, eq=False)
class AbsorptionResult:
    """``F`` (transient x sink absorption probabilities), ``V`` (expected
    visits between transients) and the expected absorption times."""

    F: np.ndarray
    V: np.ndarray
    absorption_time: np.ndarray
    sinks: tuple[int, ...]
    transients: tuple[int, ...]


def partition(P: TransitionMatrix, sinks, semantics="sink") -> AbsorbingPartition:
    if semantics not in ("sink", "source"):
        raise DomainError(f"unknown semantics {semantics!r}")
    n = P.n
    s = sorted(set(int(i) for i in sinks))
    if not s:
        raise DomainError("sink set is empty")
    if s[0] < 0 or s[-1] >= n:
        raise DomainError("sink id out of range")
    if len(s) == n:
        raise DomainError("every node is a sink; no transient nodes remain")
    is_sink = np.zeros(n, bool)
    is_sink[s] = True
    t = np.flatnonzero(~is_sink)
    full = P.to_sparse().tocsr()
    s_arr = np.array(s)
    if semantics == "sink":
        p_ss = sp.identity(len(s), format="csr")
        p_st = sp.csr_matrix((len(s), len(t)))
    else:
        p_ss = full[s_arr][:, s_arr]
        p_st = full[s_arr][:, t]
    return AbsorbingPartition(
        tuple(s), tuple(int(i) for i in t),
        sp.csr_matrix(p_ss), sp.csr_matrix(p_st),
        full[t][:, s_arr].tocsr(), full[t][:, t].tocsr(),
        semantics, P.labels,
    )


def _cannot_reach(p_tt, p_ts):
    """Mask of transients with no path into the sink set."""
    reach = np.asarray((p_ts != 0).sum(axis=1)).ravel() > 0
    frontier = reach.copy()
    step = (p_tt != 0).astype(float).tocsr()
    while frontier.any():
        new = (step @ frontier.astype(float) > 0) & ~reach
        reach |= new
        frontier = new
    return ~reach


def _can_reach(p_tt, targets):
    """Mask of transients with a path into ``targets`` (targets included)."""
    reach = targets.copy()
    frontier = targets.copy()
    step = (p_tt != 0).astype(float).tocsr()
    while frontier.any():
        new = (step @ frontier.astype(float) > 0) & ~reach
        reach |= new
        frontier = new
    return reach


def _check_reachability(p: AbsorbingPartition):
    trapped = _cannot_reach(p.P_TT, p.P_TS)
    if trapped.any():
        ids = [p.transients[i] for i in np.flatnonzero(trapped)]
        raise ReachabilityError("transient nodes cannot reach any sink", ids)


def _factorize(p_tt):
    m = p_tt.shape[0]
    a = (sp.identity(m, format="csc") - p_tt.tocsc()).tocsc()
    return a, spla.splu(a)


def _solve(a, lu, b, trans="N"):
    """LU solve with one round of iterative refinement if the residual is large."""
    b = np.asarray(b, float)
    x = lu.solve(b, trans=trans)
    op = a.T if trans == "T" else a
    r = op @ x - b
    if np.abs(r).max(initial=0.0) > RESIDUAL_TOLERANCE:
        x = x - lu.solve(r, trans=trans)
    return x


def absorption_probabilities(p: AbsorbingPartition) -> np.ndarray:
    """``F = (I - P_TT)^{-1} P_TS``; rows follow ``p.transients``."""
    _check_reachability(p)
    a, lu = _factorize(p.P_TT)
    return _solve(a, lu, p.P_TS.toarray())


def expected_visits_from_sources(p: AbsorbingPartition) -> np.ndarray:
    """``H = P_ST (I - P_TT)^{-1}``: mean visits of each transient by a
    particle emitted from each source, before it is re-absorbed."""
    if p.semantics != "source":
        raise DomainError("expected visits need a partition built with semantics='source'")
    _check_reachability(p)
    a, lu = _factorize(p.P_TT)
    return _solve(a, lu, p.P_ST.toarray().T, trans="T").T


def fundamental_matrix(p: AbsorbingPartition):
    """Return ``(V, absorption_time)`` with ``V = (I - P_TT)^{-1}``."""
    _check_reachability(p)
    a, lu = _factorize(p.P_TT)
    v = _solve(a, lu, np.eye(p.M))
    return v, v @ np.ones(p.M)


def solve_absorbing(p: AbsorbingPartition) -> AbsorptionResult:
    _check_reachability(p)
    a, lu = _factorize(p.P_TT)
    f = _solve(a, lu, p.P_TS.toarray())
    v = _solve(a, lu, np.eye(p.M))
    return AbsorptionResult(f, v, v @ np.ones(p.M), p.sinks, p.transients)


def absorption_times(P: TransitionMatrix, sinks) -> np.ndarray:
    """Expected steps to absorption for every node (0 on sinks).

    Transients that may never be absorbed get ``inf`` instead of an error.
    """
    p = partition(P, sinks)
    times = np.zeros(P.n)
    trapped = _cannot_reach(p.P_TT, p.P_TS)
    infinite = _can_reach(p.P_TT, trapped) if trapped.any() else trapped
    finite = np.flatnonzero(~infinite)
    t_ids = np.array(p.transients)
    times[t_ids[infinite]] = np.inf
    if len(finite):
        sub = p.P_TT[finite][:, finite]
        a, lu = _factorize(sub)
        times[t_ids[finite]] = _solve(a, lu, np.ones(len(finite)))
    return times


def diverse_ranking(P: TransitionMatrix, params: PageRankParams = PageRankParams(),
                    length=10) -> list[int]:
    """Greedy top list that favors nodes far from those already picked.

    The first entry is the PageRank winner.  Each further entry is the
    node with the longest expected absorption time when all previous
    picks are sinks; nodes that cannot be absorbed at all count as
    infinitely far and win, lowest id first.
    """
    if length < 1 or length >= P.n:
        raise DomainError(f"list length must lie in [1, {P.n - 1}]")
    picked = [int(pagerank(P, params).ranking()[0])]
    while len(picked) < length:
        times = absorption_times(P, picked)
        times[picked] = -1.0
        picked.append(int(rank_order(np.where(np.isinf(times), np.finfo(float).max, times))[0]))
    return picked


def heat_equilibrium(g: DirectedGraph, boundary) -> ScoreVector:
    """Steady temperatures with ``boundary`` nodes held fixed.

    Each free node ends at the strength-weighted average of its
    out-neighbors: ``s_i x_i = sum_j w_ij x_j``.  ``boundary`` maps node
    id to temperature.
    """
    if not boundary:
        raise DomainError("boundary is empty")
    n = g.node_count
    fixed = np.zeros(n, bool)
    temps = np.zeros(n)
    for node, value in boundary.items():
        node = int(node)
        if not 0 <= node < n:
            raise DomainError(f"boundary node {node} out of range")
        fixed[node] = True
        temps[node] = float(value)
    free = np.flatnonzero(~fixed)
    if len(free) == 0:
        return ScoreVector(temps, "raw", g.labels)
    b = np.flatnonzero(fixed)
    w = g.weights
    w_ff = w[free][:, free]
    w_fb = w[free][:, b]
    stuck = _cannot_reach(w_ff, w_fb)
    if stuck.any():
        raise ReachabilityError("free nodes cannot reach the boundary", free[stuck].tolist())
    lap = (sp.diags(g.out_strength[free]) - w_ff).tocsc()
    rhs = w_fb @ temps[b]
    lu = spla.splu(lap)
    temps[free] = _solve(lap, lu, rhs)
    return ScoreVector(temps, "raw", g.labels)


@dataclass(frozen=True, eq=False)
class DagInfluence:
    """``passing[i, j]``: probability that a walk started at ``j`` passes
    through ``i``.  ``impact`` sums each row minus the self term;
    ``progeny`` counts the nodes from which ``i`` is reachable."""

    passing: np.ndarray
    impact: np.ndarray
    progeny: np.ndarray
    order: tuple[int, ...]


def topological_order(g: DirectedGraph) -> list[int]:
    """Kahn's algorithm, smallest available id first."""
    indeg = np.array(g.in_degree, dtype=np.int64)
    w = g.weights
    heap = [int(i) for i in np.flatnonzero(indeg == 0)]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for j in w.indices[w.indptr[i]:w.indptr[i + 1]]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, int(j))
    if len(order) < g.node_count:
        seen = set(order)
        raise AcyclicityError([i for i in range(g.node_count) if i not in seen])
    return order


def dag_influence(g: DirectedGraph) -> DagInfluence:
    """Passing probabilities of the walk that follows edges until it stops.

    Edges are followed in their stored direction (for citations, orient
    them citing -> cited).  A node without out-edges ends the walk.
    """
    order = topological_order(g)
    n = g.node_count
    s = g.out_strength
    inv = np.zeros(n)
    inv[s > 0] = 1.0 / s[s > 0]
    pt = (sp.diags(inv) @ g.weights).T.tocsr()
    passing = np.zeros((n, n))
    masks = [0] * n
    for i in order:
        lo, hi = pt.indptr[i], pt.indptr[i + 1]
        preds = pt.indices[lo:hi]
        row = pt.data[lo:hi] @ passing[preds] if hi > lo else np.zeros(n)
        row[i] = 1.0
        passing[i] = row
        m = 0
        for k in preds:
            m |= masks[k] | (1 << int(k))
        masks[i] = m
    progeny = np.array([bin(m).count("1") for m in masks], dtype=np.int64)
    impact = passing.sum(axis=1) - 1.0
    return DagInfluence(passing, impact, progeny, tuple(order))


def simulate_absorption(P: TransitionMatrix, sinks, start, walks, seed, max_steps=100_000):
    """Monte Carlo absorption counts per sink for walks launched at ``start``.

    Walks are split into chunks that each draw from an independent child of
    ``SeedSequence(seed)``, so the counts depend only on ``seed`` and
    ``walks``.  Returns ``(counts, unabsorbed)`` with ``counts`` aligned to
    the sorted sink ids.
    """
    sinks = sorted(set(int(i) for i in sinks))
    n = P.n
    cum = np.cumsum(P.toarray(), axis=1)
    cum[:, -1] = 1.0
    flat = (cum + np.arange(n)[:, None]).ravel()
    is_sink = np.zeros(n, bool)
    is_sink[sinks] = True
    sink_pos = np.full(n, -1)
    sink_pos[sinks] = np.arange(len(sinks))
    counts = np.zeros(len(sinks), dtype=np.int64)
    chunk = 1 << 16
    n_chunks = -(-walks // chunk)
    unabsorbed = 0
    for c, child in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        rng = np.random.default_rng(child)
        size = min(chunk, walks - c * chunk)
        cur = np.full(size, int(start))
        alive = ~is_sink[cur]
        counts += np.bincount(sink_pos[cur[~alive]], minlength=len(sinks)) if (~alive).any() else 0
        cur = cur[alive]
        for _ in range(max_steps):
            if not len(cur):
                break
            u = rng.random(len(cur))
            nxt = np.searchsorted(flat, cur + u, side="right") - cur * n
            cur = np.minimum(nxt, n - 1)
            hit = is_sink[cur]
            if hit.any():
                counts += np.bincount(sink_pos[cur[hit]], minlength=len(sinks))
                cur = cur[~hit]
        unabsorbed += len(cur)
    return counts, unabsorbed
