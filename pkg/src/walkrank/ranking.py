"""PageRank and its teleportation variants, HITS, TotalRank and eigenvector
centrality.

All iterative routines use sparse matrix-vector products only; the dense
Google matrix is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, SizeError
from .graph import (
    SMALL_DENSE,
    DirectedGraph,
    ScoreVector,
    TransitionMatrix,
    add_ground_node,
    build_transition,
)

DEFAULT_TOLERANCE = 1e-12
DEFAULT_MAX_ITERATIONS = 1000
DENSE_THRESHOLD = 2000


@dataclass(frozen=True)
class PageRankParams:
    alpha: float = 0.85
    teleport: ScoreVector | np.ndarray | None = None
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.tolerance <= 0:
            raise DomainError("tolerance must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be positive")
        if self.teleport is not None:
            v = np.asarray(self.teleport, float)
            if (v < 0).any() or abs(v.sum() - 1.0) > 1e-9:
                raise DomainError("teleport vector must be non-negative and sum to one")

    @property
    def mean_chain_length(self):
        """Expected number of links followed between two jumps."""
        if self.alpha == 1.0:
            return float("inf")
        return self.alpha / (1.0 - self.alpha)

    def teleport_vector(self, n):
        if self.teleport is None:
            return np.full(n, 1.0 / n)
        v = np.asarray(self.teleport, float)
        if len(v) != n:
            raise DomainError(f"teleport vector has length {len(v)}, graph has {n} nodes")
        return v


@dataclass(frozen=True)
class HitsResult:
    authority: ScoreVector
    hub: ScoreVector
    iterations: int


def pagerank(P: TransitionMatrix, params: PageRankParams = PageRankParams()) -> ScoreVector:
    """Power iteration ``h <- alpha P^T h + (1 - alpha) v``.

    Starts from the teleport vector and stops once the L1 change drops
    below ``params.tolerance``.  With ``alpha = 1`` the caller is
    responsible for irreducibility; a periodic chain raises
    :class:`ConvergenceError`.
    """
    n = P.n
    alpha = params.alpha
    v = params.teleport_vector(n)
    h = v.copy()
    jump = (1.0 - alpha) * v
    if n <= SMALL_DENSE:
        # one dense product per step, dangling rows and damping folded in
        op = alpha * P.toarray().T

        def step(x):
            out = np.dot(op, x)
            out += jump
            return out
    else:
        def step(x):
            out = P.rmatvec(x)
            out *= alpha
            out += jump
            return out
    residual = np.inf
    for it in range(1, params.max_iterations + 1):
        new = step(h)
        diff = new - h
        residual = np.abs(diff, out=diff).sum()
        h = new
        if residual < params.tolerance:
            return ScoreVector.normalized(np.maximum(h, 0.0), "sum-one", P.labels)
    raise ConvergenceError(
        f"PageRank did not converge in {params.max_iterations} iterations "
        f"(L1 residual {residual:.3e})",
        last=h, residual=residual, iterations=params.max_iterations,
    )


def pagerank_direct(P: TransitionMatrix, params: PageRankParams = PageRankParams(),
                    threshold=DENSE_THRESHOLD) -> ScoreVector:
    """Solve ``(I - alpha P^T) h = (1 - alpha) v`` with a dense LU factorization."""
    n = P.n
    if params.alpha >= 1.0:
        raise DomainError("the direct solve needs alpha < 1")
    if n > threshold:
        raise SizeError(f"{n} nodes exceeds the dense threshold {threshold}; use pagerank()")
    v = params.teleport_vector(n)
    a = np.eye(n) - params.alpha * P.toarray().T
    h = np.linalg.solve(a, (1.0 - params.alpha) * v)
    return ScoreVector.normalized(np.maximum(h, 0.0), "sum-one", P.labels)


def totalrank(P: TransitionMatrix, quadrature_points=32, eps=1e-6,
              threshold=DENSE_THRESHOLD) -> ScoreVector:
    """PageRank integrated over the damping factor on ``[0, 1 - eps]``.

    Uses Gauss-Legendre quadrature; each node is one dense solve.
    """
    if quadrature_points < 2:
        raise DomainError("TotalRank needs at least two quadrature points")
    if P.n > threshold:
        raise SizeError(f"{P.n} nodes exceeds the dense threshold {threshold}")
    x, w = np.polynomial.legendre.leggauss(quadrature_points)
    upper = 1.0 - eps
    alphas = 0.5 * upper * (x + 1.0)
    weights = 0.5 * upper * w
    pt = P.toarray().T
    eye = np.eye(P.n)
    v = np.full(P.n, 1.0 / P.n)
    acc = np.zeros(P.n)
    for a, wt in zip(alphas, weights):
        acc += wt * np.linalg.solve(eye - a * pt, (1.0 - a) * v)
    return ScoreVector.normalized(np.maximum(acc, 0.0), "sum-one", P.labels)


def hits(g: DirectedGraph, tolerance=DEFAULT_TOLERANCE,
         max_iterations=DEFAULT_MAX_ITERATIONS) -> HitsResult:
    """Hub and authority scores, L1-normalized after every half-step."""
    if g.edge_count == 0:
        raise DomainError("HITS needs at least one edge")
    a = g.weights
    at = a.T.tocsr()
    n = g.node_count
    y = np.full(n, 1.0 / n)
    x = np.zeros(n)
    for it in range(1, max_iterations + 1):
        x_new = at @ y
        x_new /= x_new.sum()
        y_new = a @ x_new
        y_new /= y_new.sum()
        change = np.abs(x_new - x).sum() + np.abs(y_new - y).sum()
        x, y = x_new, y_new
        if change < tolerance:
            return HitsResult(
                ScoreVector.normalized(x, "sum-one", g.labels),
                ScoreVector.normalized(y, "sum-one", g.labels),
                it,
            )
    raise ConvergenceError(
        f"HITS did not converge in {max_iterations} iterations (change {change:.3e})",
        last=(x, y), residual=change, iterations=max_iterations,
    )


def eigenvector_centrality(g: DirectedGraph, tolerance=DEFAULT_TOLERANCE,
                           max_iterations=DEFAULT_MAX_ITERATIONS) -> ScoreVector:
    """Dominant eigenvector of ``A^T`` (scores flow along edge direction).

    Iterates the shifted map ``x <- (I + A^T) x``, which has the same
    eigenvectors but stops bipartite graphs from oscillating between the
    ``+lambda`` and ``-lambda`` eigenvectors.
    """
    n = g.node_count
    if n == 0:
        raise DomainError("graph has no nodes")
    at = g.weights.T.tocsr()
    x = np.full(n, 1.0 / n)
    change = np.inf
    for _ in range(max_iterations):
        new = x + at @ x
        new /= new.sum()
        change = np.abs(new - x).sum()
        x = new
        if change < tolerance:
            return ScoreVector.normalized(x, "sum-one", g.labels)
    raise ConvergenceError(
        f"eigenvector centrality did not converge in {max_iterations} iterations "
        f"(change {change:.3e})",
        last=x, residual=change, iterations=max_iterations,
    )


def citerank_teleport(ages, tau) -> np.ndarray:
    """Jump distribution proportional to ``exp(-age / tau)``."""
    ages = np.asarray(ages, float)
    if tau <= 0:
        raise DomainError("tau must be positive")
    if not np.isfinite(ages).all() or (ages < 0).any():
        raise DomainError("ages must be finite and non-negative")
    # shifting by the youngest age cancels in the normalization and keeps
    # the largest weight at exactly 1, so the mass never underflows
    rho = np.exp(-(ages - ages.min()) / tau)
    total = rho.sum()
    if not np.isfinite(total) or total <= 0:
        raise DomainError("teleport mass vanished; use a larger tau")
    return rho / total


def citerank(P: TransitionMatrix, ages, tau, alpha=0.5,
             tolerance=DEFAULT_TOLERANCE, max_iterations=DEFAULT_MAX_ITERATIONS) -> ScoreVector:
    if len(ages) != P.n:
        raise DomainError(f"got {len(ages)} ages for {P.n} nodes")
    v = citerank_teleport(ages, tau)
    return pagerank(P, PageRankParams(alpha, v, tolerance, max_iterations))


def trusted_teleport(trusted, n) -> ScoreVector:
    """Uniform jump distribution over a set of trusted node ids."""
    trusted = sorted(set(int(i) for i in trusted))
    if not trusted:
        raise DomainError("trusted set is empty")
    if trusted[0] < 0 or trusted[-1] >= n:
        raise DomainError("trusted id out of range")
    v = np.zeros(n)
    v[trusted] = 1.0 / len(trusted)
    return ScoreVector(v, "sum-one")


def ground_node_rank(g: DirectedGraph, tolerance=DEFAULT_TOLERANCE,
                     max_iterations=DEFAULT_MAX_ITERATIONS) -> ScoreVector:
    """PageRank without teleportation on the graph augmented by a ground node.

    The ground node's score is dropped and the rest renormalized.
    """
    if g.node_count == 0:
        raise DomainError("graph has no nodes")
    n = g.node_count
    aug = add_ground_node(g)
    P = build_transition(aug, "error")
    # at alpha = 1 the teleport vector is only the start vector; this one is
    # already stationary for an edgeless graph, whose augmented chain is periodic
    start = np.r_[np.full(n, 0.5 / n), 0.5]
    h = pagerank(P, PageRankParams(1.0, start, tolerance, max_iterations))
    return ScoreVector.normalized(h.values[:n], "sum-one", g.labels)


def pagerank_graph(g: DirectedGraph, alpha=0.85, policy="uniform", **kw) -> ScoreVector:
    """Convenience wrapper: build the transition matrix and run :func:`pagerank`."""
    return pagerank(build_transition(g, policy), PageRankParams(alpha, **kw))


__all__ = [
    "PageRankParams", "HitsResult", "pagerank", "pagerank_direct", "totalrank",
    "hits", "eigenvector_centrality", "citerank", "citerank_teleport",
    "trusted_teleport", "ground_node_rank", "pagerank_graph",
]
