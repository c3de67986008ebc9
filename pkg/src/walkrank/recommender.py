"""Recommendation on user-item graphs: mass-diffusion (ProbS), heat
spreading (HeatS) and their hybrid, similarity-based rating prediction,
fixed-temperature heat recommendation, top-N lists and offline evaluation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .absorbing import heat_equilibrium
from .errors import ColdStartError, DomainError
from .graph import BipartiteGraph, DirectedGraph, ScoreVector, rank_order
from .similarity import SimilarityMatrix


@dataclass(frozen=True)
class HybridParams:
    lam: float = 0.5
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class RecommendationList:
    user: int | None
    items: tuple[tuple[int, float], ...]
    excluded: frozenset = frozenset()

    def __post_init__(self):
        ids = [i for i, _ in self.items]
        if any(i in self.excluded for i in ids):
            raise DomainError("recommendation list contains an excluded item")

    @property
    def item_ids(self):
        return [i for i, _ in self.items]

    def __len__(self):
        return len(self.items)


def _initial_resource(b: BipartiteGraph, user, theta):
    if not 0 <= user < b.user_count:
        raise DomainError(f"user id {user} out of range")
    if b.user_degree[user] == 0:
        raise ColdStartError(f"user {b.user_labels[user]!r} has collected nothing")
    h = np.zeros(b.item_count)
    items = b.collected(user)
    h[items] = np.asarray(b.item_degree[items], float) ** theta
    return h


def _spread(b: BipartiteGraph, h, lam):
    """Apply ``W_{ab} = k_a^(lam-1) k_b^(-lam) sum_i A_ia A_ib / k_i`` to ``h``.

    Items of degree zero get a zero score and are left out of every
    denominator.
    """
    a = b.adjacency
    ki = np.asarray(b.item_degree, float)
    ku = np.asarray(b.user_degree, float)
    live = ki > 0
    inv_ku = np.zeros_like(ku)
    inv_ku[ku > 0] = 1.0 / ku[ku > 0]
    src = np.zeros_like(h)
    src[live] = h[live] * ki[live] ** -lam
    on_users = inv_ku * (a @ src)
    out = a.T @ on_users
    out[live] *= ki[live] ** (lam - 1.0)
    out[~live] = 0.0
    return out


def probs_scores(b: BipartiteGraph, user, theta=0.0) -> ScoreVector:
    """Mass diffusion: each collected item starts with ``k^theta`` units,
    spreads evenly to its users, who spread it evenly back to their items.

    Scores of already collected items are included; pass
    ``b.collected(user)`` as ``exclude`` to :func:`top_n`.
    """
    return ScoreVector(_spread(b, _initial_resource(b, user, theta), 1.0), "raw", b.item_labels)


def heats_scores(b: BipartiteGraph, user) -> ScoreVector:
    """Heat spreading: every item's score is the average, over its users,
    of the fraction of each user's items that ``user`` collected."""
    return ScoreVector(_spread(b, _initial_resource(b, user, 0.0), 0.0), "raw", b.item_labels)


def hybrid_scores(b: BipartiteGraph, user, params: HybridParams = HybridParams()) -> ScoreVector:
    """``lam = 1`` is mass diffusion, ``lam = 0`` heat spreading."""
    h = _initial_resource(b, user, params.theta)
    return ScoreVector(_spread(b, h, params.lam), "raw", b.item_labels)


def spreading_matrix(b: BipartiteGraph, lam=1.0) -> sp.csr_matrix:
    """The item-item hybrid operator as an explicit sparse matrix."""
    a = b.adjacency
    ki = np.asarray(b.item_degree, float)
    ku = np.asarray(b.user_degree, float)
    inv_ku = np.zeros_like(ku)
    inv_ku[ku > 0] = 1.0 / ku[ku > 0]
    left = np.zeros_like(ki)
    right = np.zeros_like(ki)
    live = ki > 0
    left[live] = ki[live] ** (lam - 1.0)
    right[live] = ki[live] ** -lam
    core = a.T @ sp.diags(inv_ku) @ a
    return (sp.diags(left) @ core @ sp.diags(right)).tocsr()


def predict_rating(b: BipartiteGraph, s: SimilarityMatrix | np.ndarray, user, item):
    """Mean-centered weighted average of the other raters' deviations.

    Returns ``None`` when nobody else rated ``item`` or their similarity to
    ``user`` sums to zero in absolute value; callers then fall back to the
    user's mean rating.
    """
    sim = s.values if isinstance(s, SimilarityMatrix) else np.asarray(s, float)
    r = b.rating_matrix
    mu = b.user_mean_rating
    raters = np.flatnonzero(~np.isnan(r[:, item]))
    raters = raters[raters != user]
    if not len(raters):
        return None
    w = sim[user, raters]
    mass = np.abs(w).sum()
    if mass == 0:
        return None
    base = mu[user]
    if np.isnan(base):
        raise DomainError(f"user {b.user_labels[user]!r} has no ratings")
    return float(base + (w * (r[raters, item] - mu[raters])).sum() / mass)


def temperature_recommend(item_graph: DirectedGraph, liked, disliked=(), n=None) -> RecommendationList:
    """Rank free items by steady temperature with liked items held at 1 and
    disliked at 0.  Equal temperatures fall back to ascending id."""
    liked = set(int(i) for i in liked)
    disliked = set(int(i) for i in disliked)
    if not liked:
        raise DomainError("liked set is empty")
    if liked & disliked:
        raise DomainError(f"items both liked and disliked: {sorted(liked & disliked)}")
    boundary = {i: 1.0 for i in liked}
    boundary.update({i: 0.0 for i in disliked})
    temps = heat_equilibrium(item_graph, boundary).values
    # solver noise of order 1e-16 would otherwise break exact ties between
    # equally warm items, which must fall back to id order
    temps = np.round(np.clip(temps, 0.0, 1.0), 12)
    return top_n(temps, frozenset(boundary), n or item_graph.node_count)


def top_n(scores, exclude=(), n=10, user=None) -> RecommendationList:
    if n < 1:
        raise DomainError("n must be at least 1")
    values = np.asarray(scores, float)
    exclude = frozenset(int(i) for i in exclude)
    out = []
    for i in rank_order(values):
        if int(i) in exclude:
            continue
        out.append((int(i), float(values[i])))
        if len(out) == n:
            break
    return RecommendationList(user, tuple(out), exclude)


# ---------------------------------------------------------------------------
# offline evaluation
# ---------------------------------------------------------------------------


def _method_scorer(method, lam=0.5, theta=0.0, seed=0):
    if callable(method):
        return method
    if method == "probs":
        return lambda b, u: probs_scores(b, u, theta).values
    if method == "heats":
        return lambda b, u: heats_scores(b, u).values
    if method == "hybrid":
        return lambda b, u: hybrid_scores(b, u, HybridParams(lam, theta)).values
    if method == "random":
        return lambda b, u: np.random.default_rng([seed, u]).random(b.item_count)
    raise DomainError(f"unknown method {method!r}")


def probe_split(b: BipartiteGraph, fraction, seed):
    """Per-user probe selection: ``max(1, round(fraction * k_u))`` entries
    drawn uniformly without replacement.  Returns a boolean probe mask."""
    if not 0.0 < fraction < 1.0:
        raise DomainError("probe fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    probe = np.zeros(len(b.users), bool)
    order = np.argsort(b.users, kind="stable")
    starts = np.searchsorted(b.users[order], np.arange(b.user_count + 1))
    for u in range(b.user_count):
        rows = order[starts[u]:starts[u + 1]]
        if not len(rows):
            continue
        k = max(1, int(math.floor(fraction * len(rows) + 0.5)))
        probe[rng.choice(rows, size=min(k, len(rows)), replace=False)] = True
    return probe


@dataclass
class EvaluationReport:
    recovery: float
    precision: float
    diversity: float
    mean_degree: float
    users_evaluated: int
    users_skipped: int
    top: int
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "recovery_score": self.recovery,
            "precision_at_n": self.precision,
            "diversity": self.diversity,
            "mean_recommended_degree": self.mean_degree,
            "users_evaluated": self.users_evaluated,
            "users_skipped": self.users_skipped,
            "top_n": self.top,
            **self.extra,
        }


def _evaluate_user(train, probe_items, u, scorer, n):
    collected = set(train.collected(u).tolist())
    scores = np.asarray(scorer(train, u), float)
    order = [int(i) for i in rank_order(scores) if int(i) not in collected]
    eligible = len(order)
    position = {item: pos for pos, item in enumerate(order, start=1)}
    ranks = [position[i] / eligible for i in probe_items]
    top = order[:n]
    hits = len(set(top) & set(probe_items))
    return ranks, hits, top


def evaluate(b: BipartiteGraph, method="probs", probe=0.1, seed=0, n=20,
             lam=0.5, theta=0.0, threads=1) -> EvaluationReport:
    """Leave-probe-out evaluation of a diffusion recommender.

    ``recovery`` is the mean relative rank of probe items among the items
    the user has not collected in training (0 best, about 0.5 random).
    ``diversity`` is the mean pairwise Hamming distance ``1 - overlap/n``
    between users' top-``n`` lists.  Users whose whole collection lands in
    the probe set are skipped and counted.
    """
    probe_mask = probe_split(b, probe, seed)
    train = b.subset(~probe_mask)
    scorer = _method_scorer(method, lam, theta, seed)
    jobs = []
    skipped = 0
    for u in range(b.user_count):
        sel = (b.users == u)
        if not sel.any():
            continue
        if not (sel & ~probe_mask).any():
            skipped += 1
            continue
        jobs.append((u, b.items[sel & probe_mask].tolist()))

    def run(job):
        u, items = job
        return _evaluate_user(train, items, u, scorer, n)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, jobs))

    ranks = [r for res in results for r in res[0]]
    tops = [res[2] for res in results]
    precision = float(np.mean([res[1] / n for res in results])) if results else float("nan")
    kdeg = np.asarray(train.item_degree, float)
    rec_items = [i for top in tops for i in top]
    mean_degree = float(kdeg[rec_items].mean()) if rec_items else float("nan")
    return EvaluationReport(
        recovery=float(np.mean(ranks)) if ranks else float("nan"),
        precision=precision,
        diversity=list_diversity(tops, n),
        mean_degree=mean_degree,
        users_evaluated=len(results),
        users_skipped=skipped,
        top=n,
    )


def list_diversity(lists, n):
    """Mean pairwise ``1 - |L_i & L_j| / n`` over all list pairs."""
    if len(lists) < 2:
        return 0.0
    m = len(lists)
    rows = np.repeat(np.arange(m), [len(x) for x in lists])
    cols = np.array([i for x in lists for i in x], dtype=np.int64)
    width = int(cols.max()) + 1 if len(cols) else 1
    ind = sp.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(m, width))
    overlap = (ind @ ind.T).toarray()
    iu = np.triu_indices(m, k=1)
    return float(np.mean(1.0 - overlap[iu] / n))
