"""Random-walk ranking, centrality, similarity and recommendation on sparse graphs."""

__version__ = "0.1.0"

from .absorbing import (
    AbsorbingPartition,
    AbsorptionResult,
    DagInfluence,
    absorption_probabilities,
    absorption_times,
    dag_influence,
    diverse_ranking,
    expected_visits_from_sources,
    fundamental_matrix,
    heat_equilibrium,
    partition,
    simulate_absorption,
    solve_absorbing,
    topological_order,
)
from .centrality import (
    SecondOrderParams,
    degree_centrality,
    mh_trajectory,
    random_walk_betweenness,
    return_time_statistics,
    second_order_centrality,
    shortest_path_betweenness,
)
from .errors import (
    AcyclicityError,
    ColdStartError,
    ConnectivityError,
    ConvergenceError,
    DanglingNodeError,
    DomainError,
    InsufficientSamplesError,
    ParseError,
    ReachabilityError,
    SizeError,
    WalkrankError,
)
from .graph import (
    BipartiteGraph,
    DirectedGraph,
    HeatOperator,
    ScoreVector,
    TransitionMatrix,
    add_ground_node,
    build_heat_operator,
    build_transition,
    dump_edge_list,
    load_bipartite,
    load_directed_graph,
    parse_bipartite,
    parse_directed_graph,
)
from .ranking import (
    HitsResult,
    PageRankParams,
    citerank,
    eigenvector_centrality,
    ground_node_rank,
    hits,
    pagerank,
    pagerank_direct,
    pagerank_graph,
    totalrank,
    trusted_teleport,
)
from .recommender import (
    EvaluationReport,
    HybridParams,
    RecommendationList,
    evaluate,
    heats_scores,
    hybrid_scores,
    predict_rating,
    probs_scores,
    spreading_matrix,
    temperature_recommend,
    top_n,
)
from .similarity import (
    SimilarityMatrix,
    commute_time,
    cosine_similarity,
    ectd,
    laplacian_pseudoinverse,
    lrw_similarity,
    pearson_similarity,
    regularized_similarity,
    srw_similarity,
)
