"""Small hand-built networks used in examples, tests and the CLI demo.

Each builder returns a fresh graph with string labels so results can be
read off by name.
"""

from __future__ import annotations

from .graph import BipartiteGraph, DirectedGraph


def bucket_network() -> DirectedGraph:
    """Five nodes where 4 and 5 form a bucket: they link only to each other.

    Node 1 carries a self-loop, so there are no dangling nodes.  With
    damping 0.85 the bucket holds about 83% of the PageRank mass; without
    teleportation the walk alternates between 4 and 5 forever.
    """
    edges = [("1", "1"), ("1", "3"), ("1", "4"), ("2", "3"), ("2", "4"),
             ("3", "2"), ("3", "4"), ("4", "5"), ("5", "4")]
    return _from_labeled(edges, ("1", "2", "3", "4", "5"), undirected=False)


def duality_network() -> DirectedGraph:
    """Undirected graph with sinks A, B, C and transients t1, t2, t3.

    Holding A at temperature 1 and B, C at 0 gives t1 = 5/8, the mean of
    its neighbors A (1), t2 (1/2) and t3 (3/8).  The same numbers are the
    probabilities that a walk from each transient ends in A.
    """
    edges = [("A", "t1"), ("A", "t2"), ("t1", "t2"), ("t1", "t3"),
             ("t2", "t3"), ("t2", "B"), ("t3", "C")]
    return _from_labeled(edges, ("A", "B", "C", "t1", "t2", "t3"), undirected=True)


def centrality_network() -> DirectedGraph:
    """Thirteen nodes and 23 undirected edges.

    Nodes 1 and 4 sit in a complete graph on six nodes (the other four,
    a to d, behave like 4).  Node 2 links to 1, 3 and five leaves (5 and
    l1 to l4, which behave like 5).  Node 3 bridges 1 and 2.
    """
    clique = ["1", "4", "a", "b", "c", "d"]
    edges = [(u, v) for k, u in enumerate(clique) for v in clique[k + 1:]]
    edges += [("1", "2"), ("1", "3"), ("2", "3")]
    edges += [("2", leaf) for leaf in ("5", "l1", "l2", "l3", "l4")]
    labels = ("1", "2", "3", "4", "5", "a", "b", "c", "d", "l1", "l2", "l3", "l4")
    return _from_labeled(edges, labels, undirected=True)


def spreading_network() -> BipartiteGraph:
    """Five users and five items.

    User u2 collected items 3 and 4.  Mass diffusion from u2 scores the
    collected items 0.75 each and the uncollected items 1 and 2 at 0.25
    each, ahead of item 5 at 0.
    """
    collections = {
        "u1": ("1", "3"),
        "u2": ("3", "4"),
        "u3": ("2", "4"),
        "u4": ("1", "2", "5"),
        "u5": ("5",),
    }
    users = tuple(collections)
    items = ("1", "2", "3", "4", "5")
    entries = [(users.index(u), items.index(i), None, None)
               for u, held in collections.items() for i in held]
    return BipartiteGraph.from_entries(entries, users, items)


def _from_labeled(edges, labels, undirected):
    pos = {lab: k for k, lab in enumerate(labels)}
    pairs = [(pos[u], pos[v], 1.0) for u, v in edges]
    build = DirectedGraph.undirected if undirected else DirectedGraph.from_edges
    return build(pairs, labels=labels)
