"""Bipartite request graphs and greedy maximal matchings.

A round of crossbar scheduling picks a matching in the bipartite graph whose
edge (i, j) is present iff input i currently holds a cell for output j.  A
single greedy pass over the edges in any order yields a *maximal* matching:
no remaining graph edge can be added without reusing a vertex.  Maximal is
weaker than maximum-cardinality, but a greedy pass is O(|edges|) and its key
coverage property (every graph edge touches a matched vertex) is all the
backlog analysis needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

Edge = Tuple[int, int]

__all__ = [
    "RequestGraph",
    "Matching",
    "greedy_maximal_matching",
    "is_matching",
    "is_maximal",
]


def _check_edges(edges: Iterable[Edge], n_ports: int) -> frozenset:
    edges = frozenset((int(i), int(j)) for i, j in edges)
    for i, j in edges:
        if not (0 <= i < n_ports and 0 <= j < n_ports):
            raise ConfigError(f"edge ({i}, {j}) out of range for {n_ports} ports")
    return edges


@dataclass(frozen=True)
class RequestGraph:
    """Edges (i, j) of inputs holding at least one cell for output j."""

    edges: frozenset
    n_ports: int

    def __post_init__(self):
        if self.n_ports < 1:
            raise ConfigError("n_ports must be positive")
        object.__setattr__(self, "edges", _check_edges(self.edges, self.n_ports))

    @classmethod
    def from_occupancy(cls, x: np.ndarray) -> "RequestGraph":
        """Build the graph of a count matrix: edge (i, j) iff x[i, j] > 0."""
        x = np.asarray(x)
        occ = np.argwhere(x > 0)
        return cls(frozenset(map(tuple, occ.tolist())), x.shape[0])

    def sorted_edges(self) -> list:
        return sorted(self.edges)


@dataclass(frozen=True)
class Matching:
    """A set of (input, output) edges.  Intended invariant: no two edges share
    a vertex; use is_matching to check (construction does not enforce it)."""

    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset((int(i), int(j)) for i, j in self.edges))

    def __len__(self) -> int:
        return len(self.edges)


def greedy_maximal_matching(graph: RequestGraph, order: Optional[Sequence[Edge]] = None) -> Matching:
    """Single greedy pass: keep each edge whose endpoints are both still free.

    `order` fixes the processing order and must list every edge of the graph
    exactly once; by default edges are processed in lexicographic order.  Any
    order yields a maximal matching of the graph.
    """
    if order is None:
        seq = graph.sorted_edges()
    else:
        seq = [(int(i), int(j)) for i, j in order]
        if len(seq) != len(graph.edges) or set(seq) != graph.edges:
            raise ConfigError("order must be a permutation of the graph's edges")
    used_in = bytearray(graph.n_ports)
    used_out = bytearray(graph.n_ports)
    chosen = []
    for i, j in seq:
        if not used_in[i] and not used_out[j]:
            used_in[i] = 1
            used_out[j] = 1
            chosen.append((i, j))
    return Matching(frozenset(chosen))


def is_matching(m: Matching) -> bool:
    """True iff no input or output vertex repeats among the edges."""
    ins = {i for i, _ in m.edges}
    outs = {j for _, j in m.edges}
    return len(ins) == len(m.edges) and len(outs) == len(m.edges)


def is_maximal(graph: RequestGraph, m: Matching) -> bool:
    """True iff no graph edge can be added to m, i.e. every edge (i, j) of the
    graph has an edge of m incident to i or to j.

    Requires m to be a sub-matching of the graph (raises ConfigError if not).
    """
    if not m.edges <= graph.edges:
        raise ConfigError("m must be a subset of the graph's edges")
    if not is_matching(m):
        raise ConfigError("m must itself be a matching")
    matched_in = {i for i, _ in m.edges}
    matched_out = {j for _, j in m.edges}
    return all(i in matched_in or j in matched_out for i, j in graph.edges)
