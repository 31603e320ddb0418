"""Degree-weighted efficient routing.

The cost of a path ``v0, v1, ..., vn`` is ``sum(k(v_i) ** alpha for i < n)``:
every node pays its degree to the power ``alpha`` except the destination.
``alpha = 0`` reduces this to hop count; positive ``alpha`` steers traffic
around hubs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from os import PathLike
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import ContractError, InvalidPathError, UnreachableError
from .netgen import Graph

REL_TOL = 1e-9


def node_weights(g: Graph, alpha: float) -> np.ndarray:
    return g.degrees.astype(float) ** alpha


def path_cost(g: Graph, path: Sequence[int], alpha: float) -> float:
    if len(path) < 1:
        raise InvalidPathError("a path needs at least one node")
    for u, v in zip(path, path[1:]):
        if not g.has_edge(u, v):
            raise InvalidPathError(f"nodes {u} and {v} are not adjacent")
    weights = node_weights(g, alpha)
    return float(sum(weights[v] for v in path[:-1]))


@dataclass(frozen=True, eq=False)
class RoutingTable:
    """All-pairs minimum costs plus every optimal successor.

    The optimal successors of ``(s, d)`` are stored flat:
    ``hop_idx[hop_ptr[s * n + d]:hop_ptr[s * n + d + 1]]``.
    """

    alpha: float
    cost: np.ndarray
    hop_ptr: np.ndarray
    hop_idx: np.ndarray

    @cached_property
    def mean_path_hops(self) -> float:
        """Mean hop count of sampled optimal paths, from a fixed random stream."""
        return mean_optimal_hops(self, np.random.default_rng(0))

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    def next_hops(self, s: int, d: int) -> np.ndarray:
        k = s * self.n + d
        return self.hop_idx[self.hop_ptr[k]:self.hop_ptr[k + 1]]


def _optimal_successors(g: Graph, cost: np.ndarray, weights: np.ndarray):
    n = g.n
    counts = np.empty((n, n), dtype=np.int64)
    chunks = []
    for s in range(n):
        nb = g.neighbors(s)
        via = weights[s] + cost[nb, :]
        best = cost[s]
        mask = via <= best + REL_TOL * best
        mask[:, s] = False
        counts[s] = mask.sum(axis=0)
        d_idx, j_idx = np.nonzero(mask.T)  # sorted by destination
        chunks.append(nb[j_idx])
    hop_ptr = np.zeros(n * n + 1, dtype=np.int64)
    np.cumsum(counts.ravel(), out=hop_ptr[1:])
    hop_idx = np.concatenate(chunks).astype(np.int64) if chunks else np.empty(0, np.int64)
    return hop_ptr, hop_idx


def build_tables(g: Graph, alpha: float) -> RoutingTable:
    """Build the routing table for ``g`` under control parameter ``alpha``.

    Costs come from one label-setting search per destination over the reversed
    graph, where stepping back from ``v`` to ``u`` costs ``k(u) ** alpha``; this
    accumulates each cost in the same order as the Bellman recurrence
    ``cost(s, d) = k(s) ** alpha + cost(v, d)``.
    """
    if not np.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha}")
    weights = node_weights(g, alpha)
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    # reversed edge v -> u carries the weight of u
    rev = csr_matrix((weights[rows], (g.indices, rows)), shape=(g.n, g.n))
    cost = dijkstra(rev, directed=True).T.copy()
    bad = np.argwhere(~np.isfinite(cost))
    if len(bad):
        s, d = map(int, bad[0])
        raise UnreachableError(s, d)
    hop_ptr, hop_idx = _optimal_successors(g, cost, weights)
    return RoutingTable(float(alpha), cost, hop_ptr, hop_idx)


def next_hop(table: RoutingTable, at: int, dst: int, rng: np.random.Generator) -> int:
    if at == dst:
        raise ContractError(f"packet is already at its destination {dst}")
    options = table.next_hops(at, dst)
    return int(options[rng.integers(len(options))])


def sample_path_lengths(table: RoutingTable, rng: np.random.Generator) -> np.ndarray:
    """Hop count of one sampled optimal path for every ordered pair, as an n-by-n array.

    All pairs advance together, one hop per iteration, each picking a uniform
    optimal successor.
    """
    n = table.n
    src, dst = np.divmod(np.arange(n * n), n)
    at = src.copy()
    hops = np.zeros(n * n, dtype=np.int64)
    active = np.flatnonzero(at != dst)
    while len(active):
        key = at[active] * n + dst[active]
        lo = table.hop_ptr[key]
        width = table.hop_ptr[key + 1] - lo
        pick = lo + (rng.random(len(active)) * width).astype(np.int64)
        at[active] = table.hop_idx[pick]
        hops[active] += 1
        active = active[at[active] != dst[active]]
    return hops.reshape(n, n)


def mean_optimal_hops(table: RoutingTable, rng: np.random.Generator) -> float:
    n = table.n
    if n < 2:
        return 0.0
    return float(sample_path_lengths(table, rng).sum()) / (n * (n - 1))


def dump_table(table: RoutingTable, path: str | PathLike) -> None:
    """Write ``s d cost h1,h2,...`` lines for every ordered pair ``s != d``."""
    n = table.n
    with open(path, "w", newline="\n") as fh:
        for s in range(n):
            lines = []
            for d in range(n):
                if d != s:
                    hops = ",".join(map(str, table.next_hops(s, d).tolist()))
                    lines.append(f"{s} {d} {float(table.cost[s, d])!r} {hops}\n")
            fh.writelines(lines)
