"""Scale-free substrate generation with the Price model's fast algorithm.

Each new node attaches ``m`` links. For every link a uniform number ``r`` is
drawn; if ``r < P`` the target is copied from the target-label array ``Arr``
(which realises preferential attachment), otherwise it is a uniformly chosen
existing node. The resulting degree tail has exponent ``(1 + P) / P``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, ParameterError

MAX_REDRAWS = 10_000


@dataclass(frozen=True)
class GenParams:
    N: int
    m: int
    P: float
    m0: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.m0 is None:
            # smallest clique that still offers m distinct targets
            object.__setattr__(self, "m0", self.m + 1)
        if self.m < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if self.m0 < self.m + 1:
            raise ParameterError(f"m0 must be >= m + 1, got m0={self.m0}, m={self.m}")
        if self.N < self.m0:
            raise ParameterError(f"N must be >= m0, got N={self.N}, m0={self.m0}")
        if not 0.0 <= self.P <= 1.0:
            raise ParameterError(f"P must lie in [0, 1], got {self.P}")

    @property
    def gamma(self) -> float:
        return math.inf if self.P == 0 else (1.0 + self.P) / self.P

    @property
    def expected_edges(self) -> int:
        return self.m0 * (self.m0 - 1) // 2 + (self.N - self.m0) * self.m


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph in compressed sparse row form.

    ``indices[indptr[i]:indptr[i + 1]]`` are the neighbours of node ``i``,
    sorted ascending.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    seed: int | None = None
    degrees: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "degrees", np.diff(self.indptr).astype(np.int64))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], seed: int | None = None) -> "Graph":
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise ParameterError(f"edge endpoint outside 0..{n - 1}")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ParameterError("self-loops are not allowed")
        both = np.concatenate([pairs, pairs[:, ::-1]])
        if len(np.unique(both, axis=0)) != len(both):
            raise ParameterError("duplicate edges are not allowed")
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, both[:, 0] + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, both[:, 1].copy(), seed)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n)]

    @property
    def edge_count(self) -> int:
        return int(self.indptr[-1]) // 2

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.edge_count / self.n

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        pos = np.searchsorted(nb, v)
        return bool(pos < len(nb) and nb[pos] == v)

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield each edge once as ``(u, v)`` with ``u < v``, ascending."""
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    yield u, int(v)

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return bool(seen.all())


def gamma_to_p(gamma: float) -> float:
    """Preferential probability giving degree exponent ``gamma``: ``P = 1 / (gamma - 1)``."""
    if not gamma >= 2.0:
        raise DomainError(f"gamma must be >= 2 so that P <= 1, got {gamma}")
    return 1.0 / (gamma - 1.0)


def seed_targets(m0: int) -> list[int]:
    """Target array for an ``m0``-clique read as a complete digraph."""
    return [j for i in range(m0) for j in range(m0) if i != j]


def choose_targets(arr: Sequence[int], n_existing: int, m: int, P: float,
                   rng: np.random.Generator) -> list[int]:
    """Pick ``m`` distinct targets for the node about to be added.

    Collisions are redrawn; after ``MAX_REDRAWS`` failed draws for one link the
    target falls back to a uniform pick among the nodes not chosen yet.
    """
    chosen: list[int] = []
    for _ in range(m):
        for _ in range(MAX_REDRAWS):
            if rng.random() < P:
                t = arr[int(rng.integers(len(arr)))]
            else:
                t = int(rng.integers(n_existing))
            if t not in chosen:
                break
        else:
            rest = sorted(set(range(n_existing)).difference(chosen))
            t = rest[int(rng.integers(len(rest)))]
        chosen.append(t)
    return chosen


def price_generate(params: GenParams, return_targets: bool = False):
    """Grow a Price-model graph.

    Parameters
    ----------
    params : GenParams
    return_targets : bool
        Also return the final target-label array ``Arr``.

    Returns
    -------
    Graph, or ``(Graph, list[int])`` when ``return_targets`` is set.
    """
    rng = np.random.default_rng(params.seed)
    m0, m = params.m0, params.m
    arr = seed_targets(m0)
    edges = [(i, j) for i in range(m0) for j in range(i + 1, m0)]
    for new in range(m0, params.N):
        targets = choose_targets(arr, new, m, params.P, rng)
        edges.extend((t, new) for t in targets)
        arr.extend(targets)
    g = Graph.from_edges(params.N, edges, seed=params.seed)
    return (g, arr) if return_targets else g


def fit_tail_exponent(data: Graph | Sequence[float] | np.ndarray, kmin: float,
                      min_samples: int = 100) -> float:
    """Continuous maximum-likelihood tail exponent ``1 + n / sum(ln(k / kmin))``.

    ``data`` is a graph (its degrees are used) or a sample of values. Returns
    ``inf`` when every qualifying value equals ``kmin``.
    """
    values = data.degrees if isinstance(data, Graph) else np.asarray(data, dtype=float)
    tail = values[values >= kmin].astype(float)
    if len(tail) < min_samples:
        raise InsufficientDataError(
            f"need at least {min_samples} values >= {kmin}, found {len(tail)}")
    log_sum = float(np.log(tail / kmin).sum())
    if log_sum == 0.0:
        return math.inf
    return 1.0 + len(tail) / log_sum


def write_edgelist(g: Graph, path: str | PathLike) -> None:
    seed = "none" if g.seed is None else g.seed
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# nodes={g.n} edges={g.edge_count} seed={seed}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def read_edgelist(path: str | PathLike) -> Graph:
    """Parse a file written by :func:`write_edgelist`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ParameterError(f"{path}: missing '# nodes=N edges=E seed=S' header")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        try:
            n, n_edges = int(meta["nodes"]), int(meta["edges"])
        except (KeyError, ValueError) as exc:
            raise ParameterError(f"{path}: malformed header {header!r}") from exc
        seed = None if meta.get("seed", "none") == "none" else int(meta["seed"])
        edges = [tuple(map(int, line.split())) for line in fh if line.strip()]
    if len(edges) != n_edges:
        raise ParameterError(f"{path}: header promises {n_edges} edges, found {len(edges)}")
    return Graph.from_edges(n, edges, seed=seed)
