"""Discrete-time bufferless transmission.

Every step has two phases. In generation each node appends new packets to its
delivery queue until the queue is full. In forwarding the nodes are visited in
a fresh random order and every queued packet leaves: it is absorbed if the next
hop is its destination, otherwise it lands in the preferred next hop's queue
for the following step, or in a randomly probed other neighbour's queue
(a deflection), or it is dropped when every neighbour is full.

The hot loops are numba kernels over flat arrays. :class:`SimState` owns those
arrays and offers a step-by-step Python interface for inspection and tests.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import IO

import numpy as np
from numba import njit

from .errors import ConfigurationError, ParameterError
from .netgen import Graph
from .routing import RoutingTable

# packet record columns
SRC, DST, BIRTH, DEFL, PID = range(5)
# counter slots; the first six are the ledger, windowed by warmup
N_G, N_A, N_L, N_D, ARR_SUM, IN_FLIGHT, NEXT_ID = range(7)

TRACE_FIELDS = ("step", "n_g", "n_a", "n_l", "n_d", "in_flight")


class Outcome(enum.IntEnum):
    ARRIVED = 0
    PLACED = 1
    DEFLECTED = 2
    DROPPED = 3


@dataclass(frozen=True)
class EngineParams:
    rho: float
    C: float
    T: int = 1000
    warmup: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.rho >= 0:
            raise ParameterError(f"rho must be >= 0, got {self.rho}")
        if not self.C > 0:
            raise ParameterError(f"C must be > 0, got {self.C}")
        if self.T < 1:
            raise ParameterError(f"T must be >= 1, got {self.T}")
        if not 0 <= self.warmup < self.T:
            raise ParameterError(f"warmup must lie in [0, T), got {self.warmup}")


@dataclass(frozen=True)
class Packet:
    id: int
    src: int
    dst: int
    birth: int
    deflections: int


@dataclass(frozen=True)
class RunLedger:
    """Counts for packets born at or after the warmup step."""

    n_g: int = 0
    n_a: int = 0
    n_l: int = 0
    n_d: int = 0
    arrival_time_sum: int = 0
    in_flight: int = 0

    @property
    def conserved(self) -> bool:
        return self.n_g == self.n_a + self.n_l + self.in_flight


def capacities(g: Graph, C: float) -> np.ndarray:
    """Per-node queue size ``max(1, floor(C * k))``."""
    # relative nudge so products like 0.29 * 100 do not floor one slot short
    raw = np.floor(C * g.degrees * (1 + 1e-12))
    return np.maximum(1, raw).astype(np.int64)


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, inline="always")
def _below(rng, k):
    # uniform index in [0, k); rng.integers is several times slower under numba
    return int(rng.random() * k)


@njit(cache=True)
def compact_hops(hop_ptr, hop_idx, n):
    """Dense successor table: entry ``s * n + d`` is the unique optimal successor,
    or ``-(offset + 1)`` pointing at ``[count, h1, h2, ...]`` in the tie list."""
    hops = np.full(n * n, n, dtype=np.int32)
    n_ties = 0
    for key in range(n * n):
        w = hop_ptr[key + 1] - hop_ptr[key]
        if w > 1:
            n_ties += w + 1
    ties = np.zeros(n_ties, dtype=np.int32)
    off = 0
    for key in range(n * n):
        lo = hop_ptr[key]
        w = hop_ptr[key + 1] - lo
        if w == 1:
            hops[key] = hop_idx[lo]
        elif w > 1:
            hops[key] = -(off + 1)
            ties[off] = w
            for j in range(w):
                ties[off + 1 + j] = hop_idx[lo + j]
            off += w + 1
    return hops, ties


@njit(cache=True, inline="always")
def _arrive(row, step, warmup, counters):
    if row[BIRTH] >= warmup:
        counters[N_A] += 1
        counters[ARR_SUM] += step - row[BIRTH] + 1
        counters[IN_FLIGHT] -= 1


@njit(cache=True, inline="always")
def _place(row, node, q_off, nxt, nxt_len):
    dest = nxt[q_off[node] + nxt_len[node]]
    for f in range(5):
        dest[f] = row[f]
    nxt_len[node] += 1


@njit(cache=True, inline="always")
def _generate(node, rho, step, warmup, rng, n, q_off, cap, cur, cur_len, counters):
    attempts = int(rho)
    frac = rho - attempts
    if frac > 0.0 and rng.random() < frac:
        attempts += 1
    made = 0
    for _ in range(attempts):
        if cur_len[node] >= cap[node]:
            break
        dst = _below(rng, n - 1)
        if dst >= node:
            dst += 1
        row = cur[q_off[node] + cur_len[node]]
        row[SRC] = node
        row[DST] = dst
        row[BIRTH] = step
        row[DEFL] = 0
        row[PID] = counters[NEXT_ID]
        counters[NEXT_ID] += 1
        if step >= warmup:
            counters[N_G] += 1
            counters[IN_FLIGHT] += 1
        cur_len[node] += 1
        made += 1
    return made


@njit(cache=True, inline="always")
def _forward(row, at, step, warmup, rng, n, indptr, indices, hops, ties,
             q_off, cap, nxt, nxt_len, counters, scratch):
    dst = row[DST]
    counted = row[BIRTH] >= warmup
    code = hops[at * n + dst]
    if code >= 0:
        preferred = code
    else:
        off = -code - 1
        preferred = ties[off + 1 + _below(rng, ties[off])]
    if preferred == dst:
        _arrive(row, step, warmup, counters)
        return 0, dst
    if nxt_len[preferred] < cap[preferred]:
        _place(row, preferred, q_off, nxt, nxt_len)
        return 1, preferred
    left = 0
    for p in range(indptr[at], indptr[at + 1]):
        if indices[p] != preferred:
            scratch[left] = indices[p]
            left += 1
    while left > 0:
        j = _below(rng, left)
        cand = scratch[j]
        scratch[j] = scratch[left - 1]
        left -= 1
        if cand == dst or nxt_len[cand] < cap[cand]:
            row[DEFL] += 1
            if counted:
                counters[N_D] += 1
            if cand == dst:
                _arrive(row, step, warmup, counters)
                return 0, dst
            _place(row, cand, q_off, nxt, nxt_len)
            return 2, cand
    if counted:
        counters[N_L] += 1
        counters[IN_FLIGHT] -= 1
    return 3, -1


@njit(cache=True)
def _step(step, warmup, rho, order, rng, n, indptr, indices, hops, ties,
          q_off, cap, cur, cur_len, nxt, nxt_len, counters, scratch):
    for node in range(n):
        _generate(node, rho, step, warmup, rng, n, q_off, cap, cur, cur_len, counters)
    for node in order:
        base = q_off[node]
        for k in range(cur_len[node]):
            _forward(cur[base + k], node, step, warmup, rng, n, indptr, indices, hops,
                     ties, q_off, cap, nxt, nxt_len, counters, scratch)
        cur_len[node] = 0


@njit(cache=True)
def _order(rng, n):
    return rng.permutation(n)


@njit(cache=True)
def _run(first, last, warmup, rho, rng, n, indptr, indices, hops, ties,
         q_off, cap, cur, cur_len, nxt, nxt_len, counters, scratch, trace):
    for step in range(first, last):
        order = _order(rng, n)
        _step(step, warmup, rho, order, rng, n, indptr, indices, hops, ties,
              q_off, cap, cur, cur_len, nxt, nxt_len, counters, scratch)
        cur, nxt = nxt, cur
        cur_len, nxt_len = nxt_len, cur_len
        if trace.shape[0] > 0:
            row = step - first
            trace[row, 0] = step
            trace[row, 1] = counters[N_G]
            trace[row, 2] = counters[N_A]
            trace[row, 3] = counters[N_L]
            trace[row, 4] = counters[N_D]
            trace[row, 5] = counters[IN_FLIGHT]
    # odd step counts leave the live queues in the caller's spare buffers
    if (last - first) % 2 == 1:
        nxt[:] = cur
        nxt_len[:] = cur_len
        cur_len[:] = 0


# ---------------------------------------------------------------------------
# python-side state


class SimState:
    """Mutable simulation state for one run.

    ``step_index`` is the next step to execute. Between steps the packets in
    flight sit in the current queues, in arrival order. Each queue position
    holds the packet record itself (source, destination, birth, deflections,
    id), so forwarding copies a row into the receiver's next-step queue.
    """

    def __init__(self, g: Graph, table: RoutingTable, params: EngineParams,
                 rng: np.random.Generator | None = None):
        if table.n != g.n:
            raise ConfigurationError(
                f"routing table covers {table.n} nodes but the graph has {g.n}", field="table")
        if g.n < 2:
            raise ConfigurationError("need at least two nodes", field="N")
        self.g = g
        self.table = table
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng(params.seed)
        self.cap = capacities(g, params.C)
        self.q_off = np.zeros(g.n + 1, dtype=np.int64)
        np.cumsum(self.cap, out=self.q_off[1:])
        size = int(self.q_off[-1])
        self.cur = np.zeros((size, 5), dtype=np.int64)
        self.nxt = np.zeros((size, 5), dtype=np.int64)
        self.cur_len = np.zeros(g.n, dtype=np.int64)
        self.nxt_len = np.zeros(g.n, dtype=np.int64)
        self.counters = np.zeros(7, dtype=np.int64)
        self.scratch = np.zeros(max(1, int(g.degrees.max())), dtype=np.int64)
        self.indptr = g.indptr.astype(np.int64)
        self.indices = g.indices.astype(np.int64)
        self.hops, self.ties = compact_hops(table.hop_ptr, table.hop_idx, g.n)
        self.step_index = 0

    # -- inspection ---------------------------------------------------------

    @property
    def ledger(self) -> RunLedger:
        c = self.counters
        return RunLedger(int(c[N_G]), int(c[N_A]), int(c[N_L]), int(c[N_D]),
                         int(c[ARR_SUM]), int(c[IN_FLIGHT]))

    @property
    def in_flight_total(self) -> int:
        """Packets in the system, warmup cohort included."""
        return int(self.cur_len.sum())

    @staticmethod
    def _packets(rows: np.ndarray) -> list[Packet]:
        return [Packet(int(r[PID]), int(r[SRC]), int(r[DST]), int(r[BIRTH]), int(r[DEFL]))
                for r in rows]

    def queue(self, node: int) -> list[Packet]:
        base = self.q_off[node]
        return self._packets(self.cur[base:base + self.cur_len[node]])

    def incoming(self, node: int) -> list[Packet]:
        """Packets already placed into ``node``'s queue for the next step."""
        base = self.q_off[node]
        return self._packets(self.nxt[base:base + self.nxt_len[node]])

    # -- mutation ------------------------------------------------------------

    def inject(self, src: int, dst: int) -> Packet:
        """Append a packet born now to ``src``'s queue, as if generated there."""
        if src == dst:
            raise ParameterError("a packet's destination must differ from its source")
        if self.cur_len[src] >= self.cap[src]:
            raise ParameterError(f"queue of node {src} is full")
        c = self.counters
        pos = self.q_off[src] + self.cur_len[src]
        self.cur[pos] = (src, dst, self.step_index, 0, c[NEXT_ID])
        c[NEXT_ID] += 1
        if self.step_index >= self.params.warmup:
            c[N_G] += 1
            c[IN_FLIGHT] += 1
        self.cur_len[src] += 1
        return self._packets(self.cur[pos:pos + 1])[0]

    def generate_packets(self, node: int) -> list[Packet]:
        """Run the generation rule once for ``node``; returns the packets inserted."""
        before = int(self.cur_len[node])
        _generate(node, float(self.params.rho), self.step_index, self.params.warmup, self.rng,
                  self.g.n, self.q_off, self.cap, self.cur, self.cur_len, self.counters)
        return self.queue(node)[before:]

    def forward_packet(self, at: int, index: int = 0) -> tuple[Outcome, int]:
        """Take the packet at ``index`` out of ``at``'s queue and forward it.

        Returns the outcome and the receiving node (the destination on
        arrival, ``-1`` on a drop).
        """
        base = self.q_off[at]
        length = int(self.cur_len[at])
        if not 0 <= index < length:
            raise IndexError(f"node {at} holds {length} packets")
        row = self.cur[base + index].copy()
        self.cur[base + index:base + length - 1] = self.cur[base + index + 1:base + length]
        self.cur_len[at] -= 1
        code, target = _forward(row, at, self.step_index, self.params.warmup, self.rng,
                                self.g.n, self.indptr, self.indices, self.hops, self.ties,
                                self.q_off, self.cap, self.nxt, self.nxt_len, self.counters,
                                self.scratch)
        return Outcome(code), int(target)

    def step(self, order: np.ndarray | None = None) -> None:
        """Execute one full step. ``order`` fixes the forwarding order (default: random)."""
        if order is None:
            order = _order(self.rng, self.g.n)
        order = np.asarray(order, dtype=np.int64)
        _step(self.step_index, self.params.warmup, float(self.params.rho), order, self.rng,
              self.g.n, self.indptr, self.indices, self.hops, self.ties, self.q_off,
              self.cap, self.cur, self.cur_len, self.nxt, self.nxt_len, self.counters,
              self.scratch)
        self._swap()

    def end_step(self) -> None:
        """Close a step driven by hand through ``forward_packet``."""
        self.cur_len[:] = 0
        self._swap()

    def _swap(self) -> None:
        self.cur, self.nxt = self.nxt, self.cur
        self.cur_len, self.nxt_len = self.nxt_len, self.cur_len
        self.step_index += 1

    def advance(self, steps: int, trace: bool = False) -> np.ndarray | None:
        """Run ``steps`` steps in one compiled loop; optionally return the trace rows."""
        rows = np.zeros((steps if trace else 0, len(TRACE_FIELDS)), dtype=np.int64)
        first = self.step_index
        _run(first, first + steps, self.params.warmup, float(self.params.rho), self.rng,
             self.g.n, self.indptr, self.indices, self.hops, self.ties, self.q_off,
             self.cap, self.cur, self.cur_len, self.nxt, self.nxt_len, self.counters,
             self.scratch, rows)
        self.step_index += steps
        return rows if trace else None


def run(g: Graph, table: RoutingTable, params: EngineParams, trace: bool = False):
    """Simulate ``params.T`` steps from empty queues.

    Returns the :class:`RunLedger`, or ``(ledger, trace)`` when ``trace`` is set;
    trace rows hold cumulative counts at the end of each step.
    """
    state = SimState(g, table, params)
    rows = state.advance(params.T, trace=trace)
    return (state.ledger, rows) if trace else state.ledger


def write_trace(rows: np.ndarray, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    writer.writerows(rows.tolist())


def per_step_generation(rows: np.ndarray) -> np.ndarray:
    """Packets generated in each traced step."""
    return np.diff(rows[:, 1], prepend=0)
