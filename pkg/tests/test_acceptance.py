"""End-to-end acceptance checks. Each test prints one ``[PASS]``/``[FAIL]`` line.

Reference setting throughout: N=1000, <k>=4, gamma=3, T=1000, 20 replications,
seeds derived from the fixed base seeds below.
"""

import io
import time

import numpy as np
import pytest

from bufferless.engine import EngineParams, SimState, per_step_generation, run
from bufferless.harness import (
    ExperimentSpec, derive_seeds, resolve, run_sweep, write_sweep_csv,
)
from bufferless.metrics import MetricsReport
from bufferless.netgen import GenParams, fit_tail_exponent, gamma_to_p, price_generate
from bufferless.routing import build_tables

from conftest import random_connected_graph, record_acceptance
from oracles import contention_outcome, simple_path_minima

REFERENCE = dict(N=1000, mean_degree=4, gamma=3, T=1000)
REPS = 20


def replicate(params, base_seed, point, reps=REPS, trace=False):
    """Run ``reps`` independent pipelines; yields (report, table, trace rows)."""
    cfg = resolve(params)
    for r in range(reps):
        graph_seed, engine_seed = derive_seeds(base_seed, point, r)
        g = price_generate(cfg.gen_params(graph_seed))
        table = build_tables(g, cfg.alpha)
        result = run(g, table, cfg.engine_params(engine_seed), trace=trace)
        ledger, rows = result if trace else (result, None)
        yield MetricsReport.from_ledger(ledger), table, rows


def test_routing_matches_exhaustive_paths():
    alphas = (0.0, 0.5, 1.0, 2.0)
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, mismatched = 0.0, 0
    for _ in range(200):
        g = random_connected_graph(int(rng.integers(2, 13)), 0.4, rng)
        weights = np.array([g.degrees.astype(float) ** a for a in alphas])
        minima = simple_path_minima(g.indptr.astype(np.int64), g.indices.astype(np.int64),
                                    weights)
        for a, alpha in enumerate(alphas):
            cost = build_tables(g, alpha).cost
            if alpha == int(alpha):
                mismatched += int(np.count_nonzero(cost != minima[a]))
            else:
                rel = np.abs(cost - minima[a]) / np.maximum(minima[a], 1e-300)
                worst = max(worst, float(rel.max()))
                mismatched += int(np.count_nonzero(rel > 1e-9))
    elapsed = time.perf_counter() - start
    ok = mismatched == 0 and elapsed < 60
    record_acceptance(1, ok, f"{mismatched} mismatched pairs, worst rel err {worst:.1e}, "
                             f"{elapsed:.1f}s")
    assert ok


def test_generator_statistics():
    start = time.perf_counter()
    params = GenParams(N=100_000, m=2, P=0.5, seed=1)
    g = price_generate(params)
    elapsed = time.perf_counter() - start
    m0 = params.m0
    gamma = fit_tail_exponent(g, kmin=4)
    edges_ok = g.edge_count == m0 * (m0 - 1) // 2 + (params.N - m0) * params.m
    mean_k = g.mean_degree
    ok = abs(gamma - 3) <= 0.3 and edges_ok and abs(mean_k - 4) <= 0.04 and elapsed < 30
    record_acceptance(2, ok, f"gamma_hat={gamma:.3f} edges={g.edge_count} <k>={mean_k:.4f} "
                             f"generation {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_load_onsets():
    fixed = dict(REFERENCE, C=2, alpha=1)
    low = run_sweep(ExperimentSpec(fixed, "rho", [0.1, 0.2, 0.3, 0.6, 0.8], reps=REPS,
                                   base_seed=1))
    by_rho = {row.swept_value: row for row in low}
    per_step = {}
    for point, rho in ((5, 3.0), (6, 4.0)):
        tails = [per_step_generation(rows)[-100:].mean()
                 for _, _, rows in replicate(dict(fixed, rho=rho), 1, point, trace=True)]
        per_step[rho] = float(np.mean(tails))
    omega = {r: by_rho[r].omega_mean for r in by_rho}
    eta = {r: by_rho[r].eta_mean for r in by_rho}
    spread = abs(per_step[4.0] - per_step[3.0]) / per_step[3.0]
    checks = {
        "omega(0.1)<0.01": omega[0.1] < 0.01,
        "omega(0.6)>omega(0.2)+0.05": omega[0.6] > omega[0.2] + 0.05,
        "eta(0.2)<0.005": eta[0.2] < 0.005,
        "eta(0.8)>eta(0.3)+0.02": eta[0.8] > eta[0.3] + 0.02,
        "n_g/step within 5%": spread <= 0.05,
    }
    ok = all(checks.values())
    record_acceptance(3, ok, (
        f"omega(0.1,0.2,0.6)=({omega[0.1]:.4f},{omega[0.2]:.4f},{omega[0.6]:.4f}) "
        f"eta(0.2,0.3,0.8)=({eta[0.2]:.5f},{eta[0.3]:.5f},{eta[0.8]:.4f}) "
        f"n_g/step(3,4)=({per_step[3.0]:.1f},{per_step[4.0]:.1f}) spread {spread:.3f}"
        + "".join(f"; {k} failed" for k, v in checks.items() if not v)))
    assert ok


@pytest.mark.slow
def test_large_capacity_regime():
    grid = [0.1, 0.5, 1.0, 2.0, 4.0, 8.0]
    fixed = dict(REFERENCE, rho=2, alpha=1)
    omega, t_a, hops, zero_at = [], [], [], {}
    for point, C in enumerate(grid):
        reports, tables = zip(*[(rep, table) for rep, table, _ in
                                replicate(dict(fixed, C=C), 2, point)])
        omega.append(float(np.mean([r.omega for r in reports])))
        t_a.append(float(np.mean([r.t_a for r in reports])))
        if C >= 8:
            hops.append(float(np.mean([t.mean_path_hops for t in tables])))
            zero_at[C] = (sum(r.eta == 0 for r in reports), sum(r.omega == 0 for r in reports),
                          max(r.eta for r in reports), max(r.omega for r in reports))

    def interior_max(curve):
        return max(curve[1:-1]) > max(curve[0], curve[-1])

    large = [i for i, C in enumerate(grid) if C >= 8]
    checks = {
        "eta=omega=0 at C>=8": all(z[0] == REPS and z[1] == REPS for z in zero_at.values()),
        "T_a within 0.5 of optimal hops": all(abs(t_a[i] - h) <= 0.5
                                              for i, h in zip(large, hops)),
        "omega(C) interior max": interior_max(omega),
        "T_a(C) interior max": interior_max(t_a),
    }
    ok = all(checks.values())
    zeros = " ".join(f"C={C:g}: {z[0]}/{REPS} runs eta=0 (max {z[2]:.4f}), "
                     f"{z[1]}/{REPS} runs omega=0 (max {z[3]:.4f})" for C, z in zero_at.items())
    record_acceptance(4, ok, (
        f"omega(C)={[round(x, 3) for x in omega]} T_a(C)={[round(x, 2) for x in t_a]} "
        f"optimal hops {[round(h, 2) for h in hops]}; {zeros}"
        + "".join(f"; {k} failed" for k, v in checks.items() if not v)))
    assert ok


@pytest.mark.slow
def test_optimal_routing_parameter():
    grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.2]
    rows = run_sweep(ExperimentSpec(dict(REFERENCE, rho=1, C=1), "alpha", grid, reps=REPS,
                                    base_seed=6))
    eta = [row.eta_mean for row in rows]
    best = int(np.argmin(eta))
    ok = 0 < grid[best] < 1 and eta[0] >= 1.1 * eta[best]
    record_acceptance(5, ok, f"eta(alpha)={[round(x, 4) for x in eta]}, minimum at "
                             f"alpha={grid[best]}, eta(0)/min={eta[0] / eta[best]:.2f}")
    assert ok


def test_fuzzed_invariants():
    rng = np.random.default_rng(606)
    violations = []
    checked = 0
    for case in range(100):
        n = int(rng.integers(5, 201))
        m = int(rng.integers(1, 4))
        gamma = float(rng.uniform(2.1, 6.0))
        rho, C = float(rng.uniform(0, 4)), float(rng.uniform(0.1, 4))
        alpha = float(rng.uniform(-1, 2))
        g = price_generate(GenParams(max(n, m + 2), m, gamma_to_p(gamma), seed=case))
        state = SimState(g, build_tables(g, alpha), EngineParams(rho, C, T=60, seed=case))
        for step in range(60):
            if step < 5:
                # drive one step by hand to observe every placement
                for node in range(g.n):
                    state.generate_packets(node)
                for node in rng.permutation(g.n):
                    while state.cur_len[node]:
                        state.forward_packet(node)
                        checked += 1
                        if np.any(state.nxt_len > state.cap) or not state.ledger.conserved:
                            violations.append((case, step))
                state.end_step()
            else:
                state.step()
            checked += 1
            if (np.any(state.cur_len > state.cap) or not state.ledger.conserved
                    or state.ledger.in_flight != state.in_flight_total):
                violations.append((case, step))
    ok = not violations
    record_acceptance(6, ok, f"100 configurations, {checked} observations, "
                             f"{len(violations)} violations {violations[:3]}")
    assert ok


def test_sweep_is_byte_identical():
    spec = ExperimentSpec(dict(REFERENCE, C=2, alpha=1, T=300), "rho", [0.2, 1.0, 3.0],
                          reps=3, base_seed=42)
    texts = []
    for _ in range(2):
        fh = io.StringIO(newline="")
        write_sweep_csv(run_sweep(spec), fh)
        texts.append(fh.getvalue().encode())
    ok = texts[0] == texts[1]
    record_acceptance(7, ok, f"{len(texts[0])} bytes, identical={ok}")
    assert ok


def test_contention_fixture():
    import itertools

    from conftest import path_graph

    mismatches = []
    for order in itertools.permutations(range(3)):
        g = path_graph(3)
        state = SimState(g, build_tables(g, 1.0), EngineParams(0.0, 0.5))
        state.inject(0, 2)
        state.inject(2, 0)
        state.step(order=np.array(order))
        expected = contention_outcome(order)
        got = {"placed_from": [p.src for p in state.queue(1)], "n_l": state.ledger.n_l,
               "n_d": state.ledger.n_d, "n_a": state.ledger.n_a}
        if got != {**expected, "placed_from": [expected["placed_from"]]}:
            mismatches.append((order, got))
    ok = not mismatches
    record_acceptance(8, ok, f"6 processing orders, {len(mismatches)} mismatches")
    assert ok
