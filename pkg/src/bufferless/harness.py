"""Parameter sweeps: generate -> route -> simulate -> reduce, replicated and seeded.

A configuration is a flat key/value mapping (YAML on disk). Recognised keys:

=================  ==========================================================
``N``              node count
``m``              links per new node (or give ``mean_degree`` = 2m)
``mean_degree``    average degree, an even integer
``m0``             seed clique size (default ``m + 1``)
``gamma``          degree exponent (or give ``P`` directly; not both)
``P``              preferential attachment probability
``rho``            packets generated per node per step
``C``              delivery coefficient, queue size ``floor(C * k)``
``alpha``          routing control parameter
``T``              steps per run (default 1000)
``warmup``         leading steps left out of the metrics (default 0)
``reps``           replications per sweep point (default 20)
``base_seed``      root of every derived seed (default 0)
``regenerate_graph``  fresh graph per replication (default true)
``swept``          name of the parameter to sweep
``values``         list of values for the swept parameter, increasing
=================  ==========================================================
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .engine import EngineParams, run
from .errors import ConfigurationError, DomainError, ParameterError
from .metrics import Aggregate, MetricsReport, aggregate
from .netgen import GenParams, Graph, gamma_to_p, price_generate
from .routing import RoutingTable, build_tables

OUTPUT_DIR_ENV = "BUFFERLESS_OUTPUT_DIR"
FULL_REPS = 100
DESK_REPS = 20

SWEEP_HEADER = ("swept_name", "swept_value", "omega_mean", "omega_std", "eta_mean", "eta_std",
                "ta_mean", "ta_std", "ng_mean", "reps")

MODEL_KEYS = ("N", "m", "mean_degree", "m0", "gamma", "P", "rho", "C", "alpha", "T", "warmup")
TOPOLOGY_KEYS = ("N", "m", "mean_degree", "m0", "gamma", "P")
SPEC_KEYS = ("reps", "base_seed", "regenerate_graph", "swept", "values")
INT_KEYS = {"N", "m", "m0", "T", "warmup", "reps", "base_seed"}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved parameters of one pipeline run."""

    N: int
    m: int
    P: float
    rho: float
    C: float
    alpha: float
    m0: int | None = None
    T: int = 1000
    warmup: int = 0

    def gen_params(self, seed: int) -> GenParams:
        return GenParams(N=self.N, m=self.m, P=self.P, m0=self.m0, seed=seed)

    def engine_params(self, seed: int) -> EngineParams:
        return EngineParams(rho=self.rho, C=self.C, T=self.T, warmup=self.warmup, seed=seed)


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "results"))


def coerce(key: str, value: Any) -> Any:
    if isinstance(value, (dict, list)):
        raise ConfigurationError(f"{key} must be a scalar", field=key)
    try:
        if key == "regenerate_graph":
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if key == "swept":
            return str(value)
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be a number, got {value!r}", field=key) from None
    if key in INT_KEYS:
        if number != int(number):
            raise ConfigurationError(f"{key} must be an integer, got {value!r}", field=key)
        return int(number)
    return number


def _coerce_all(params: Mapping[str, Any]) -> dict:
    unknown = set(params) - set(MODEL_KEYS)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigurationError(f"unknown parameter {key}", field=key)
    return {k: coerce(k, v) for k, v in params.items() if v is not None}


def _field_of(exc: ParameterError) -> str | None:
    # messages lead with the offending parameter's name
    msg = str(exc)
    return next((f for f in MODEL_KEYS if msg.startswith(f + " ")), None)


def resolve_topology(params: Mapping[str, Any], seed: int = 0) -> GenParams:
    """Generator parameters from ``N``, ``m``/``mean_degree``, ``gamma``/``P`` and ``m0``."""
    p = _coerce_all(params)
    if "N" not in p:
        raise ConfigurationError("missing required parameter N", field="N")
    if ("m" in p) == ("mean_degree" in p):
        raise ConfigurationError("give exactly one of m and mean_degree", field="m")
    if "mean_degree" in p:
        k = p["mean_degree"]
        if k < 2 or k != int(k) or int(k) % 2:
            raise ConfigurationError(f"mean_degree must be an even integer >= 2, got {k}",
                                     field="mean_degree")
        p["m"] = int(k) // 2
    if ("gamma" in p) == ("P" in p):
        raise ConfigurationError("give exactly one of gamma and P", field="gamma")
    if "gamma" in p:
        try:
            p["P"] = gamma_to_p(p["gamma"])
        except DomainError as exc:
            raise ConfigurationError(str(exc), field="gamma") from None
    try:
        return GenParams(N=p["N"], m=p["m"], P=p["P"], m0=p.get("m0"), seed=seed)
    except ParameterError as exc:
        raise ConfigurationError(str(exc), field=_field_of(exc)) from None


def resolve_transport(params: Mapping[str, Any], seed: int = 0) -> tuple[EngineParams, float]:
    """Engine parameters and ``alpha`` from ``rho``, ``C``, ``alpha``, ``T``, ``warmup``."""
    p = _coerce_all(params)
    for key in ("rho", "C", "alpha"):
        if key not in p:
            raise ConfigurationError(f"missing required parameter {key}", field=key)
    if not math.isfinite(p["alpha"]):
        raise ConfigurationError("alpha must be finite", field="alpha")
    try:
        engine = EngineParams(rho=p["rho"], C=p["C"], T=p.get("T", 1000),
                              warmup=p.get("warmup", 0), seed=seed)
    except ParameterError as exc:
        raise ConfigurationError(str(exc), field=_field_of(exc)) from None
    return engine, p["alpha"]


def resolve(params: Mapping[str, Any]) -> RunConfig:
    """Turn a flat parameter mapping into a :class:`RunConfig`, validating as it goes."""
    gen = resolve_topology(params)
    engine, alpha = resolve_transport(params)
    return RunConfig(N=gen.N, m=gen.m, P=gen.P, rho=engine.rho, C=engine.C, alpha=alpha,
                     m0=gen.m0, T=engine.T, warmup=engine.warmup)


@dataclass(frozen=True)
class ExperimentSpec:
    fixed: Mapping[str, Any]
    swept: str
    values: Sequence[float]
    reps: int = DESK_REPS
    base_seed: int = 0
    regenerate_graph: bool = True

    def __post_init__(self):
        if self.swept not in MODEL_KEYS:
            raise ConfigurationError(f"cannot sweep unknown parameter {self.swept}", field="swept")
        if self.swept in self.fixed:
            raise ConfigurationError(f"{self.swept} is swept and must not be fixed too",
                                     field=self.swept)
        if self.reps < 1:
            raise ConfigurationError("reps must be >= 1", field="reps")
        if not self.values:
            raise ConfigurationError("values must not be empty", field="values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigurationError("values must be strictly increasing", field="values")

    def point(self, index: int) -> RunConfig:
        return resolve({**self.fixed, self.swept: self.values[index]})

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "ExperimentSpec":
        raw = dict(raw)
        unknown = set(raw) - set(MODEL_KEYS) - set(SPEC_KEYS)
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigurationError(f"unknown config key {key}", field=key)
        if "swept" not in raw:
            raise ConfigurationError("missing required key swept", field="swept")
        values = raw.pop("values", None)
        if not isinstance(values, list):
            raise ConfigurationError("values must be a list", field="values")
        swept = coerce("swept", raw.pop("swept"))
        opts = {k: coerce(k, raw.pop(k)) for k in ("reps", "base_seed", "regenerate_graph")
                if k in raw}
        return cls(fixed=raw, swept=swept, values=[coerce(swept, v) for v in values], **opts)


@dataclass(frozen=True)
class SweepRow:
    swept_name: str
    swept_value: float
    omega_mean: float
    omega_std: float
    eta_mean: float
    eta_std: float
    ta_mean: float
    ta_std: float
    ng_mean: float
    reps: int
    ta_excluded: int = field(default=0, compare=False)

    @classmethod
    def from_aggregate(cls, name: str, value: float, agg: Aggregate) -> "SweepRow":
        return cls(name, value, agg.omega_mean, agg.omega_std, agg.eta_mean, agg.eta_std,
                   agg.ta_mean, agg.ta_std, agg.ng_mean, agg.reps, agg.ta_excluded)

    def csv_fields(self) -> list:
        return [getattr(self, name) for name in SWEEP_HEADER]


# ---------------------------------------------------------------------------
# seeds and the single-run pipeline


def derive_seeds(base_seed: int, point: int, rep: int) -> tuple[int, int]:
    """``(graph_seed, engine_seed)`` for replication ``rep`` of sweep point ``point``."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(point, rep))
    graph_seed, engine_seed = ss.generate_state(2, dtype=np.uint64)
    return int(graph_seed), int(engine_seed)


def shared_graph_seed(base_seed: int) -> int:
    return int(np.random.SeedSequence(base_seed).generate_state(1, dtype=np.uint64)[0])


@lru_cache(maxsize=4)
def _shared_substrate(gen: GenParams, alpha: float) -> tuple[Graph, RoutingTable]:
    g = price_generate(gen)
    return g, build_tables(g, alpha)


def run_once(cfg: RunConfig, graph_seed: int, engine_seed: int,
             shared_graph: bool = False) -> MetricsReport:
    gen = cfg.gen_params(graph_seed)
    if shared_graph:
        g, table = _shared_substrate(gen, cfg.alpha)
    else:
        g = price_generate(gen)
        table = build_tables(g, cfg.alpha)
    ledger = run(g, table, cfg.engine_params(engine_seed))
    return MetricsReport.from_ledger(ledger)


def _job(args):
    return run_once(*args)


def run_sweep(spec: ExperimentSpec, jobs: int = 1, progress=None) -> list[SweepRow]:
    """Run every replication of every sweep point and aggregate per point.

    Results are reduced in (point, replication) order, so the output does not
    depend on ``jobs``. ``progress``, if given, is called as
    ``progress(point_index, value)`` before each point.
    """
    tasks = []
    for i in range(len(spec.values)):
        try:
            cfg = spec.point(i)
        except ConfigurationError as exc:
            raise ConfigurationError(
                f"sweep point {spec.swept}={spec.values[i]}: {exc}", field=exc.field) from None
        for r in range(spec.reps):
            graph_seed, engine_seed = derive_seeds(spec.base_seed, i, r)
            if not spec.regenerate_graph:
                graph_seed = shared_graph_seed(spec.base_seed)
            tasks.append((cfg, graph_seed, engine_seed, not spec.regenerate_graph))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_job, tasks, chunksize=1))
    else:
        reports = []
        for k, task in enumerate(tasks):
            if progress is not None and k % spec.reps == 0:
                progress(k // spec.reps, spec.values[k // spec.reps])
            reports.append(_job(task))

    rows = []
    for i, value in enumerate(spec.values):
        chunk = reports[i * spec.reps:(i + 1) * spec.reps]
        rows.append(SweepRow.from_aggregate(spec.swept, value, aggregate(chunk)))
    return rows


# ---------------------------------------------------------------------------
# files


def load_config(path: str | os.PathLike | None, overrides: Iterable[str] = ()) -> dict:
    """Read a flat YAML mapping and apply ``KEY=VALUE`` overrides."""
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"{path}: expected a key/value mapping")
        raw.update(loaded)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"override {item!r} is not KEY=VALUE")
        raw[key.strip()] = yaml.safe_load(value)
    for key, value in raw.items():
        if isinstance(value, dict) or (isinstance(value, list) and key != "values"):
            raise ConfigurationError(f"{key} must be a scalar", field=key)
    return raw


def model_params(raw: Mapping[str, Any]) -> dict:
    return {k: v for k, v in raw.items() if k not in SPEC_KEYS}


def write_sweep_csv(rows: Sequence[SweepRow], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow(row.csv_fields())


def read_sweep_csv(fh: IO[str]) -> list[SweepRow]:
    rows = []
    for rec in csv.DictReader(fh):
        rows.append(SweepRow(
            rec["swept_name"], float(rec["swept_value"]),
            *(float(rec[k]) for k in SWEEP_HEADER[2:9]), int(rec["reps"])))
    return rows


REPORT_HEADER = ("eta", "omega", "t_a", "n_g")


def write_report_csv(report: MetricsReport, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    writer.writerow([report.eta, report.omega, report.t_a, report.n_g])


__all__ = [
    "RunConfig", "ExperimentSpec", "SweepRow", "resolve", "resolve_topology",
    "resolve_transport", "derive_seeds", "run_once", "run_sweep", "load_config", "model_params", "write_sweep_csv", "read_sweep_csv",
    "write_report_csv", "default_output_dir", "SWEEP_HEADER", "FULL_REPS", "DESK_REPS",
]
