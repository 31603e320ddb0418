"""Loss rate, average deflections and arrival time, plus replication aggregates."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from .engine import RunLedger
from .errors import IntegrityError, ParameterError


def check_ledger(ledger: RunLedger) -> None:
    counts = (ledger.n_g, ledger.n_a, ledger.n_l, ledger.n_d, ledger.arrival_time_sum,
              ledger.in_flight)
    if min(counts) < 0:
        raise IntegrityError(f"negative counter in {ledger}")
    if not ledger.conserved:
        raise IntegrityError(
            f"n_g={ledger.n_g} != n_a + n_l + in_flight = "
            f"{ledger.n_a} + {ledger.n_l} + {ledger.in_flight}")
    if ledger.arrival_time_sum < ledger.n_a:
        raise IntegrityError("every arrival takes at least one step")


def loss_rate(ledger: RunLedger) -> float:
    """``n_l / n_g``; 0.0 when nothing was generated (see ``MetricsReport.rates_defined``)."""
    check_ledger(ledger)
    return ledger.n_l / ledger.n_g if ledger.n_g else 0.0


def deflection_avg(ledger: RunLedger) -> float:
    check_ledger(ledger)
    return ledger.n_d / ledger.n_g if ledger.n_g else 0.0


def avg_arrival_time(ledger: RunLedger) -> float:
    """Mean steps from generation to arrival over arrived packets; NaN if none arrived."""
    check_ledger(ledger)
    return ledger.arrival_time_sum / ledger.n_a if ledger.n_a else math.nan


@dataclass(frozen=True)
class MetricsReport:
    eta: float
    omega: float
    t_a: float
    n_g: int
    rates_defined: bool = True
    ta_defined: bool = True

    @classmethod
    def from_ledger(cls, ledger: RunLedger) -> "MetricsReport":
        return cls(loss_rate(ledger), deflection_avg(ledger), avg_arrival_time(ledger),
                   ledger.n_g, ledger.n_g > 0, ledger.n_a > 0)


@dataclass(frozen=True)
class Aggregate:
    """Per-metric mean and sample standard deviation over ``reps`` reports.

    Reports without arrivals are left out of the ``t_a`` statistics;
    ``ta_excluded`` counts them.
    """

    reps: int
    eta_mean: float
    eta_std: float
    omega_mean: float
    omega_std: float
    ta_mean: float
    ta_std: float
    ng_mean: float
    ta_excluded: int = 0


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def aggregate(reports: Sequence[MetricsReport]) -> Aggregate:
    if not reports:
        raise ParameterError("cannot aggregate an empty set of reports")
    eta = _mean_std([r.eta for r in reports])
    omega = _mean_std([r.omega for r in reports])
    arrived = [r.t_a for r in reports if r.ta_defined]
    ta = _mean_std(arrived)
    ng = statistics.fmean(r.n_g for r in reports)
    return Aggregate(len(reports), *eta, *omega, *ta, ng, len(reports) - len(arrived))
