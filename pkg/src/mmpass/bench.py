"""Experiment sweeps and tabular result emission."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .protocols import PROTOCOLS, run_protocol
from .scenario import Scenario

logger = logging.getLogger(__name__)

COLUMNS = (
    "scenario_hash", "protocol", "seed", "sweep_var", "sweep_value",
    "sum_rate_bps_hz", "wall_ms", "status",
)
TRACE_COLUMNS = ("protocol", "seed", "sweep_var", "sweep_value", "iteration", "gbest_fitness")
SWEEP_VARS = ("pmax", "n")


@dataclass
class RunRecord:
    scenario_hash: str
    protocol: str
    seed: int
    sweep_var: str
    sweep_value: float | int | None
    sum_rate: float
    wall_ms: float
    status: str = "ok"
    trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    positions: np.ndarray | None = None
    beta_pa: np.ndarray | None = None
    lam: np.ndarray | None = None
    p_rel: np.ndarray | None = None
    w_power: float = float("nan")
    message: str = ""


def apply_sweep(scenario: Scenario, var: str, value) -> Scenario:
    if var == "pmax":
        return scenario.replace(p_max_dbm=float(value))
    if var == "n":
        return scenario.replace(n_pas=int(value))
    raise ValueError(f"sweep variable must be one of {SWEEP_VARS}, got {var!r}")


def run_once(scenario: Scenario, protocol: str, seed: int,
             sweep_var: str = "", sweep_value=None) -> RunRecord:
    """Run one protocol; failures come back as records with ``status="error"``."""
    start = time.perf_counter()
    try:
        sc = scenario if not sweep_var else apply_sweep(scenario, sweep_var, sweep_value)
        res = run_protocol(protocol, sc, seed=seed)
    except Exception as exc:  # a failed point must not abort the sweep
        logger.warning("%s seed=%s %s=%s failed: %s", protocol, seed, sweep_var, sweep_value, exc)
        return RunRecord(
            scenario.hash(), protocol, seed, sweep_var, sweep_value, float("nan"),
            1e3 * (time.perf_counter() - start), status="error", message=str(exc),
        )
    return RunRecord(
        scenario_hash=scenario.hash(), protocol=protocol, seed=seed,
        sweep_var=sweep_var, sweep_value=sweep_value, sum_rate=res.fitness,
        wall_ms=1e3 * (time.perf_counter() - start), trace=res.trace,
        positions=res.positions, beta_pa=res.beta_pa, lam=res.lam, p_rel=res.p_rel,
        w_power=res.w_power,
    )


def _job(args):
    return run_once(*args)


def sweep(scenario: Scenario, protocols, var: str, values, seeds, workers: int = 1,
          on_record=None) -> list[RunRecord]:
    """One record per (protocol, sweep value, seed), in that nesting order.

    ``on_record`` is called with each record as soon as it is final in the
    deterministic output order.
    """
    protocols = list(protocols)
    for p in protocols:
        if p not in PROTOCOLS:
            raise ValueError(f"unknown protocol {p!r}")
    if var not in SWEEP_VARS:
        raise ValueError(f"sweep variable must be one of {SWEEP_VARS}, got {var!r}")
    seeds = list(seeds)
    if protocols and not seeds:
        raise ValueError("at least one seed is required")
    jobs = [(scenario, p, int(s), var, v) for p in protocols for v in values for s in seeds]
    records = []
    if workers <= 1:
        for job in jobs:
            rec = _job(job)
            records.append(rec)
            if on_record:
                on_record(rec)
        return records
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for rec in pool.map(_job, jobs):
            records.append(rec)
            if on_record:
                on_record(rec)
    return records


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def record_row(rec: RunRecord) -> list[str]:
    return [
        rec.scenario_hash, rec.protocol, str(rec.seed), rec.sweep_var, _fmt(rec.sweep_value),
        _fmt(rec.sum_rate), _fmt(round(rec.wall_ms, 3)), rec.status,
    ]


def emit_results(records, path) -> Path:
    """Write records as CSV with the fixed column order in ``COLUMNS``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow(record_row(rec))
    return path


def emit_traces(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in records:
            for it, val in enumerate(rec.trace):
                writer.writerow([rec.protocol, rec.seed, rec.sweep_var,
                                 _fmt(rec.sweep_value), it, _fmt(val)])
    return path


def read_results(path) -> list[dict]:
    """Parse a results table back, converting numeric columns."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["seed"] = int(row["seed"])
        row["sum_rate_bps_hz"] = float(row["sum_rate_bps_hz"])
        row["wall_ms"] = float(row["wall_ms"])
    return rows


def parse_seeds(text: str) -> list[int]:
    """Seeds from ``"0..19"``, ``"0-19"``, ``"3"`` or ``"1,4,7"``."""
    text = text.strip()
    for sep in ("..", "-"):
        if sep in text and not text.startswith("-"):
            lo, hi = text.split(sep, 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {text!r}")
            return list(range(lo, hi + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def parse_values(text: str, var: str) -> list:
    cast = int if var == "n" else float
    return [cast(v) for v in text.split(",") if v.strip()]
