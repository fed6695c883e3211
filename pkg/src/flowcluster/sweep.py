"""Sweep execution: every (axis value, repetition) point of a SweepSpec.

Points are independent scenarios, so they may run on parallel worker
processes; results are merged in (value, repetition) order no matter which
worker finishes first. A failed point never discards the others - it is
reported in the outcome and the caller decides how loud to be.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from . import metrics
from .config import SweepSpec
from .engine import ScenarioConfig, SimResult, run
from .metrics import CSV_HEADER, MetricsReport


@dataclass(frozen=True)
class SweepRun:
    axis_value: object
    repetition: int
    seed: int
    report: Optional[MetricsReport]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass(frozen=True)
class SweepOutcome:
    axis: str
    runs: tuple[SweepRun, ...]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.runs)

    def csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.runs:
            if r.report is not None:
                lines.extend(metrics.report_rows(r.report))
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        rows = [
            (float(r.axis_value), r.report) for r in self.runs if r.report is not None
        ]
        return metrics.sweep_summary(rows)

    def manifest(self) -> list[dict]:
        return [
            {
                "axis_value": r.axis_value,
                "repetition": r.repetition,
                "seed": r.seed,
                "status": "ok" if r.ok else "failed",
                "error": r.error,
                "run_id": r.report.run_id if r.report else None,
            }
            for r in self.runs
        ]


def _run_point(cfg: ScenarioConfig) -> SimResult:
    return run(cfg)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepOutcome:
    """Run every sweep point; deterministic output for a given spec."""
    points = spec.points()
    results: list[SweepRun] = []
    if workers <= 1:
        for value, rep, cfg in points:
            results.append(_execute(value, rep, cfg))
    else:
        # spawn, not fork: the sweep may be driven from a threaded server
        import multiprocessing

        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = [
                (value, rep, cfg, pool.submit(_run_point, cfg))
                for value, rep, cfg in points
            ]
            for value, rep, cfg, future in futures:
                try:
                    results.append(SweepRun(value, rep, cfg.seed, future.result().report))
                except Exception as exc:  # worker failure: keep the rest
                    results.append(SweepRun(value, rep, cfg.seed, None, error=str(exc)))
    return SweepOutcome(axis=spec.axis, runs=tuple(results))


def _execute(value, rep, cfg: ScenarioConfig) -> SweepRun:
    try:
        return SweepRun(value, rep, cfg.seed, run(cfg).report)
    except Exception as exc:
        return SweepRun(value, rep, cfg.seed, None, error=str(exc))
