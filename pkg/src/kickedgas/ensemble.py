"""Ensemble orchestration: N_r independent realizations, deterministic
reduction, and parameter sweeps.

Realizations are grouped into fixed-size batches (SimConfig.batch_size);
batches may be computed by any number of worker processes, but records are
always merged in realization-index order, so the accumulated statistics are
a pure function of (config, constraint, seed) regardless of scheduling.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Callable, Optional, Sequence

import numpy as np

from . import dynamics
from .dynamics import PhaseConstraint, SimConfig  # re-exported: constraints live here
from .observables import EnsembleStats, TrajectoryRecord

__all__ = [
    "PhaseConstraint",
    "SweepPlan",
    "SweepResult",
    "InvalidEnsembleError",
    "run_ensemble",
    "run_sweep",
    "merge",
    "worker_count",
]

#: runs with more than this fraction of aliasing-aborted realizations are invalid
MAX_ABORT_FRACTION = 0.01


class InvalidEnsembleError(RuntimeError):
    """Too many realizations hit the grid edge: the grid is too small."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


def worker_count() -> int:
    """Worker processes for ensemble runs; overridden by KICKEDGAS_WORKERS."""
    env = os.environ.get("KICKEDGAS_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


_WORK = {}


def _init_worker(payload):
    _WORK.update(payload)


def _run_chunk(indices):
    return dynamics.run_batch(
        _WORK["config"],
        indices,
        _WORK["constraint"],
        _WORK["probes"],
        _WORK["snapshot_times"],
        _WORK["hist_snapshots"],
    )


def run_ensemble(
    config: SimConfig,
    constraint: Optional[PhaseConstraint] = None,
    probes: Sequence[str] = dynamics.DEFAULT_PROBES,
    snapshot_times: Sequence[int] = (),
    hist_snapshots: Sequence[tuple] = (),
    workers: Optional[int] = None,
    progress: bool = False,
) -> EnsembleStats:
    """Run config.n_r realizations and accumulate ensemble statistics.

    Aborted (aliased) realizations are excluded and counted; if more than
    MAX_ABORT_FRACTION of the ensemble aborts the run raises
    InvalidEnsembleError carrying the partial statistics.
    """
    probes = tuple(probes)
    if not probes:
        raise dynamics.ConfigError("probes must not be empty")
    workers = worker_count() if workers is None else max(1, int(workers))
    batches = [
        list(range(lo, min(lo + config.batch_size, config.n_r)))
        for lo in range(0, config.n_r, config.batch_size)
    ]
    stats = EnsembleStats.empty(
        np.arange(config.horizon + 1, dtype=np.int64),
        probes,
        snapshot_times,
        hist_snapshots,
        n_s=config.n_s,
    )

    def consume(records):
        for rec in records:
            stats.add_record(rec)
        if progress:
            done = stats.count + stats.aborted
            print(f"\r[{done}/{config.n_r} realizations]",
                  end="", file=sys.stderr, flush=True)

    if workers == 1 or len(batches) == 1:
        for chunk in batches:
            consume(dynamics.run_batch(config, chunk, constraint, probes,
                                       snapshot_times, hist_snapshots))
    else:
        payload = {
            "config": config,
            "constraint": constraint,
            "probes": probes,
            "snapshot_times": tuple(snapshot_times),
            "hist_snapshots": tuple(hist_snapshots),
        }
        ctx = get_context("fork" if sys.platform.startswith("linux") else "spawn")
        with ctx.Pool(workers, initializer=_init_worker,
                      initargs=(payload,)) as pool:
            # ordered imap keeps the reduction in canonical index order
            for records in pool.imap(_run_chunk, batches):
                consume(records)
    if progress:
        print(file=sys.stderr)
    if stats.count + stats.aborted != config.n_r:
        raise RuntimeError("lost realizations during reduction")
    if stats.aborted > MAX_ABORT_FRACTION * config.n_r:
        raise InvalidEnsembleError(
            f"{stats.aborted}/{config.n_r} realizations hit the grid edge; "
            "the momentum grid is too small for this horizon",
            stats=stats,
        )
    return stats


def merge(a: EnsembleStats, b: EnsembleStats) -> EnsembleStats:
    """Order-respecting pooled merge (see observables.EnsembleStats.merge)."""
    return a.merge(b)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepPlan:
    """A list of configurations sharing one swept axis plus a per-point fitter.

    fitter(stats, config) -> value extracted at that point (e.g. tau); the
    cross-point exponent is obtained by fitting value against the axis label.
    """

    configs: Sequence[SimConfig]
    labels: Sequence[float]
    axis: str = "gamma_star"
    fitter: Optional[Callable] = None
    constraint: Optional[PhaseConstraint] = None
    probes: Sequence[str] = dynamics.DEFAULT_PROBES

    def __post_init__(self):
        if len(self.configs) != len(self.labels):
            raise ValueError("one label per configuration required")
        if not self.configs:
            raise ValueError("sweep needs at least one point")


@dataclass
class SweepResult:
    axis: str
    labels: list = field(default_factory=list)
    values: list = field(default_factory=list)      # fitted scalar per point
    stats: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)    # label -> error message

    def summary_rows(self):
        for lab, val in zip(self.labels, self.values):
            yield lab, val


def run_sweep(plan: SweepPlan, workers: Optional[int] = None,
              progress: bool = False) -> SweepResult:
    """Run every sweep point, apply the fitter, keep going on failures."""
    out = SweepResult(axis=plan.axis)
    for config, label in zip(plan.configs, plan.labels):
        try:
            stats = run_ensemble(
                config,
                constraint=plan.constraint,
                probes=plan.probes,
                workers=workers,
                progress=progress,
            )
            value = plan.fitter(stats, config) if plan.fitter else None
            out.labels.append(label)
            out.values.append(value)
            out.stats.append(stats)
        except Exception as exc:  # per-point failure: record, continue
            out.failures[label] = f"{type(exc).__name__}: {exc}"
    return out
