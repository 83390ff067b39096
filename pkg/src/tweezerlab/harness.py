"""Experiment orchestration: batches, duration sweeps, QSL, exports.

Runs persist as JSON lines in a store directory; every writer appends to
its own file and readers merge all ``*.jsonl`` files, so concurrent
workers never contend.  Re-running a sweep against the same store skips
(algorithm, duration, seed) triples that are already present.
"""

import json
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import physics
from .ascent import DEFAULT_SCHEDULE
from .grape import Grape
from .krotov import Krotov
from .params import PhysicsParams, DEFAULT_PARAMS, TIME_PER_STEP
from .protocols import Protocol
from .sa import StochasticAscent

QSL_THRESHOLD = 0.999


@dataclass
class RunRecord:
    """One optimizer run: configuration, outcome, and provenance."""

    run_id: str
    algorithm: str
    config: dict
    rng_seed: int
    fidelity: float
    trace: list
    protocol: Protocol
    wall_seconds: float
    grid_points: int

    def to_json(self) -> str:
        doc = {
            "run_id": self.run_id,
            "algorithm": self.algorithm,
            "config": self.config,
            "rng_seed": self.rng_seed,
            "fidelity": self.fidelity,
            "trace": list(map(float, self.trace)),
            "protocol": self.protocol.to_dict(),
            "wall_seconds": self.wall_seconds,
            "grid_points": self.grid_points,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        doc = json.loads(line)
        return cls(run_id=doc["run_id"], algorithm=doc["algorithm"],
                   config=doc["config"], rng_seed=doc["rng_seed"],
                   fidelity=doc["fidelity"], trace=doc["trace"],
                   protocol=Protocol.from_dict(doc["protocol"]),
                   wall_seconds=doc["wall_seconds"],
                   grid_points=doc["grid_points"])


class RunStore:
    """Append-only JSON-lines store backed by a directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._writer = self.root / f"runs-{os.getpid()}.jsonl"

    def append(self, record: RunRecord) -> None:
        with open(self._writer, "a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")

    def load(self) -> list[RunRecord]:
        records = []
        for path in sorted(self.root.glob("*.jsonl")):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        records.append(RunRecord.from_json(line))
        return records

    def completed_keys(self) -> set:
        return {(r.algorithm, round(r.protocol.duration, 6), r.rng_seed,
                 r.config.get("tag", "")) for r in self.load()}


def verify_record(record: RunRecord, params: PhysicsParams = DEFAULT_PARAMS,
                  targets=None) -> float:
    """Recompute the stored fidelity from the stored protocol."""
    grid = physics.build_grid(record.grid_points)
    if targets is None:
        psi, phi = physics.initial_and_target_states(grid, params)
    else:
        psi, phi = targets
    return physics.fidelity(record.protocol, psi, phi, params, grid)


def steps_for_duration(duration: float) -> int:
    return int(round(duration / TIME_PER_STEP))


def _record(algorithm: str, estimator, seed: int, elapsed: float,
            grid_points: int, config: dict) -> RunRecord:
    return RunRecord(run_id=uuid.uuid4().hex, algorithm=algorithm,
                     config=config, rng_seed=seed,
                     fidelity=estimator.fidelity_,
                     trace=list(map(float, estimator.trace_)),
                     protocol=estimator.protocol_, wall_seconds=elapsed,
                     grid_points=grid_points)


def run_sa_batch(duration: float, n_steps: int, seeds, n_positions: int = 128,
                 amplitude_choices=(160.0,), fix_first_step: bool = False,
                 grid_points: int = 512, params: PhysicsParams = DEFAULT_PARAMS,
                 store: RunStore | None = None, targets=None, tag: str = "",
                 max_sweeps: int = 200) -> list[RunRecord]:
    """Stochastic-ascent restarts sharing one precomputed unitary bank."""
    from .sa import precompute_unitaries

    done = store.completed_keys() if store is not None else set()
    grid = physics.build_grid(grid_points)
    bank = None
    config = {"duration": duration, "n_steps": n_steps,
              "n_positions": n_positions,
              "amplitude_choices": list(amplitude_choices),
              "fix_first_step": fix_first_step, "grid_points": grid_points,
              "tag": tag}
    records = []
    for seed in seeds:
        if ("sa", round(duration, 6), seed, tag) in done:
            continue
        if bank is None:
            bank = precompute_unitaries(duration, n_steps, n_positions,
                                        amplitude_choices, params, grid,
                                        targets=targets)
        est = StochasticAscent(duration=duration, n_steps=n_steps,
                               n_positions=n_positions,
                               amplitude_choices=amplitude_choices,
                               fix_first_step=fix_first_step, rng_seed=seed,
                               grid_points=grid_points, params=params,
                               max_sweeps=max_sweeps)
        t0 = time.time()
        est.fit(bank=bank)
        rec = _record("sa", est, seed, time.time() - t0, grid_points, config)
        records.append(rec)
        if store is not None:
            store.append(rec)
    return records


def _make_gradient_estimator(algorithm: str, **kwargs):
    if algorithm == "grape":
        return Grape(**kwargs)
    if algorithm == "krotov":
        kwargs.pop("learning_rate", None)
        return Krotov(**kwargs)
    raise ValueError(f"unknown gradient algorithm '{algorithm}'")


def run_gradient_batch(algorithm: str, duration: float, n_steps: int, seeds,
                       schedule=DEFAULT_SCHEDULE, learning_rate: float = 0.1,
                       fix_first_step: bool = True,
                       params: PhysicsParams = DEFAULT_PARAMS,
                       store: RunStore | None = None, targets_factory=None,
                       tag: str = "", init: str = "uniform",
                       init_protocol: Protocol | None = None,
                       promote_best: bool = True,
                       estimator_kwargs: dict | None = None) -> list[RunRecord]:
    """Gradient-optimizer restarts at the coarsest resolution, then the
    best protocol promoted through the remaining schedule.

    Restart records carry the coarse resolution; the promoted record (tag
    suffix ``:promoted``) carries the final one.
    """
    done = store.completed_keys() if store is not None else set()
    base_schedule = (schedule[0],)
    config = {"duration": duration, "n_steps": n_steps,
              "schedule": list(schedule), "learning_rate": learning_rate,
              "fix_first_step": fix_first_step, "init": init, "tag": tag}
    records = []
    for seed in seeds:
        if (algorithm, round(duration, 6), seed, tag) in done:
            continue
        est = _make_gradient_estimator(
            algorithm, duration=duration, n_steps=n_steps, init=init,
            init_protocol=init_protocol, learning_rate=learning_rate,
            schedule=base_schedule, rng_seed=seed,
            fix_first_step=fix_first_step, params=params,
            targets_factory=targets_factory, **(estimator_kwargs or {}))
        t0 = time.time()
        est.fit()
        rec = _record(algorithm, est, seed, time.time() - t0, schedule[0],
                      config)
        records.append(rec)
        if store is not None:
            store.append(rec)
    if promote_best and len(schedule) >= 2:
        rec = promote_best_of_batch(algorithm, duration, n_steps,
                                    schedule=schedule,
                                    learning_rate=learning_rate,
                                    fix_first_step=fix_first_step,
                                    params=params, store=store,
                                    targets_factory=targets_factory, tag=tag,
                                    pool=records if store is None else None,
                                    estimator_kwargs=estimator_kwargs)
        if rec is not None:
            records.append(rec)
    return records


def promote_best_of_batch(algorithm: str, duration: float, n_steps: int,
                          schedule=DEFAULT_SCHEDULE, learning_rate: float = 0.1,
                          fix_first_step: bool = True,
                          params: PhysicsParams = DEFAULT_PARAMS,
                          store: RunStore | None = None, targets_factory=None,
                          tag: str = "", pool=None,
                          estimator_kwargs: dict | None = None) -> RunRecord | None:
    """Promote the best coarse-resolution restart through the schedule.

    Idempotent against a store: if the current best restart has already
    been promoted, nothing runs and None is returned.
    """
    if pool is None:
        if store is None:
            raise ValueError("need either a store or an explicit pool")
        pool = [r for r in store.load()
                if r.algorithm == algorithm and r.config.get("tag", "") == tag
                and round(r.protocol.duration, 6) == round(duration, 6)
                and r.grid_points == schedule[0]]
    if not pool:
        return None
    best = max(pool, key=lambda r: r.fidelity)
    promoted_tag = f"{tag}:promoted"
    if store is not None and any(
            r.config.get("tag", "") == promoted_tag and r.algorithm == algorithm
            and round(r.protocol.duration, 6) == round(duration, 6)
            and r.config.get("promoted_from") == best.run_id
            for r in store.load()):
        return None
    kwargs = dict(estimator_kwargs or {})
    for key in ("max_iterations", "patience"):
        # per-stage sequences were aligned with the full schedule; drop the
        # entry for the coarse stage the restarts already ran
        if isinstance(kwargs.get(key), (list, tuple)):
            kwargs[key] = tuple(kwargs[key])[1:]
    est = _make_gradient_estimator(
        algorithm, duration=duration, n_steps=n_steps, init="from-protocol",
        init_protocol=best.protocol, learning_rate=learning_rate,
        schedule=schedule[1:], rng_seed=best.rng_seed,
        fix_first_step=fix_first_step, params=params,
        targets_factory=targets_factory, **kwargs)
    t0 = time.time()
    est.fit()
    config = {"duration": duration, "n_steps": n_steps,
              "schedule": list(schedule), "learning_rate": learning_rate,
              "fix_first_step": fix_first_step, "init": "from-protocol",
              "tag": promoted_tag, "promoted_from": best.run_id}
    rec = _record(algorithm, est, best.rng_seed, time.time() - t0,
                  schedule[-1], config)
    if store is not None:
        store.append(rec)
    return rec


@dataclass
class SweepResult:
    """Best fidelity per duration plus the implied speed limit."""

    best_fidelity: dict
    qsl: float | None
    records: list = field(default_factory=list)


def qsl(best_fidelity: dict, threshold: float = QSL_THRESHOLD) -> float | None:
    """Smallest duration whose best fidelity reaches the threshold."""
    passing = [t for t, f in best_fidelity.items() if f >= threshold]
    return min(passing) if passing else None


def run_sweep(algorithm: str, durations, restarts: int,
              store: RunStore | None = None,
              params: PhysicsParams = DEFAULT_PARAMS, tag: str = "",
              **kwargs) -> SweepResult:
    """Best-of-restarts fidelity per duration; N = round(T / 0.0025)."""
    best = {}
    all_records = []
    for duration in sorted(durations):
        n_steps = steps_for_duration(duration)
        seeds = list(range(restarts))
        if algorithm == "sa":
            recs = run_sa_batch(duration, n_steps, seeds, store=store,
                                params=params, tag=tag, **kwargs)
            pool = recs
            if store is not None:
                pool = [r for r in store.load() if r.algorithm == "sa"
                        and round(r.protocol.duration, 6) == round(duration, 6)
                        and r.config.get("tag", "") == tag]
            best[duration] = max((r.fidelity for r in pool), default=0.0)
            all_records.extend(recs)
        elif algorithm in ("grape", "krotov"):
            recs = run_gradient_batch(algorithm, duration, n_steps, seeds,
                                      store=store, params=params, tag=tag,
                                      **kwargs)
            pool = recs
            if store is not None:
                pool = [r for r in store.load() if r.algorithm == algorithm
                        and round(r.protocol.duration, 6) == round(duration, 6)
                        and r.config.get("tag", "").startswith(tag)]
            final_points = kwargs.get("schedule", DEFAULT_SCHEDULE)[-1]
            finals = [r for r in pool if r.grid_points == final_points]
            best[duration] = max((r.fidelity for r in finals), default=0.0)
            all_records.extend(recs)
        else:
            raise ValueError(f"unknown algorithm '{algorithm}'")
    return SweepResult(best, qsl(best), all_records)


def superposition_experiment(q1: complex, q2: complex, durations,
                             restarts: int, store: RunStore | None = None,
                             params: PhysicsParams = DEFAULT_PARAMS,
                             n_positions: int = 201, grid_points: int = 512,
                             tag: str = "superposition") -> SweepResult:
    """SA sweep against the superposition target q1*phi + q2*psi."""
    grid = physics.build_grid(grid_points)
    psi, phi = physics.initial_and_target_states(grid, params)
    target = physics.superposition_target(phi, psi, q1, q2)
    best = {}
    all_records = []
    for duration in sorted(durations):
        n_steps = steps_for_duration(duration)
        recs = run_sa_batch(duration, n_steps, list(range(restarts)),
                            n_positions=n_positions, grid_points=grid_points,
                            params=params, store=store,
                            targets=(psi, target), tag=tag)
        pool = recs
        if store is not None:
            pool = [r for r in store.load() if r.algorithm == "sa"
                    and round(r.protocol.duration, 6) == round(duration, 6)
                    and r.config.get("tag", "") == tag]
        best[duration] = max((r.fidelity for r in pool), default=0.0)
        all_records.extend(recs)
    return SweepResult(best, qsl(best), all_records)


def export_trace(records: list[RunRecord], path) -> None:
    """CSV columns: run_id, update_index, fidelity."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("run_id,update_index,fidelity\n")
            for rec in records:
                for i, f in enumerate(rec.trace):
                    fh.write(f"{rec.run_id},{i},{f}\n")
    except OSError as exc:
        raise OSError(f"cannot write trace CSV to {path}: {exc}") from exc


def export_excitation(protocol: Protocol, path, n_levels: int = 15,
                      grid_points: int = 512,
                      params: PhysicsParams = DEFAULT_PARAMS) -> None:
    """CSV columns: step, level, population for the lowest levels."""
    grid = physics.build_grid(grid_points)
    psi, _ = physics.initial_and_target_states(grid, params)
    pops = physics.excitation_spectrum(protocol, psi, params, grid, n_levels)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step,level,population\n")
            for k in range(pops.shape[0]):
                for lvl in range(n_levels):
                    fh.write(f"{k},{lvl},{pops[k, lvl]}\n")
    except OSError as exc:
        raise OSError(f"cannot write excitation CSV to {path}: {exc}") from exc
