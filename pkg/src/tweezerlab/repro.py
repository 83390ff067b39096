"""Benchmark experiment recipes backing the acceptance suite.

Every ``ensure_*`` function is idempotent against a :class:`RunStore`:
runs already present are skipped, so the heavy experiments can be
precomputed in the background (``scripts/precompute_acceptance.py``) and
the test suite then reads the same store.  All reported fidelities use
the h_g = 512 grid; gradient optimizers restart at h_g = 32 and promote
the best restart through the resolution schedule with per-stage
iteration caps sized for a single-core box.
"""

import os
from pathlib import Path

import numpy as np

from . import physics
from .harness import (RunRecord, RunStore, _record, promote_best_of_batch,
                      run_gradient_batch, run_sa_batch, steps_for_duration,
                      superposition_experiment)
from .params import DEFAULT_PARAMS
from .protocols import build_heatmap, extract_ridge
from .grape import Grape
from .krotov import Krotov

FINE_SCHEDULE = (32, 64, 128, 256, 512)
# Iteration budget per stage: generous where iterations are cheap, tight
# where one iteration costs seconds (the protocol is nearly converged by
# the time it reaches the fine grids).
STAGE_ITERATIONS = (2000, 2000, 1000, 600, 300)
STAGE_PATIENCE = (50, 50, 50, 30, 20)
ESTIMATOR_KWARGS = {"max_iterations": STAGE_ITERATIONS,
                    "patience": STAGE_PATIENCE}

SUPERPOSITION_Q = (np.sqrt(2) / 2, 1j * np.sqrt(2) / 2)


def default_store() -> RunStore:
    root = os.environ.get("TWEEZERLAB_ACCEPTANCE_STORE")
    if root is None:
        root = Path(__file__).resolve().parents[2] / "acceptance-store"
    return RunStore(root)


def runs_with_tag(store: RunStore, tag: str, algorithm: str | None = None,
                  grid_points: int | None = None) -> list[RunRecord]:
    return [r for r in store.load()
            if r.config.get("tag", "") == tag
            and (algorithm is None or r.algorithm == algorithm)
            and (grid_points is None or r.grid_points == grid_points)]


def best_fidelity(store: RunStore, tag: str, algorithm: str | None = None,
                  grid_points: int | None = 512) -> float:
    pool = runs_with_tag(store, tag, algorithm, grid_points)
    return max((r.fidelity for r in pool), default=0.0)


# ---------------------------------------------------------------------------
# Stochastic-ascent experiments
# ---------------------------------------------------------------------------

def ensure_sa_band(store: RunStore, fixed_first: bool,
                   n_runs: int = 100) -> list[float]:
    """100 restarts at T=0.1, N=40, s=128; returns all final fidelities."""
    tag = "band-fixed" if fixed_first else "band-free"
    run_sa_batch(0.1, 40, list(range(n_runs)), n_positions=128,
                 fix_first_step=fixed_first, store=store, tag=tag)
    return [r.fidelity for r in runs_with_tag(store, tag, "sa", 512)]


def ensure_sa_qsl(store: RunStore, restarts: int = 20) -> float:
    """Best of 20 restarts at T=0.16, N=64, s=201, fixed first step."""
    run_sa_batch(0.16, 64, list(range(restarts)), n_positions=201,
                 fix_first_step=True, store=store, tag="sa-qsl")
    return best_fidelity(store, "sa-qsl", "sa")


def ensure_superposition(store: RunStore, restarts: int = 50) -> list[float]:
    """50 SA repeats against the q1*phi + i*q2*psi target at T=0.2, N=80."""
    q1, q2 = SUPERPOSITION_Q
    superposition_experiment(q1, q2, [0.2], restarts, store=store,
                             tag="superposition")
    return [r.fidelity for r in runs_with_tag(store, "superposition", "sa", 512)]


# ---------------------------------------------------------------------------
# Gradient-optimizer experiments
# ---------------------------------------------------------------------------

def ensure_gradient_batch(store: RunStore, algorithm: str, duration: float,
                          restarts: int = 50, tag: str | None = None) -> float:
    """Uniform-init restarts at h_g=32 plus best-restart promotion to 512."""
    tag = tag or f"{algorithm}-{duration:g}"
    n_steps = steps_for_duration(duration)
    run_gradient_batch(algorithm, duration, n_steps, list(range(restarts)),
                       schedule=FINE_SCHEDULE, store=store, tag=tag,
                       estimator_kwargs=ESTIMATOR_KWARGS)
    return best_fidelity(store, f"{tag}:promoted", algorithm)


def ensure_uniform_qsl(store: RunStore, algorithm: str = "grape",
                       duration: float = 0.20, restarts: int = 50,
                       escalated_restarts: int = 200) -> float:
    """Uniform-init batch with the one sanctioned escalation step.

    If the best-of-``restarts`` promoted fidelity misses 0.999, the batch
    grows once to ``escalated_restarts`` and the (new) best restart is
    promoted before the final verdict.
    """
    tag = f"{algorithm}-uniform-{duration:g}"
    best = ensure_gradient_batch(store, algorithm, duration, restarts, tag=tag)
    if best < 0.999:
        n_steps = steps_for_duration(duration)
        run_gradient_batch(algorithm, duration, n_steps,
                           list(range(escalated_restarts)),
                           schedule=FINE_SCHEDULE, store=store, tag=tag,
                           estimator_kwargs=ESTIMATOR_KWARGS)
        best = best_fidelity(store, f"{tag}:promoted", algorithm)
    return best


def _single_full_run(store: RunStore, algorithm: str, duration: float,
                     tag: str, init: str = "uniform", init_protocol=None,
                     seed: int = 0) -> RunRecord:
    """One gradient run through the full schedule, recorded under ``tag``."""
    existing = runs_with_tag(store, tag, algorithm, 512)
    if existing:
        return max(existing, key=lambda r: r.fidelity)
    n_steps = steps_for_duration(duration)
    cls = Grape if algorithm == "grape" else Krotov
    est = cls(duration=duration, n_steps=n_steps, init=init,
              init_protocol=init_protocol, schedule=FINE_SCHEDULE,
              rng_seed=seed, **ESTIMATOR_KWARGS)
    import time
    t0 = time.time()
    est.fit()
    config = {"duration": duration, "n_steps": n_steps,
              "schedule": list(FINE_SCHEDULE), "init": init, "tag": tag}
    rec = _record(algorithm, est, seed, time.time() - t0, 512, config)
    store.append(rec)
    return rec


def ensure_linear_ramp(store: RunStore, duration: float = 0.16) -> float:
    """Single GRAPE run seeded by the straight-line ramp."""
    rec = _single_full_run(store, "grape", duration,
                           tag=f"grape-linear-{duration:g}", init="linear-ramp")
    return rec.fidelity


def ensure_heat_ridge(store: RunStore, algorithm: str,
                      duration: float = 0.16) -> float:
    """Ridge of the uniform-restart heat map re-optimized as a warm start."""
    tag = f"{algorithm}-{duration:g}"
    ensure_gradient_batch(store, algorithm, duration, tag=tag)
    coarse = runs_with_tag(store, tag, algorithm, FINE_SCHEDULE[0])
    top_k = max(1, len(coarse) // 5)
    hm = build_heatmap([r.protocol for r in coarse],
                       [r.fidelity for r in coarse], top_k)
    ridge = extract_ridge(hm, duration)
    rec = _single_full_run(store, algorithm, duration,
                           tag=f"{algorithm}-heat-{duration:g}",
                           init="from-protocol", init_protocol=ridge)
    return rec.fidelity


def ensure_warm_chain(store: RunStore) -> float:
    """Best T=0.18 GRAPE protocol reused as the T=0.19 initialization."""
    ensure_gradient_batch(store, "grape", 0.18)
    promoted = runs_with_tag(store, "grape-0.18:promoted", "grape", 512)
    if not promoted:
        raise RuntimeError("warm-start chain needs the promoted T=0.18 run")
    best = max(promoted, key=lambda r: r.fidelity)
    rec = _single_full_run(store, "grape", 0.19, tag="grape-warm-0.19",
                           init="from-protocol", init_protocol=best.protocol)
    return rec.fidelity


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def qsl_passing_protocol(store: RunStore):
    """Any stored standard-target protocol with fidelity >= 0.999, or None."""
    for tag in ("sa-qsl", "grape-uniform-0.2:promoted", "grape-linear-0.16"):
        pool = [r for r in runs_with_tag(store, tag, grid_points=512)
                if r.fidelity >= 0.999]
        if pool:
            return max(pool, key=lambda r: r.fidelity).protocol
    return None


def ensure_all(store: RunStore | None = None, log=print) -> None:
    store = store or default_store()
    log("[1/9] SA QSL (T=0.16, s=201, fixed first step)")
    log(f"      best {ensure_sa_qsl(store):.6f}")
    log("[2/9] SA band, free first step (100 runs, T=0.1)")
    fids = ensure_sa_band(store, fixed_first=False)
    log(f"      range [{min(fids):.6f}, {max(fids):.6f}]")
    log("[3/9] SA band, fixed first step")
    fids = ensure_sa_band(store, fixed_first=True)
    log(f"      range [{min(fids):.6f}, {max(fids):.6f}]")
    log("[4/9] GRAPE batch T=0.16 + heat-map ridge warm start")
    log(f"      ridge fidelity {ensure_heat_ridge(store, 'grape'):.6f}")
    log("[5/9] GRAPE linear-ramp seed T=0.16")
    log(f"      fidelity {ensure_linear_ramp(store):.6f}")
    log("[6/9] GRAPE uniform T=0.20 (50 restarts, escalating to 200 if short)")
    log(f"      best {ensure_uniform_qsl(store):.6f}")
    log("[7/9] warm-start chain 0.18 -> 0.19")
    log(f"      fidelity {ensure_warm_chain(store):.6f}")
    log("[8/9] Krotov batch T=0.16 + heat-map ridge warm start")
    log(f"      ridge fidelity {ensure_heat_ridge(store, 'krotov'):.6f}")
    log("[9/9] superposition target (50 SA repeats, T=0.2)")
    fids = ensure_superposition(store)
    log(f"      max {max(fids):.6f}")
