"""HTTP scoring service and leaderboard.

Scores are always recomputed server-side at the configured authority
resolution; client-claimed fidelities are never trusted.  Streamed
probability-density frames use a coarser render resolution since they
exist only for visualization.
"""

import os
import threading
import uuid
from functools import lru_cache

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import physics
from .harness import QSL_THRESHOLD, RunRecord, RunStore
from .params import DEFAULT_PARAMS, TIME_PER_STEP
from .protocols import Protocol, ProtocolError, validate_protocol

MAX_STEPS = 400
MAX_DURATION = 1.0
RENDER_GRID = 128
LEADERBOARD_SOURCES = ("human", "sa", "grape", "krotov", "cd-file")


@lru_cache(maxsize=8)
def _states(grid_points: int):
    grid = physics.build_grid(grid_points)
    psi, phi = physics.initial_and_target_states(grid, DEFAULT_PARAMS)
    return grid, psi, phi


def _duration_bucket(duration: float) -> int:
    return int(round(duration / TIME_PER_STEP))


def create_app(store_dir=None, grid_points: int | None = None) -> FastAPI:
    store_dir = store_dir or os.environ.get("TWEEZERLAB_STORE", "tweezerlab-store")
    grid_points = grid_points or int(os.environ.get("TWEEZERLAB_GRID", "512"))
    app = FastAPI(title="tweezerlab scoring service")
    store = RunStore(store_dir)
    write_lock = threading.Lock()

    def parse_protocol(doc) -> Protocol:
        protocol = Protocol.from_dict(doc)
        validate_protocol(protocol, DEFAULT_PARAMS)
        return protocol

    def error(status: int, message: str):
        return JSONResponse(status_code=status, content={"error": message})

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        # never leak internals to clients
        return JSONResponse(status_code=500, content={"error": "internal error"})

    @app.get("/api/problem")
    def problem():
        p = DEFAULT_PARAMS
        render = np.linspace(-p.domain_half_width, p.domain_half_width,
                             RENDER_GRID)
        curve = -p.B * np.exp(-((render - p.x_start) ** 2) / (2 * p.sigma**2))
        return {
            "mass": p.mass, "fixed_amplitude": p.B, "sigma": p.sigma,
            "x_start": p.x_start, "x_end": p.x_end,
            "amp_min": p.amp_min, "amp_max": p.amp_max,
            "domain": [-p.domain_half_width, p.domain_half_width],
            "time_per_step": TIME_PER_STEP,
            "duration_range": [TIME_PER_STEP, MAX_DURATION],
            "max_steps": MAX_STEPS,
            "render_grid": RENDER_GRID,
            "fixed_potential": curve.tolist(),
            "qsl_threshold": QSL_THRESHOLD,
        }

    @app.post("/api/score")
    async def score(request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "protocol" not in body:
            return error(400, "body must contain a 'protocol' object")
        try:
            protocol = parse_protocol(body["protocol"])
        except ProtocolError as exc:
            return error(400, str(exc))
        if protocol.n_steps > MAX_STEPS:
            return error(422, f"step count {protocol.n_steps} exceeds {MAX_STEPS}")
        if protocol.duration > MAX_DURATION:
            return error(422, f"duration {protocol.duration} exceeds {MAX_DURATION}")
        options = body.get("options", {})
        grid, psi, phi = _states(grid_points)
        fid = physics.fidelity(protocol, psi, phi, DEFAULT_PARAMS, grid)
        response = {"fidelity": fid, "qsl_pass": fid >= QSL_THRESHOLD}
        if options.get("frames"):
            stride = max(int(options.get("frame_stride", 1)), 1)
            rgrid, rpsi, _ = _states(RENDER_GRID)
            states = physics.evolve(protocol, rpsi, DEFAULT_PARAMS, rgrid)
            response["frames"] = [
                {"step": k, "density": (np.abs(states[k]) ** 2).tolist()}
                for k in range(0, protocol.n_steps + 1, stride)]
        if options.get("levels"):
            levels = int(options["levels"])
            rgrid, rpsi, _ = _states(RENDER_GRID)
            pops = physics.excitation_spectrum(protocol, rpsi, DEFAULT_PARAMS,
                                               rgrid, levels)
            response["excitation"] = pops.tolist()
        return response

    @app.post("/api/leaderboard")
    async def submit(request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "protocol" not in body:
            return error(400, "body must contain a 'protocol' object")
        source = body.get("source", "human")
        if source not in LEADERBOARD_SOURCES:
            return error(400, f"source must be one of {LEADERBOARD_SOURCES}")
        try:
            protocol = parse_protocol(body["protocol"])
        except ProtocolError as exc:
            return error(400, str(exc))
        if protocol.n_steps > MAX_STEPS:
            return error(422, f"step count {protocol.n_steps} exceeds {MAX_STEPS}")
        if protocol.duration > MAX_DURATION:
            return error(422, f"duration {protocol.duration} exceeds {MAX_DURATION}")
        entry_id = body.get("entry_id") or uuid.uuid4().hex
        grid, psi, phi = _states(grid_points)
        # server-side fidelity authority: any client-claimed score is discarded
        fid = physics.fidelity(protocol, psi, phi, DEFAULT_PARAMS, grid)
        with write_lock:
            if any(r.run_id == entry_id for r in store.load()):
                return error(409, f"entry id {entry_id} already exists")
            record = RunRecord(
                run_id=entry_id, algorithm=source,
                config={"tag": "leaderboard",
                        "display_name": body.get("name", "anonymous")},
                rng_seed=0, fidelity=fid, trace=[], protocol=protocol,
                wall_seconds=0.0, grid_points=grid_points)
            store.append(record)
        return {"entry_id": entry_id, "fidelity": fid,
                "qsl_pass": fid >= QSL_THRESHOLD}

    @app.get("/api/leaderboard")
    def leaderboard(duration: float | None = None):
        entries = []
        for rec in store.load():
            if duration is not None and \
                    _duration_bucket(rec.protocol.duration) != _duration_bucket(duration):
                continue
            entries.append({
                "entry_id": rec.run_id,
                "name": rec.config.get("display_name", rec.algorithm),
                "source": rec.algorithm if rec.config.get("tag") == "leaderboard"
                          or rec.algorithm in LEADERBOARD_SOURCES else "cd-file",
                "duration": rec.protocol.duration,
                "fidelity": rec.fidelity,
            })
        entries.sort(key=lambda e: -e["fidelity"])
        return {"entries": entries}

    return app
