"""Umbrella command-line interface."""

import json
import sys

import click
import numpy as np

from . import harness, physics
from .ascent import DEFAULT_SCHEDULE
from .grape import Grape
from .krotov import Krotov
from .params import DEFAULT_PARAMS, TIME_PER_STEP
from .protocols import (Protocol, build_heatmap, extract_ridge, heatmap_to_csv,
                        load_protocol, make_seed, save_protocol)
from .sa import StochasticAscent


@click.group()
def main():
    """Tweezer transport toolkit: optimizers, analysis, scoring service."""


def _parse_durations(text: str) -> list[float]:
    """Either comma-separated values or start:step:stop (inclusive)."""
    if ":" in text:
        start, step, stop = (float(x) for x in text.split(":"))
        out = []
        t = start
        while t <= stop + 1e-12:
            out.append(round(t, 10))
            t += step
        return out
    return [float(x) for x in text.split(",")]


@main.command()
@click.option("--duration", type=float, required=True)
@click.option("--steps", type=int, default=None, help="defaults to round(T/0.0025)")
@click.option("--positions", type=int, default=128)
@click.option("--amplitudes", default="160", help="comma-separated choices")
@click.option("--fix-first", is_flag=True)
@click.option("--seeds", type=int, default=1, help="number of restarts")
@click.option("--grid", type=int, default=512)
@click.option("--out", type=click.Path(), required=True)
def sa(duration, steps, positions, amplitudes, fix_first, seeds, grid, out):
    """Stochastic ascent; one JSON run record per line in OUT."""
    steps = steps or harness.steps_for_duration(duration)
    amps = tuple(float(a) for a in amplitudes.split(","))
    records = harness.run_sa_batch(duration, steps, list(range(seeds)),
                                   n_positions=positions,
                                   amplitude_choices=amps,
                                   fix_first_step=fix_first,
                                   grid_points=grid)
    with open(out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    best = max(r.fidelity for r in records)
    click.echo(f"best fidelity {best:.6f} over {len(records)} runs")


def _gradient_command(cls, algorithm):
    @click.option("--duration", type=float, required=True)
    @click.option("--steps", type=int, default=None)
    @click.option("--init", default="uniform",
                  help="uniform|linear-ramp|cubic-ramp|kass-like|file:PATH")
    @click.option("--restarts", type=int, default=1)
    @click.option("--schedule", default=",".join(map(str, DEFAULT_SCHEDULE)))
    @click.option("--lr", type=float, default=0.1)
    @click.option("--lr-pos", type=float, default=0.01)
    @click.option("--lr-amp", type=float, default=0.1)
    @click.option("--no-fix-first", is_flag=True)
    @click.option("--out", type=click.Path(), required=True)
    def cmd(duration, steps, init, restarts, schedule, lr, lr_pos, lr_amp,
            no_fix_first, out):
        steps = steps or harness.steps_for_duration(duration)
        sched = tuple(int(x) for x in schedule.split(","))
        init_protocol = None
        if init.startswith("file:"):
            init_protocol = load_protocol(init[5:])
            init = "from-protocol"
        records = harness.run_gradient_batch(
            algorithm, duration, steps, list(range(restarts)), schedule=sched,
            learning_rate=lr, fix_first_step=not no_fix_first, init=init,
            init_protocol=init_protocol)
        with open(out, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
        best = max(r.fidelity for r in records)
        click.echo(f"best fidelity {best:.6f} over {len(records)} records")
    cmd.__name__ = algorithm
    return cmd


main.command("grape")(_gradient_command(Grape, "grape"))
main.command("krotov")(_gradient_command(Krotov, "krotov"))


@main.command()
@click.option("--kind", type=click.Choice(["cubic", "linear", "uniform", "kass"]),
              required=True)
@click.option("--duration", type=float, required=True)
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def seed(kind, duration, steps, seed, out):
    """Generate a seed protocol."""
    kind_map = {"cubic": "cubic-ramp", "linear": "linear-ramp",
                "uniform": "uniform", "kass": "kass-like"}
    steps = steps or harness.steps_for_duration(duration)
    protocol = make_seed(kind_map[kind], duration, steps, DEFAULT_PARAMS,
                         rng_seed=seed)
    save_protocol(protocol, out)
    click.echo(f"wrote {kind} seed with {steps} steps to {out}")


@main.command()
@click.option("--runs", type=click.Path(exists=True), required=True,
              help="JSON-lines run records")
@click.option("--top", type=int, default=200)
@click.option("--out", type=click.Path(), required=True, help="heat-map CSV")
@click.option("--ridge", "ridge_out", type=click.Path(), default=None,
              help="also write the ridge protocol JSON here")
def heatmap(runs, top, out, ridge_out):
    """Heat map (and optionally ridge protocol) from a batch of runs."""
    with open(runs, encoding="utf-8") as fh:
        records = [harness.RunRecord.from_json(line) for line in fh
                   if line.strip()]
    if not records:
        raise click.ClickException("no run records found")
    top = min(top, len(records))
    hm = build_heatmap([r.protocol for r in records],
                       [r.fidelity for r in records], top)
    heatmap_to_csv(hm, out)
    if ridge_out:
        ridge = extract_ridge(hm, records[0].protocol.duration)
        save_protocol(ridge, ridge_out)
    click.echo(f"heat map over top {top} of {len(records)} runs -> {out}")


@main.command()
@click.option("--algo", type=click.Choice(["sa", "grape", "krotov"]),
              required=True)
@click.option("--durations", required=True, help="list or start:step:stop")
@click.option("--restarts", type=int, default=20)
@click.option("--store", type=click.Path(), required=True)
@click.option("--positions", type=int, default=128, help="SA position count")
@click.option("--grid", type=int, default=512, help="SA grid resolution")
@click.option("--schedule", default=",".join(map(str, DEFAULT_SCHEDULE)),
              help="gradient-optimizer resolution schedule")
def sweep(algo, durations, restarts, store, positions, grid, schedule):
    """Duration sweep with persistent, resumable run store."""
    if algo == "sa":
        kwargs = {"n_positions": positions, "grid_points": grid}
    else:
        kwargs = {"schedule": tuple(int(x) for x in schedule.split(","))}
    result = harness.run_sweep(algo, _parse_durations(durations), restarts,
                               store=harness.RunStore(store), **kwargs)
    for t in sorted(result.best_fidelity):
        click.echo(f"T={t:g}: best fidelity {result.best_fidelity[t]:.6f}")
    click.echo(f"QSL: {result.qsl if result.qsl is not None else 'not reached'}")


@main.command("qsl")
@click.option("--store", type=click.Path(exists=True), required=True)
@click.option("--algo", type=click.Choice(["sa", "grape", "krotov"]),
              required=True)
@click.option("--grid", type=int, default=512,
              help="resolution the reported fidelities must carry")
def qsl_cmd(store, algo, grid):
    """QSL from the runs already in a store."""
    records = harness.RunStore(store).load()
    best = {}
    for rec in records:
        if rec.algorithm != algo or rec.grid_points != grid:
            continue
        t = round(rec.protocol.duration, 6)
        best[t] = max(best.get(t, 0.0), rec.fidelity)
    if not best:
        raise click.ClickException(f"no {algo} runs at reporting resolution")
    value = harness.qsl(best)
    click.echo(f"QSL: {value if value is not None else 'not reached'}")


@main.command()
@click.option("--protocol", "protocol_path", type=click.Path(exists=True),
              required=True)
@click.option("--levels", type=int, default=15)
@click.option("--out", type=click.Path(), required=True)
def excite(protocol_path, levels, out):
    """Excitation spectrum CSV for a protocol."""
    protocol = load_protocol(protocol_path)
    harness.export_excitation(protocol, out, n_levels=levels)
    click.echo(f"wrote excitation populations to {out}")


@main.command()
@click.option("--protocol", "protocol_path", type=click.Path(exists=True),
              required=True)
@click.option("--grid", type=int, default=512)
def score(protocol_path, grid):
    """Fidelity of a protocol file at the reporting resolution."""
    protocol = load_protocol(protocol_path)
    g = physics.build_grid(grid)
    psi, phi = physics.initial_and_target_states(g, DEFAULT_PARAMS)
    f = physics.fidelity(protocol, psi, phi, DEFAULT_PARAMS, g)
    click.echo(json.dumps({"fidelity": f, "qsl_pass": f >= harness.QSL_THRESHOLD}))


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--host", default="127.0.0.1")
def serve(port, host):
    """Run the HTTP scoring service."""
    import os
    import uvicorn
    from .service import create_app
    port = port or int(os.environ.get("TWEEZERLAB_PORT", "8080"))
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
