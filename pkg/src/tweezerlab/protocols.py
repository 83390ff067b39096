"""Protocols: the optimization variable, plus seeds and batch analysis.

A protocol is a duration T and N piecewise-constant (position, amplitude)
settings for the controllable tweezer.  The JSON file format used
everywhere (CLI, run stores, scoring service) is

    {"duration": T, "steps": [{"x": ..., "amp": ...}, ...], "meta": {...}}
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .params import PhysicsParams, DEFAULT_PARAMS

POSITION_BINS = 40
AMPLITUDE_BINS = 32


class ProtocolError(ValueError):
    """Malformed or out-of-bounds protocol data."""


@dataclass
class Protocol:
    """Duration plus per-step tweezer positions and amplitudes."""

    duration: float
    positions: np.ndarray
    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)

    @property
    def n_steps(self) -> int:
        return len(self.positions)

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    def copy(self) -> "Protocol":
        return Protocol(self.duration, self.positions.copy(),
                        self.amplitudes.copy(), dict(self.meta))

    def mirrored(self) -> "Protocol":
        """Positions reflected through x = 0."""
        return Protocol(self.duration, -self.positions, self.amplitudes.copy(),
                        dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "steps": [{"x": float(x), "amp": float(a)}
                      for x, a in zip(self.positions, self.amplitudes)],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Protocol":
        if not isinstance(data, dict):
            raise ProtocolError("protocol must be a JSON object")
        if "duration" not in data:
            raise ProtocolError("missing required field 'duration'")
        if "steps" not in data:
            raise ProtocolError("missing required field 'steps'")
        steps = data["steps"]
        if not isinstance(steps, list) or len(steps) < 1:
            raise ProtocolError("'steps' must be a non-empty list")
        xs, amps = [], []
        for i, step in enumerate(steps):
            if not isinstance(step, dict) or "x" not in step or "amp" not in step:
                raise ProtocolError(f"steps[{i}] must have fields 'x' and 'amp'")
            xs.append(float(step["x"]))
            amps.append(float(step["amp"]))
        duration = float(data["duration"])
        if duration <= 0:
            raise ProtocolError("'duration' must be positive")
        return cls(duration, np.array(xs), np.array(amps),
                   dict(data.get("meta", {})))


def validate_protocol(protocol: Protocol,
                      params: PhysicsParams = DEFAULT_PARAMS) -> None:
    """Raise ProtocolError naming the first offending field, if any."""
    if protocol.duration <= 0:
        raise ProtocolError("'duration' must be positive")
    if protocol.n_steps < 1:
        raise ProtocolError("protocol needs at least one step")
    if len(protocol.amplitudes) != protocol.n_steps:
        raise ProtocolError("positions and amplitudes differ in length")
    hw = params.domain_half_width
    for i, x in enumerate(protocol.positions):
        if not (-hw <= x <= hw):
            raise ProtocolError(f"steps[{i}].x = {x} outside [-{hw}, {hw}]")
    for i, a in enumerate(protocol.amplitudes):
        if not (params.amp_min <= a <= params.amp_max):
            raise ProtocolError(
                f"steps[{i}].amp = {a} outside [{params.amp_min}, {params.amp_max}]")


def load_protocol(path, params: PhysicsParams = DEFAULT_PARAMS) -> Protocol:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"{path}: invalid JSON: {exc}") from exc
    protocol = Protocol.from_dict(data)
    validate_protocol(protocol, params)
    return protocol


def save_protocol(protocol: Protocol, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(protocol.to_dict(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Seed generation
# ---------------------------------------------------------------------------

SEED_KINDS = ("uniform", "linear-ramp", "cubic-ramp", "kass-like", "from-file",
              "heat-ridge")


def make_seed(kind: str, duration: float, n_steps: int,
              params: PhysicsParams = DEFAULT_PARAMS, rng_seed: int = 0,
              path=None) -> Protocol:
    """Generate a starting protocol of the given kind.

    uniform     positions U[-1, 1], amplitudes U[amp_min, amp_max]
    linear-ramp straight line x_start -> x_end at maximal amplitude
    cubic-ramp  smooth-step cubic x_start -> x_end, zero endpoint velocity
    kass-like   linear out-and-back in half the time each way, amplitudes
                U[40, 160] (expected amplitude 100)
    from-file   load the protocol at ``path``
    heat-ridge  alias of from-file for protocols emitted by ridge extraction
    """
    rng = np.random.default_rng(rng_seed)
    hw = params.domain_half_width
    if kind == "uniform":
        xs = rng.uniform(-hw, hw, n_steps)
        amps = rng.uniform(params.amp_min, params.amp_max, n_steps)
    elif kind == "linear-ramp":
        xs = np.linspace(params.x_start, params.x_end, n_steps)
        amps = np.full(n_steps, params.amp_max)
    elif kind == "cubic-ramp":
        tau = np.arange(n_steps) / (n_steps - 1)
        xs = params.x_start + (params.x_end - params.x_start) * (3 * tau**2 - 2 * tau**3)
        amps = np.full(n_steps, params.amp_max)
    elif kind == "kass-like":
        half = n_steps // 2
        out = np.linspace(params.x_end, params.x_start, half, endpoint=False)
        back = np.linspace(params.x_start, params.x_end, n_steps - half)
        xs = np.concatenate([out, back])
        amps = rng.uniform(40.0, 160.0, n_steps)
    elif kind in ("from-file", "heat-ridge"):
        if path is None:
            raise ProtocolError(f"seed kind '{kind}' requires a file path")
        loaded = load_protocol(path, params)
        protocol = resample(loaded, n_steps)
        protocol.duration = duration
        protocol.meta["seed_kind"] = kind
        return protocol
    else:
        raise ProtocolError(f"unknown seed kind '{kind}'")
    return Protocol(duration, xs, amps, {"seed_kind": kind})


def resample(protocol: Protocol, new_n: int,
             fix_first_to: float | None = None) -> Protocol:
    """Piecewise-linear resampling onto ``new_n`` uniformly spaced step times."""
    if new_n < 2:
        raise ProtocolError("resample needs at least 2 steps")
    old_t = np.arange(protocol.n_steps) / max(protocol.n_steps - 1, 1)
    new_t = np.arange(new_n) / (new_n - 1)
    xs = np.interp(new_t, old_t, protocol.positions)
    amps = np.interp(new_t, old_t, protocol.amplitudes)
    if fix_first_to is not None:
        xs[0] = fix_first_to
    return Protocol(protocol.duration, xs, amps, dict(protocol.meta))


# ---------------------------------------------------------------------------
# Heat maps and ridge extraction
# ---------------------------------------------------------------------------

@dataclass
class HeatMap:
    """Per-step histograms of positions and amplitudes over selected runs."""

    position_counts: np.ndarray    # (N, POSITION_BINS)
    amplitude_counts: np.ndarray   # (N, AMPLITUDE_BINS)
    position_edges: np.ndarray
    amplitude_edges: np.ndarray
    n_runs: int
    top_k: int


def build_heatmap(protocols: list[Protocol], fidelities: list[float],
                  top_k: int, params: PhysicsParams = DEFAULT_PARAMS,
                  position_bins: int = POSITION_BINS,
                  amplitude_bins: int = AMPLITUDE_BINS) -> HeatMap:
    """Histograms over the ``top_k`` runs with highest fidelity.

    Selection is deterministic: ties broken by input order (stable sort).
    """
    if not protocols:
        raise ValueError("cannot build a heat map from zero runs")
    if top_k > len(protocols):
        raise ValueError("top_k exceeds the number of runs")
    order = np.argsort(-np.asarray(fidelities), kind="stable")[:top_k]
    chosen = [protocols[i] for i in order]
    n = chosen[0].n_steps
    hw = params.domain_half_width
    pos_edges = np.linspace(-hw, hw, position_bins + 1)
    amp_edges = np.linspace(params.amp_min, params.amp_max, amplitude_bins + 1)
    pos_counts = np.zeros((n, position_bins), dtype=int)
    amp_counts = np.zeros((n, amplitude_bins), dtype=int)
    for proto in chosen:
        if proto.n_steps != n:
            raise ValueError("all runs in a heat map must share the step count")
        pi = np.clip(np.searchsorted(pos_edges, proto.positions, side="right") - 1,
                     0, position_bins - 1)
        ai = np.clip(np.searchsorted(amp_edges, proto.amplitudes, side="right") - 1,
                     0, amplitude_bins - 1)
        pos_counts[np.arange(n), pi] += 1
        amp_counts[np.arange(n), ai] += 1
    return HeatMap(pos_counts, amp_counts, pos_edges, amp_edges,
                   n_runs=len(protocols), top_k=top_k)


def _trace_ridge(counts: np.ndarray, centers: np.ndarray,
                 exclude: np.ndarray | None = None) -> np.ndarray:
    """Modal bin center per column with continuity smoothing.

    Among bins within 90% of a column's max count, the one whose center is
    nearest the previous step's choice wins; ties go to the lower bin index.
    """
    n = counts.shape[0]
    out = np.empty(n)
    prev = None
    for k in range(n):
        col = counts[k].astype(float)
        if exclude is not None:
            col = np.where(exclude[k], -1.0, col)
        peak = col.max()
        candidates = np.flatnonzero(col >= 0.9 * peak)
        if prev is None:
            choice = candidates[np.argmax(col[candidates])]
        else:
            dist = np.abs(centers[candidates] - prev)
            choice = candidates[np.argmin(dist)]
        out[k] = centers[choice]
        prev = out[k]
    return out


def extract_ridge(heatmap: HeatMap, duration: float,
                  secondary: bool = False) -> Protocol:
    """Protocol traced along the most prominent heat-map path.

    With ``secondary``, the primary ridge's bins are masked out first and
    the trace repeated, yielding the second most prominent path.
    """
    pos_centers = 0.5 * (heatmap.position_edges[:-1] + heatmap.position_edges[1:])
    amp_centers = 0.5 * (heatmap.amplitude_edges[:-1] + heatmap.amplitude_edges[1:])
    xs = _trace_ridge(heatmap.position_counts, pos_centers)
    amps = _trace_ridge(heatmap.amplitude_counts, amp_centers)
    if secondary:
        n = heatmap.position_counts.shape[0]
        pos_mask = np.zeros_like(heatmap.position_counts, dtype=bool)
        amp_mask = np.zeros_like(heatmap.amplitude_counts, dtype=bool)
        for k in range(n):
            pos_mask[k, np.argmin(np.abs(pos_centers - xs[k]))] = True
            amp_mask[k, np.argmin(np.abs(amp_centers - amps[k]))] = True
        xs = _trace_ridge(heatmap.position_counts, pos_centers, exclude=pos_mask)
        amps = _trace_ridge(heatmap.amplitude_counts, amp_centers, exclude=amp_mask)
    return Protocol(duration, xs, amps, {"seed_kind": "heat-ridge"})


def heatmap_to_csv(heatmap: HeatMap, path) -> None:
    """CSV export: step,bin_low,bin_high,count,channel."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,bin_low,bin_high,count,channel\n")
        for name, counts, edges in (
                ("position", heatmap.position_counts, heatmap.position_edges),
                ("amplitude", heatmap.amplitude_counts, heatmap.amplitude_edges)):
            for k in range(counts.shape[0]):
                for b in range(counts.shape[1]):
                    fh.write(f"{k},{edges[b]},{edges[b + 1]},{counts[k, b]},{name}\n")
