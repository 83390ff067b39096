"""Shared machinery for the gradient-based optimizers.

Both gradient optimizers use the same projected adaptive-moment update,
learning-rate decay on fidelity stalls, and coarse-to-fine resolution
promotion; only the gradient computation differs between them.
"""

from dataclasses import dataclass, field

import numpy as np

from . import physics
from .params import PhysicsParams
from .protocols import Protocol

DEFAULT_SCHEDULE = (32, 64, 128, 256, 512)


def stage_setting(value, stage_idx: int):
    """Per-stage setting: scalars apply to every stage, sequences by index."""
    if isinstance(value, (list, tuple)):
        return value[min(stage_idx, len(value) - 1)]
    return value


class Adam:
    """Standard adaptive-moment estimate update (ascent direction)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class StageResult:
    protocol: Protocol
    fidelity: float
    trace: np.ndarray
    iterations: int
    stop_reason: str


def projected_gradient(values: np.ndarray, grad: np.ndarray, lo: float,
                       hi: float) -> np.ndarray:
    """Ascent gradient with components pointing out of the box zeroed."""
    out = grad.copy()
    out[(values <= lo) & (grad < 0)] = 0.0
    out[(values >= hi) & (grad > 0)] = 0.0
    return out


def optimize_stage(gradient_fn, protocol: Protocol, params: PhysicsParams,
                   grid: physics.SpatialGrid, optimizers: dict,
                   max_iterations: int, fix_first_step: bool,
                   patience: int = 50, improve_tol: float = 1e-6,
                   lr_floor: float = 1e-5, grad_tol: float = 1e-8) -> StageResult:
    """Projected adaptive-moment ascent at a single grid resolution.

    ``gradient_fn(protocol, params, grid)`` must return
    ``(fidelity, d_positions, d_amplitudes)``.  ``optimizers`` maps
    "positions" and "amplitudes" to Adam instances (they may be the same
    object for a single shared optimizer).  Learning rates halve whenever
    the best fidelity has not improved by ``improve_tol`` for ``patience``
    iterations; the stage ends when rates fall below ``lr_floor``, the
    projected gradient vanishes, or ``max_iterations`` is reached.
    """
    hw = params.domain_half_width
    current = protocol.copy()
    best = current.copy()
    trace = []
    best_f = -np.inf
    since_improve = 0
    stop = "max_iterations"
    it = 0
    for it in range(1, max_iterations + 1):
        f, d_pos, d_amp = gradient_fn(current, params, grid)
        trace.append(f)
        if f > best_f + improve_tol:
            best_f = f
            best = current.copy()
            since_improve = 0
        else:
            if f > best_f:
                best_f = f
                best = current.copy()
            since_improve += 1
        if fix_first_step:
            d_pos = d_pos.copy()
            d_amp = d_amp.copy()
            d_pos[0] = 0.0
            d_amp[0] = 0.0
        proj_pos = projected_gradient(current.positions, d_pos, -hw, hw)
        proj_amp = projected_gradient(current.amplitudes, d_amp,
                                      params.amp_min, params.amp_max)
        if max(np.abs(proj_pos).max(), np.abs(proj_amp).max()) < grad_tol:
            stop = "gradient_vanished"
            break
        if since_improve >= patience:
            since_improve = 0
            for opt in set(optimizers.values()):
                opt.lr *= 0.5
            if max(opt.lr for opt in optimizers.values()) < lr_floor:
                stop = "learning_rate_floor"
                break
        current.positions = np.clip(
            current.positions + optimizers["positions"].step(d_pos), -hw, hw)
        current.amplitudes = np.clip(
            current.amplitudes + optimizers["amplitudes"].step(d_amp),
            params.amp_min, params.amp_max)
        if fix_first_step:
            current.positions[0] = protocol.positions[0]
            current.amplitudes[0] = protocol.amplitudes[0]
    return StageResult(best, best_f, np.array(trace), it, stop)


def evaluate_at_resolution(protocol: Protocol, grid_points: int,
                           params: PhysicsParams, targets_factory=None) -> float:
    """Fidelity of the protocol re-evaluated on a fresh grid."""
    grid = physics.build_grid(grid_points)
    if targets_factory is None:
        psi, phi = physics.initial_and_target_states(grid, params)
    else:
        psi, phi = targets_factory(grid, params)
    return physics.fidelity(protocol, psi, phi, params, grid)


def promote_resolution(protocol: Protocol, next_grid_points: int,
                       params: PhysicsParams,
                       targets_factory=None) -> tuple[Protocol, float]:
    """Carry a protocol to a finer grid: parameters unchanged, fidelity
    re-evaluated.  Optimizer state is not carried over; callers construct
    fresh moment estimates for the new stage."""
    carried = protocol.copy()
    f = evaluate_at_resolution(carried, next_grid_points, params, targets_factory)
    return carried, f
