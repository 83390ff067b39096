"""Basic Krotov-style optimizer: forward/backward sweeps with costates.

The costate chi is seeded from the final-state overlap and propagated
backwards with the adjoint step unitaries; per-step control gradients
come from contracting chi against the exact propagator derivative.  On
identical inputs these gradients agree with the forward/backward GRAPE
computation to machine precision; the algorithms differ in how the
updates are applied (two separate per-channel adaptive optimizers here).
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import physics
from .ascent import (Adam, DEFAULT_SCHEDULE, optimize_stage, promote_resolution,
                     stage_setting)
from .params import PhysicsParams, DEFAULT_PARAMS
from .protocols import Protocol, make_seed


@dataclass
class BackwardSweep:
    """Costates and per-step gradients from one backward pass."""

    costates: np.ndarray       # (N+1, n): chi_k for k = 0..N
    d_positions: np.ndarray
    d_amplitudes: np.ndarray
    fidelity: float


def backward_sweep(protocol: Protocol, phi: np.ndarray, states: np.ndarray,
                   params: PhysicsParams,
                   grid: physics.SpatialGrid) -> BackwardSweep:
    """Backward-propagate the costate and accumulate control gradients.

    ``states`` are the forward states from :func:`physics.evolve`
    (length N+1).  chi_N = phi <phi|psi_N>; chi_{k-1} = U_k^dag chi_k.
    """
    n_steps = protocol.n_steps
    dt = protocol.dt
    w, v = physics.step_eigensystems(protocol, params, grid)
    d_pos_diag, d_amp_diag = physics.step_potential_derivatives(protocol, params,
                                                                grid)
    overlap = np.vdot(phi, states[n_steps])
    chi = np.empty((n_steps + 1, grid.n), dtype=complex)
    chi[n_steps] = phi * overlap
    d_pos = np.empty(n_steps)
    d_amp = np.empty(n_steps)
    for k in range(n_steps - 1, -1, -1):
        # dF/dtheta_k = 2 Re <chi_{k+1} | dU_k | psi_k> with the exact
        # eigenbasis derivative of U_k = exp(-i dt H_k).
        left = np.conj(chi[k + 1]) @ v[k]
        right = v[k].T @ states[k]
        mix = physics.phase_divided_difference(w[k], dt) * np.outer(left, right)
        q = ((v[k] @ mix) * v[k]).sum(axis=1)
        d_pos[k] = 2.0 * np.real(q @ d_pos_diag[k])
        d_amp[k] = 2.0 * np.real(q @ d_amp_diag[k])
        # adjoint step: chi_k = U_k^dag chi_{k+1}
        phases = np.exp(1j * dt * w[k])
        chi[k] = v[k] @ (phases * (v[k].T @ chi[k + 1]))
    return BackwardSweep(chi, d_pos, d_amp, float(np.abs(overlap) ** 2))


class Krotov(BaseEstimator):
    """Forward/backward-sweep gradient optimizer with per-channel rates.

    Positions and amplitudes get separate adaptive-moment optimizers (the
    position gradients carry the amplitude as a scale factor, so the
    amplitude channel runs a larger rate).  Projection, stall-driven rate
    decay, and resolution promotion match the gradient-ascent optimizer.
    """

    def __init__(self, duration=0.2, n_steps=80, init="uniform",
                 init_protocol: Protocol | None = None, lr_positions=0.01,
                 lr_amplitudes=0.1, max_iterations=1500,
                 schedule=DEFAULT_SCHEDULE, rng_seed=0, fix_first_step=True,
                 params: PhysicsParams = DEFAULT_PARAMS, patience=50,
                 grad_tol=1e-8, targets_factory=None):
        self.duration = duration
        self.n_steps = n_steps
        self.init = init
        self.init_protocol = init_protocol
        self.lr_positions = lr_positions
        self.lr_amplitudes = lr_amplitudes
        self.max_iterations = max_iterations
        self.schedule = schedule
        self.rng_seed = rng_seed
        self.fix_first_step = fix_first_step
        self.params = params
        self.patience = patience
        self.grad_tol = grad_tol
        self.targets_factory = targets_factory

    def _initial_protocol(self) -> Protocol:
        if self.init == "from-protocol":
            if self.init_protocol is None:
                raise ValueError("init='from-protocol' requires init_protocol")
            from .protocols import resample
            proto = self.init_protocol.copy()
            if proto.n_steps != self.n_steps:
                proto = resample(proto, self.n_steps)
            proto.duration = self.duration
        else:
            proto = make_seed(self.init, self.duration, self.n_steps,
                              self.params, rng_seed=self.rng_seed)
        if self.fix_first_step:
            proto.positions[0] = self.params.x_end
        return proto

    def _targets(self, grid):
        if self.targets_factory is None:
            return physics.initial_and_target_states(grid, self.params)
        return self.targets_factory(grid, self.params)

    def _gradient_fn(self, psi, phi):
        def fn(protocol, params, grid):
            states = physics.evolve(protocol, psi, params, grid)
            sweep = backward_sweep(protocol, phi, states, params, grid)
            return sweep.fidelity, sweep.d_positions, sweep.d_amplitudes
        return fn

    def fit(self, protocol: Protocol | None = None):
        current = protocol.copy() if protocol is not None else self._initial_protocol()
        if self.fix_first_step:
            current.positions[0] = self.params.x_end
        trace_parts = []
        boundaries = []
        for stage_idx, points in enumerate(self.schedule):
            grid = physics.build_grid(points)
            psi, phi = self._targets(grid)
            optimizers = {"positions": Adam(self.lr_positions),
                          "amplitudes": Adam(self.lr_amplitudes)}
            result = optimize_stage(self._gradient_fn(psi, phi), current,
                                    self.params, grid, optimizers,
                                    stage_setting(self.max_iterations, stage_idx),
                                    self.fix_first_step,
                                    patience=stage_setting(self.patience,
                                                           stage_idx),
                                    grad_tol=self.grad_tol)
            boundaries.append(sum(len(t) for t in trace_parts))
            trace_parts.append(result.trace)
            if stage_idx + 1 < len(self.schedule):
                current, _ = promote_resolution(result.protocol,
                                                self.schedule[stage_idx + 1],
                                                self.params,
                                                self.targets_factory)
            else:
                current = result.protocol
                self.fidelity_ = result.fidelity
        current.meta.update({"algorithm": "krotov", "rng_seed": self.rng_seed})
        self.protocol_ = current
        self.trace_ = np.concatenate(trace_parts) if trace_parts else np.array([])
        self.stage_boundaries_ = np.array(boundaries)
        self.grid_points_ = self.schedule[-1]
        return self
