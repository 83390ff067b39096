"""Stochastic (coordinate) ascent over a discrete grid of tweezer settings.

All candidate unitaries are precomputed once per configuration; a single
run then repeatedly visits the protocol steps in random order, replacing
each step by the candidate maximizing fidelity with every other step held
fixed.  Prefix/suffix state vectors are cached so one coordinate visit
costs one batched candidate scan plus a handful of matrix-vector products.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import physics
from .params import PhysicsParams, DEFAULT_PARAMS
from .protocols import Protocol


class CapacityError(MemoryError):
    """The requested unitary bank would exceed the configured memory cap."""


@dataclass
class UnitaryBank:
    """Precomputed candidate unitaries for one SA configuration."""

    grid: physics.SpatialGrid
    positions: np.ndarray      # candidate tweezer positions, length s
    amplitudes: np.ndarray     # candidate amplitudes
    unitaries: np.ndarray      # (s * n_amps, n, n); index k = p * n_amps + a
    dt: float
    psi: np.ndarray
    phi: np.ndarray

    @property
    def n_candidates(self) -> int:
        return self.unitaries.shape[0]

    def candidate(self, k: int) -> tuple[float, float]:
        n_amps = len(self.amplitudes)
        return float(self.positions[k // n_amps]), float(self.amplitudes[k % n_amps])


def precompute_unitaries(duration: float, n_steps: int, n_positions: int,
                         amplitude_choices, params: PhysicsParams,
                         grid: physics.SpatialGrid,
                         memory_cap_bytes: int = 3_000_000_000,
                         targets=None) -> UnitaryBank:
    """Build the (position x amplitude) candidate unitary bank for dt = T/N."""
    if n_positions < 2:
        raise ValueError("need at least 2 candidate positions")
    amplitudes = np.asarray(amplitude_choices, dtype=float)
    if np.any(amplitudes < params.amp_min) or np.any(amplitudes > params.amp_max):
        raise ValueError("amplitude choices outside the allowed range")
    hw = params.domain_half_width
    positions = np.linspace(-hw, hw, n_positions)
    n = grid.n
    n_cand = n_positions * len(amplitudes)
    need = n_cand * n * n * 16
    if need > memory_cap_bytes:
        raise CapacityError(
            f"unitary bank needs {need / 1e9:.2f} GB, cap is "
            f"{memory_cap_bytes / 1e9:.2f} GB")
    dt = duration / n_steps
    bank = np.empty((n_cand, n, n), dtype=complex)
    for p, pos in enumerate(positions):
        for a, amp in enumerate(amplitudes):
            h = physics.hamiltonian(grid, params, pos, amp)
            bank[p * len(amplitudes) + a] = physics.propagator(h, dt)
    if targets is None:
        psi, phi = physics.initial_and_target_states(grid, params)
    else:
        psi, phi = targets
    return UnitaryBank(grid, positions, amplitudes, bank, dt, psi, phi)


def coordinate_update(bank: UnitaryBank, a: np.ndarray,
                      b: np.ndarray) -> tuple[int, float]:
    """Best candidate index and fidelity for one step.

    ``a`` is the suffix row vector phi^dag U_N ... U_{i+1}; ``b`` the prefix
    U_{i-1} ... U_1 psi.  Ties break to the lowest index.
    """
    n = bank.grid.n
    ub = (bank.unitaries.reshape(-1, n) @ b).reshape(bank.n_candidates, n)
    scores = np.abs(ub @ a) ** 2
    best = int(np.argmax(scores))
    return best, float(scores[best])


class StochasticAscent(BaseEstimator):
    """Grid-based coordinate ascent on tweezer positions and amplitudes.

    Parameters mirror the experiment descriptions: duration T, step count
    N, ``n_positions`` candidate tweezer positions spread uniformly over
    the domain, and one or more allowed amplitudes (default: maximal
    amplitude only).  ``fit`` produces ``protocol_``, ``trace_``,
    ``fidelity_`` and ``converged_``.
    """

    def __init__(self, duration=0.1, n_steps=40, n_positions=128,
                 amplitude_choices=(160.0,), fix_first_step=False,
                 max_sweeps=200, rng_seed=0, grid_points=512,
                 params: PhysicsParams = DEFAULT_PARAMS,
                 memory_cap_bytes=3_000_000_000, spot_check=True):
        self.duration = duration
        self.n_steps = n_steps
        self.n_positions = n_positions
        self.amplitude_choices = amplitude_choices
        self.fix_first_step = fix_first_step
        self.max_sweeps = max_sweeps
        self.rng_seed = rng_seed
        self.grid_points = grid_points
        self.params = params
        self.memory_cap_bytes = memory_cap_bytes
        self.spot_check = spot_check

    def _make_bank(self, targets) -> UnitaryBank:
        grid = physics.build_grid(self.grid_points)
        return precompute_unitaries(self.duration, self.n_steps,
                                    self.n_positions, self.amplitude_choices,
                                    self.params, grid, self.memory_cap_bytes,
                                    targets=targets)

    def fit(self, targets=None, bank: UnitaryBank | None = None):
        """Run the ascent.  ``bank`` may be shared across restarts."""
        if bank is None:
            bank = self._make_bank(targets)
        elif targets is not None:
            raise ValueError("pass targets when building the bank, not to fit")
        rng = np.random.default_rng(self.rng_seed)
        n_steps = self.n_steps
        n_amps = len(bank.amplitudes)
        n_cand = bank.n_candidates
        n = bank.grid.n

        x = rng.integers(0, n_cand, size=n_steps)
        free = np.arange(n_steps)
        if self.fix_first_step:
            pinned_pos = int(np.argmin(np.abs(bank.positions - self.params.x_end)))
            x[0] = pinned_pos * n_amps
            free = free[1:]

        # Prefix states fwd[j] = U_{x_j} ... U_{x_1} psi (fwd[0] = psi) and
        # suffix rows bwd[j] = phi^dag U_{x_N} ... U_{x_{j+1}} (bwd[N] = phi^dag).
        fwd = np.empty((n_steps + 1, n), dtype=complex)
        bwd = np.empty((n_steps + 1, n), dtype=complex)
        fwd[0] = bank.psi
        bwd[n_steps] = np.conj(bank.phi)
        fwd_valid = 0          # fwd[0..fwd_valid] valid
        bwd_valid = n_steps    # bwd[bwd_valid..N] valid

        trace: list[float] = []
        boundaries: list[int] = []
        best_score = -1.0
        self.converged_ = False
        sweeps = 0
        while sweeps < self.max_sweeps:
            boundaries.append(len(trace))
            order = rng.permutation(free)
            improved_any = False
            for i in order:
                while fwd_valid < i:
                    fwd[fwd_valid + 1] = bank.unitaries[x[fwd_valid]] @ fwd[fwd_valid]
                    fwd_valid += 1
                while bwd_valid > i + 1:
                    bwd[bwd_valid - 1] = bwd[bwd_valid] @ bank.unitaries[x[bwd_valid - 1]]
                    bwd_valid -= 1
                a = bwd[i + 1]
                b = fwd[i]
                best, score = coordinate_update(bank, a, b)
                if score > best_score + 1e-12:
                    improved_any = True
                if best != x[i]:
                    x[i] = best
                    fwd_valid = min(fwd_valid, i)
                    bwd_valid = max(bwd_valid, i + 1)
                best_score = max(best_score, score)
                trace.append(score)
            if self.spot_check:
                self._verify(bank, x, trace[-1] if trace else None)
            sweeps += 1
            if not improved_any:
                self.converged_ = True
                break

        xs = np.array([bank.candidate(k)[0] for k in x])
        amps = np.array([bank.candidate(k)[1] for k in x])
        self.protocol_ = Protocol(self.duration, xs, amps,
                                  {"algorithm": "sa", "rng_seed": self.rng_seed})
        self.trace_ = np.array(trace)
        self.sweep_boundaries_ = np.array(boundaries)
        self.fidelity_ = self._full_fidelity(bank, x)
        self.n_sweeps_ = sweeps
        self.bank_ = bank
        return self

    @staticmethod
    def _full_fidelity(bank: UnitaryBank, x: np.ndarray) -> float:
        state = bank.psi
        for k in x:
            state = bank.unitaries[k] @ state
        return float(np.abs(np.vdot(bank.phi, state)) ** 2)

    def _verify(self, bank: UnitaryBank, x: np.ndarray, last_score):
        if last_score is None:
            return
        full = self._full_fidelity(bank, x)
        if abs(full - last_score) > 1e-9:
            raise RuntimeError(
                f"prefix/suffix bookkeeping drifted: incremental {last_score!r} "
                f"vs from-scratch {full!r}")
