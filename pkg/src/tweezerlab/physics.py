"""Discretized physics: grid, Hamiltonians, propagators, fidelity.

Everything is dense numpy on a uniform grid over [-1, 1].  The kinetic
term is the standard second-order finite-difference Laplacian with
implicit Dirichlet boundaries (the state is pinned to zero one spacing
outside the grid).  Propagators are exact matrix exponentials computed
in the eigenbasis of the real symmetric step Hamiltonian; the same
eigendecomposition supplies ground states and excitation spectra.
"""

from dataclasses import dataclass, field

import numpy as np

from .params import PhysicsParams
from .protocols import Protocol


class EigensolverError(RuntimeError):
    """Dense symmetric eigensolver failed to converge."""


class DegenerateGroundStateError(RuntimeError):
    """Lowest eigenvalue is (near-)degenerate; the grid is unusable."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid over [-1, 1] including both endpoints."""

    points: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> float:
        return 2.0 / (self.n - 1)


def build_grid(n_points: int, min_points: int = 8) -> SpatialGrid:
    """Uniform grid with ``n_points`` points spanning [-1, 1].

    Fewer than ``min_points`` points is rejected: the three-point kinetic
    stencil is meaningless on a handful of nodes.
    """
    if n_points < min_points:
        raise ValueError(f"grid needs at least {min_points} points, got {n_points}")
    return SpatialGrid(points=np.linspace(-1.0, 1.0, n_points))


def kinetic_matrix(grid: SpatialGrid, mass: float) -> np.ndarray:
    """Finite-difference kinetic energy operator p^2/2m."""
    n = grid.n
    scale = 0.5 / (mass * grid.spacing**2)
    t = np.zeros((n, n))
    idx = np.arange(n)
    t[idx, idx] = 2.0 * scale
    t[idx[:-1], idx[:-1] + 1] = -scale
    t[idx[:-1] + 1, idx[:-1]] = -scale
    return t


def gaussian_well_diag(grid: SpatialGrid, center: float, amplitude: float,
                       sigma: float) -> np.ndarray:
    """Diagonal of the Gaussian tweezer potential, as a vector."""
    if amplitude < 0:
        raise ValueError("tweezer amplitude must be >= 0")
    return amplitude * np.exp(-((grid.points - center) ** 2) / (2.0 * sigma**2))


def tweezer_potential(grid: SpatialGrid, center: float, amplitude: float,
                      sigma: float) -> np.ndarray:
    """Gaussian tweezer potential as a diagonal matrix."""
    return np.diag(gaussian_well_diag(grid, center, amplitude, sigma))


class SpectralHamiltonian:
    """Real symmetric Hamiltonian with its eigendecomposition cached."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = matrix
        try:
            self.eigenvalues, self.eigenvectors = np.linalg.eigh(matrix)
        except np.linalg.LinAlgError as exc:
            raise EigensolverError(f"eigendecomposition failed: {exc}") from exc

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def hamiltonian_diag(grid: SpatialGrid, params: PhysicsParams,
                     tweezer_pos: float, tweezer_amp: float) -> np.ndarray:
    """Potential diagonal: fixed tweezer plus controllable tweezer (attractive)."""
    v = -gaussian_well_diag(grid, params.x_start, params.B, params.sigma)
    if tweezer_amp != 0.0:
        v = v - gaussian_well_diag(grid, tweezer_pos, tweezer_amp, params.sigma)
    return v


def hamiltonian(grid: SpatialGrid, params: PhysicsParams, tweezer_pos: float,
                tweezer_amp: float) -> SpectralHamiltonian:
    """Full step Hamiltonian: kinetic - fixed well - controllable well."""
    if not (params.amp_min <= tweezer_amp <= params.amp_max):
        raise ValueError(
            f"tweezer amplitude {tweezer_amp} outside "
            f"[{params.amp_min}, {params.amp_max}]")
    h = kinetic_matrix(grid, params.mass)
    diag = hamiltonian_diag(grid, params, tweezer_pos, tweezer_amp)
    h[np.diag_indices_from(h)] += diag
    return SpectralHamiltonian(h)


def fixed_tweezer_hamiltonian(grid: SpatialGrid, params: PhysicsParams,
                              center: float | None = None) -> SpectralHamiltonian:
    """Hamiltonian with only the fixed tweezer on, centered at ``center``."""
    if center is None:
        center = params.x_start
    h = kinetic_matrix(grid, params.mass)
    h[np.diag_indices_from(h)] -= gaussian_well_diag(grid, center, params.B,
                                                     params.sigma)
    return SpectralHamiltonian(h)


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Deterministic global phase: largest-magnitude component real positive."""
    k = int(np.argmax(np.abs(vec)))
    phase = vec[k] / abs(vec[k])
    out = vec / phase
    return out / np.linalg.norm(out)


def ground_state(h: SpectralHamiltonian) -> np.ndarray:
    """Normalized lowest eigenvector with a fixed global phase."""
    gap = h.eigenvalues[1] - h.eigenvalues[0]
    if gap < 1e-10:
        raise DegenerateGroundStateError(
            f"ground state gap {gap:.3e} below 1e-10; check the grid")
    return _fix_phase(h.eigenvectors[:, 0].astype(complex))


def initial_and_target_states(grid: SpatialGrid,
                              params: PhysicsParams) -> tuple[np.ndarray, np.ndarray]:
    """Ground states of the fixed tweezer at x_start (initial) and x_end (target)."""
    psi = ground_state(fixed_tweezer_hamiltonian(grid, params, params.x_start))
    phi = ground_state(fixed_tweezer_hamiltonian(grid, params, params.x_end))
    return psi, phi


def propagator(h: SpectralHamiltonian, dt: float) -> np.ndarray:
    """Unitary exp(-i dt H) in the cached eigenbasis."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    phases = np.exp(-1j * dt * h.eigenvalues)
    return (h.eigenvectors * phases) @ h.eigenvectors.T


def phase_divided_difference(eigenvalues: np.ndarray, dt: float) -> np.ndarray:
    """Divided differences of z -> exp(-i dt z) over all eigenvalue pairs.

    Entry (i, j) is (e^{-i dt a} - e^{-i dt b})/(a - b) for a = w_i,
    b = w_j, with the limit -i dt e^{-i dt a} on the diagonal.  Written as
    -i dt e^{-i dt (a+b)/2} sinc(dt (a-b)/2) so it is stable for any gap.
    """
    w = np.asarray(eigenvalues)
    mean = 0.5 * (w[:, None] + w[None, :])
    half_gap = 0.5 * dt * (w[:, None] - w[None, :])
    return -1j * dt * np.exp(-1j * dt * mean) * np.sinc(half_gap / np.pi)


def step_hamiltonian_matrices(protocol: Protocol, params: PhysicsParams,
                              grid: SpatialGrid) -> np.ndarray:
    """Stack of the N step Hamiltonians as an (N, n, n) array."""
    n = grid.n
    t = kinetic_matrix(grid, params.mass)
    fixed = gaussian_well_diag(grid, params.x_start, params.B, params.sigma)
    mats = np.broadcast_to(t, (protocol.n_steps, n, n)).copy()
    ctrl = (protocol.amplitudes[:, None]
            * np.exp(-((grid.points[None, :] - protocol.positions[:, None]) ** 2)
                     / (2.0 * params.sigma**2)))
    idx = np.arange(n)
    mats[:, idx, idx] -= fixed[None, :] + ctrl
    return mats


def step_eigensystems(protocol: Protocol, params: PhysicsParams,
                      grid: SpatialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Batched eigendecomposition of all step Hamiltonians."""
    mats = step_hamiltonian_matrices(protocol, params, grid)
    try:
        w, v = np.linalg.eigh(mats)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"batched eigendecomposition failed: {exc}") from exc
    return w, v


def step_potential_derivatives(protocol: Protocol, params: PhysicsParams,
                               grid: SpatialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of dH/dx_k and dH/dA_k for every step, shape (N, n) each."""
    delta = grid.points[None, :] - protocol.positions[:, None]
    gauss = np.exp(-(delta**2) / (2.0 * params.sigma**2))
    d_amp = -gauss
    d_pos = -protocol.amplitudes[:, None] * gauss * delta / params.sigma**2
    return d_pos, d_amp


def evolve(protocol: Protocol, psi0: np.ndarray, params: PhysicsParams,
           grid: SpatialGrid) -> np.ndarray:
    """All intermediate states under the protocol, shape (N+1, n)."""
    dt = protocol.dt
    w, v = step_eigensystems(protocol, params, grid)
    states = np.empty((protocol.n_steps + 1, grid.n), dtype=complex)
    states[0] = psi0
    for k in range(protocol.n_steps):
        coeff = v[k].T @ states[k]
        states[k + 1] = v[k] @ (np.exp(-1j * dt * w[k]) * coeff)
    return states


def fidelity(protocol: Protocol, psi: np.ndarray, phi: np.ndarray,
             params: PhysicsParams, grid: SpatialGrid) -> float:
    """|<phi| U_P |psi>|^2 for the given protocol."""
    final = evolve(protocol, psi, params, grid)[-1]
    return float(np.abs(np.vdot(phi, final)) ** 2)


def excitation_spectrum(protocol: Protocol, psi0: np.ndarray,
                        params: PhysicsParams, grid: SpatialGrid,
                        n_levels: int) -> np.ndarray:
    """Populations of the lowest instantaneous eigenstates along the protocol.

    Row k holds |<e_j(k)|psi_k>|^2 for the ``n_levels`` lowest eigenstates
    of the Hamiltonian of step k (row 0 uses the first step's Hamiltonian).
    """
    if n_levels > grid.n:
        raise ValueError("n_levels exceeds the grid size")
    states = evolve(protocol, psi0, params, grid)
    w, v = step_eigensystems(protocol, params, grid)
    pops = np.empty((protocol.n_steps + 1, n_levels))
    for k in range(protocol.n_steps + 1):
        basis = v[max(k - 1, 0)]
        pops[k] = np.abs(basis[:, :n_levels].conj().T @ states[k]) ** 2
    return pops


def superposition_target(phi: np.ndarray, psi: np.ndarray, q1: complex,
                         q2: complex) -> np.ndarray:
    """Renormalized q1*phi + q2*psi."""
    if q1 == 0 and q2 == 0:
        raise ValueError("q1 and q2 cannot both be zero")
    combo = q1 * phi + q2 * psi
    norm = np.linalg.norm(combo)
    if norm < 1e-12:
        raise ValueError("superposition collapsed to the zero vector")
    return combo / norm
