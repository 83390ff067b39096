"""Optical-tweezer atom transport: simulation, optimizers, benchmarking."""

from .params import PhysicsParams, DEFAULT_PARAMS, TIME_PER_STEP
from .physics import (SpatialGrid, SpectralHamiltonian, build_grid,
                      kinetic_matrix, tweezer_potential, hamiltonian,
                      ground_state, initial_and_target_states, propagator,
                      evolve, fidelity, excitation_spectrum,
                      superposition_target)
from .protocols import (Protocol, ProtocolError, HeatMap, load_protocol,
                        save_protocol, validate_protocol, make_seed, resample,
                        build_heatmap, extract_ridge)
from .sa import StochasticAscent, UnitaryBank, precompute_unitaries
from .grape import Grape, fidelity_gradient, finite_difference_gradient
from .krotov import Krotov, backward_sweep
from .harness import (RunRecord, RunStore, SweepResult, run_sa_batch,
                      run_gradient_batch, run_sweep, qsl,
                      superposition_experiment, export_trace,
                      export_excitation, steps_for_duration, verify_record)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
