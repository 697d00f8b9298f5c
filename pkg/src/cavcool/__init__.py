"""Cooling two atoms in an optical cavity into a maximally entangled state.

Subpackages: hilbert (product-space operators), toy (four-level rate-equation
model), dressed (eigenstructure and transition tables), cavity (quantum-jump
and master-equation solvers), experiments (config-driven figure/table runner).
"""

__version__ = "0.1.0"

from .cavity import (
    CavityParams,
    EnsembleResult,
    JumpChannel,
    LaserConfig,
    MasterResult,
    TrajectoryResult,
    analytic_predictions,
    cavity_pulse,
    conditional_hamiltonian,
    cooperativity,
    derive_trajectory_seed,
    ensemble_average,
    ensemble_window_stats,
    evolve_trajectory,
    hamiltonian,
    jump_channels,
    master_equation_evolve,
    master_window_stats,
)
from .dressed import (
    DressedState,
    TransitionEntry,
    delta_min,
    excited_manifold,
    ground_manifold,
    resonant_assignment,
    resonant_table,
    system_hamiltonian,
    transition_table,
)
from .errors import (
    CavcoolError,
    ConfigError,
    DegenerateModelError,
    DomainError,
    StepSizeError,
)
from .hilbert import (
    HilbertSpace,
    annihilation,
    atom_transition,
    creation,
    dagger,
    exchange_operator,
    expectation,
    number_operator,
    plus_state,
)
from .toy import (
    PulseSchedule,
    ToyParams,
    ToySeries,
    cooling_rate,
    cooling_rate_approx,
    fitted_decay_rate,
    heating_rate,
    initial_state,
    integrate,
    max_fidelity,
    pulse_omega,
    rate_rhs,
    stationary_fidelity,
    stationary_fidelity_large_delta,
    stationary_solve,
    transient_population,
)
