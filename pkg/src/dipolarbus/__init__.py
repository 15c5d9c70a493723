"""Adiabatic dipolar-crystal quantum-bus gate: simulator and error-budget toolkit."""

from .basis import BasisSet, TruncationPolicy, build_basis, default_truncation, vacuum_index
from .classical_oracle import (
    ClassicalGroundState,
    continuum_interaction_energy,
    continuum_relax,
    crystal_spacing,
    lattice_ground_state,
    optimal_excitation_count,
)
from .ensemble import EnsembleReport, EnsembleSpec, run_ensemble
from .error_model import (
    NV,
    RYDBERG,
    BareGateResult,
    ErrorBudget,
    Preset,
    bare_gate_error,
    budget_from_gap,
    combined_fidelity,
    get_preset,
    l0_from_density,
    optimal_gate_time,
    optimize_t0,
    total_error,
)
from .evolution import (
    ProtocolResult,
    ProtocolSchedule,
    SectorTrajectory,
    hold,
    propagate_ramp,
    run_protocol,
)
from .gate_analysis import (
    GateResult,
    LZFit,
    conditional_phase,
    fit_lz,
    gate_fidelity,
    lz_sweep,
    qubit_density_matrix,
    run_gate,
)
from .geometry import ChainGeometry, make_disordered, make_equidistant, make_jittered
from .hamiltonian import (
    ALL_SECTORS,
    SECTOR_DD,
    SECTOR_DU,
    SECTOR_UD,
    SECTOR_UU,
    DriveParams,
    QubitSector,
    SparseHamiltonian,
    assemble,
    boundary_potential,
    ramp_delta,
    ramp_omega,
)
from .spectral import (
    GapScan,
    InteractionEnergy,
    SpectralResult,
    interaction_energy,
    lowest_two,
    min_gap_over_ramp,
)

__version__ = "0.1.0"
