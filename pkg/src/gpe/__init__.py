"""Spectral simulator and diagnostics for the bilinearly controlled
Gross-Pitaevskii equation with a harmonic trap."""

from .controls import ControlSignal, PotentialSpec, make_potential
from .diagnostics import (
    HolderEstimate,
    StrichartzReport,
    TailProfile,
    attainable_ensemble,
    calibrate_gronwall_constant,
    energy_bound_check,
    gronwall_check,
    holder_quotient,
    smoothing_residual_series,
    spectral_tail_profile,
    strichartz_norm,
    weak_limit_experiment,
)
from .dynamics import (
    InitialState,
    PicardDidNotConverge,
    PicardResult,
    SimConfig,
    SimulationDiverged,
    Trajectory,
    TrajectoryRecord,
    energy,
    grid_nonlinear_phase,
    make_initial_state,
    picard_solve,
    simulate,
    strang_step,
)
from .hermite import (
    GridField,
    HermiteBasis,
    SpectralField,
    basis_state,
    build_basis,
    gauss_hermite,
    hermite_values,
    quadrature_l2,
    spectral_field,
    to_grid,
    to_spectral,
)
from .operators import (
    AdmissiblePair,
    apply_fractional_H,
    check_admissible,
    eigenvalues,
    free_propagate,
    kato_functional,
    lp_norm,
    sobolev_norm,
    sup_norm_refined,
    wsp_norm,
)

__all__ = [
    "AdmissiblePair",
    "ControlSignal",
    "GridField",
    "HermiteBasis",
    "HolderEstimate",
    "InitialState",
    "PicardDidNotConverge",
    "PicardResult",
    "PotentialSpec",
    "SimConfig",
    "SimulationDiverged",
    "SpectralField",
    "StrichartzReport",
    "TailProfile",
    "Trajectory",
    "TrajectoryRecord",
    "apply_fractional_H",
    "attainable_ensemble",
    "basis_state",
    "build_basis",
    "calibrate_gronwall_constant",
    "check_admissible",
    "eigenvalues",
    "energy",
    "energy_bound_check",
    "free_propagate",
    "gauss_hermite",
    "grid_nonlinear_phase",
    "gronwall_check",
    "hermite_values",
    "holder_quotient",
    "kato_functional",
    "lp_norm",
    "make_initial_state",
    "make_potential",
    "picard_solve",
    "quadrature_l2",
    "simulate",
    "smoothing_residual_series",
    "sobolev_norm",
    "spectral_field",
    "spectral_tail_profile",
    "strang_step",
    "strichartz_norm",
    "sup_norm_refined",
    "to_grid",
    "to_spectral",
    "weak_limit_experiment",
    "wsp_norm",
]
