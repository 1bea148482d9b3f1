"""Harmonic membrane driven by a bath-temperature-dependent piston force.

Equilibrium mechanics (:mod:`.core_model`), thermodynamics (:mod:`.thermo`),
the laser-cooled stochastic model (:mod:`.langevin`), an oracle harness
(:mod:`.validate`) and a CLI (:mod:`.cli`).
"""

from .core_model import (
    BathParams,
    EquilibriumState,
    LinearDrive,
    OscillatorParams,
    d_ecoh_dt,
    drive_force,
    equilibrium_state,
    mean_total_energy,
    potential_energy_split,
    snr_x,
)
from .errors import (
    ConsistencyError,
    DomainError,
    ModelError,
    NumericalError,
    RegimeWarning,
    ValidityWarning,
)
from .langevin import (
    CoolingParams,
    SdeModel,
    StationaryStats,
    build_sde,
    effective_temperature,
    noneq_potentials,
    simulate_ensemble,
    snr_star,
    stationary_lyapunov,
    stationary_paper,
)
from .thermo import (
    ThermoReport,
    TransitionLedger,
    first_law_path,
    heat_capacity,
    partition_exact,
    potentials,
    transition,
)

__all__ = [
    "BathParams",
    "build_sde",
    "ConsistencyError",
    "CoolingParams",
    "d_ecoh_dt",
    "DomainError",
    "drive_force",
    "effective_temperature",
    "equilibrium_state",
    "EquilibriumState",
    "first_law_path",
    "heat_capacity",
    "LinearDrive",
    "mean_total_energy",
    "ModelError",
    "noneq_potentials",
    "NumericalError",
    "OscillatorParams",
    "partition_exact",
    "potential_energy_split",
    "potentials",
    "RegimeWarning",
    "SdeModel",
    "simulate_ensemble",
    "snr_star",
    "snr_x",
    "stationary_lyapunov",
    "stationary_paper",
    "StationaryStats",
    "ThermoReport",
    "transition",
    "TransitionLedger",
    "ValidityWarning",
]

__version__ = "0.1.0"
