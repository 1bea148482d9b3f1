"""Membrane oscillator driven by a bath-temperature-dependent piston force.

The membrane is a harmonic oscillator with Hamiltonian

    H(T) = P^2/2m + (m w^2/2) (X - f(T)/m w^2)^2 - f(T)^2 / 2 m w^2

where the piston force is linear in the bath temperature,
f(T) = kappa * alpha * (T - T0).  Everything here is evaluated in the
classical (k_B T >> hbar w) limit; the exact quantum partition sum lives in
:mod:`thermopiston.thermo`.

All parameter types are frozen dataclasses and every function is pure, so
the module can be used from any number of threads without locking.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError, ValidityWarning

# CODATA 2018 exact values
K_BOLTZMANN = 1.380649e-23
HBAR = 1.054571817e-34

# Figure-caption constants: alpha ~ 1e-12 m/K, m w^2 ~ 1e4 kg/s^2,
# kappa / m w^2 ~ 1e-2, T0 ~ 1e2 K.  A MHz membrane fixes w.
DEFAULT_OMEGA = 2.0 * math.pi * 1.0e6
DEFAULT_STIFFNESS = 1.0e4
DEFAULT_KAPPA = 1.0e-2 * DEFAULT_STIFFNESS
DEFAULT_ALPHA = 1.0e-12
DEFAULT_T_REF = 100.0

# below this k_B T / hbar w the classical closed forms are flagged
HIGH_T_THRESHOLD = 100.0


def _finite_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


def _check_temperature(t):
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr <= 0):
        raise DomainError(f"temperature must be finite and > 0 K, got {t!r}")


@dataclass(frozen=True)
class OscillatorParams:
    """Mass and angular frequency of the membrane mode.

    ``hbar`` and ``k_boltzmann`` are carried along so tests can run in
    unit-free regimes (hbar = k_B = 1).
    """

    mass: float
    omega: float
    hbar: float = HBAR
    k_boltzmann: float = K_BOLTZMANN

    def __post_init__(self):
        _finite_positive("mass", self.mass)
        _finite_positive("omega", self.omega)
        _finite_positive("hbar", self.hbar)
        _finite_positive("k_boltzmann", self.k_boltzmann)
        _finite_positive("stiffness", self.stiffness)

    @property
    def stiffness(self) -> float:
        """Spring constant m w^2 in N/m."""
        return self.mass * self.omega**2

    @property
    def ground_energy(self) -> float:
        """Ground-state energy E0 = hbar w / 2, the figure energy unit."""
        return 0.5 * self.hbar * self.omega

    @classmethod
    def from_stiffness(cls, stiffness, omega, **constants) -> "OscillatorParams":
        _finite_positive("stiffness", stiffness)
        _finite_positive("omega", omega)
        return cls(mass=stiffness / omega**2, omega=omega, **constants)

    @classmethod
    def default(cls) -> "OscillatorParams":
        return cls.from_stiffness(DEFAULT_STIFFNESS, DEFAULT_OMEGA)


@dataclass(frozen=True)
class LinearDrive:
    """Piston force f(T) = kappa * alpha * (T - t_ref).

    kappa is the membrane-piston coupling (N/m), alpha the thermal expansion
    coefficient (m/K), t_ref the temperature at which the force vanishes.
    """

    kappa: float
    alpha: float
    t_ref: float

    def __post_init__(self):
        if not math.isfinite(self.kappa):
            raise DomainError(f"kappa must be finite, got {self.kappa!r}")
        _finite_positive("alpha", self.alpha)
        _finite_positive("t_ref", self.t_ref)

    @property
    def slope(self) -> float:
        """df/dT = kappa * alpha in N/K."""
        return self.kappa * self.alpha

    @classmethod
    def default(cls) -> "LinearDrive":
        return cls(kappa=DEFAULT_KAPPA, alpha=DEFAULT_ALPHA, t_ref=DEFAULT_T_REF)

    @classmethod
    def undriven(cls, t_ref=DEFAULT_T_REF) -> "LinearDrive":
        return cls(kappa=0.0, alpha=DEFAULT_ALPHA, t_ref=t_ref)


@dataclass(frozen=True)
class BathParams:
    temperature: float
    gamma_m: float = 0.0

    def __post_init__(self):
        _check_temperature(self.temperature)
        if not (math.isfinite(self.gamma_m) and self.gamma_m >= 0):
            raise DomainError(f"gamma_m must be finite and >= 0, got {self.gamma_m!r}")


@dataclass(frozen=True)
class EquilibriumState:
    """First and second moments of X and P in the Gibbs state of H(T)."""

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float

    @property
    def second_moment_x(self) -> float:
        return self.var_x + self.mean_x**2


def validity_ratio(osc: OscillatorParams, t) -> float:
    """k_B T / hbar w; the classical closed forms need this >> 1."""
    return osc.k_boltzmann * t / (osc.hbar * osc.omega)


def check_high_temperature(osc: OscillatorParams, t, *, stacklevel=3) -> float:
    """Return the validity ratio, warning when it drops below 100."""
    ratio = validity_ratio(osc, t)
    if np.any(np.asarray(ratio) < HIGH_T_THRESHOLD):
        warnings.warn(
            f"k_B T / hbar w = {np.min(ratio):.3g} < {HIGH_T_THRESHOLD:g}; "
            "high-temperature closed forms are approximate here",
            ValidityWarning,
            stacklevel=stacklevel,
        )
    return ratio


def drive_force(drive: LinearDrive, t):
    """Piston force in newtons at bath temperature ``t``."""
    _check_temperature(t)
    if np.ndim(t):
        t = np.asarray(t, dtype=float)
    return drive.slope * (t - drive.t_ref)


def level_shift(osc: OscillatorParams, drive: LinearDrive, t):
    """Downward shift of every energy level, f(T)^2 / (2 m w^2)."""
    f = drive_force(drive, t)
    return f * f / (2.0 * osc.stiffness)


def d_force_sq_dt(drive: LinearDrive, t):
    """d(f^2)/dT = 2 f df/dT for the linear drive."""
    return 2.0 * drive.slope * drive_force(drive, t)


def equilibrium_state(
    osc: OscillatorParams, drive: LinearDrive, bath: BathParams
) -> EquilibriumState:
    t = bath.temperature
    check_high_temperature(osc, t)
    var_x = osc.k_boltzmann * t / osc.stiffness
    return EquilibriumState(
        mean_x=drive_force(drive, t) / osc.stiffness,
        mean_p=0.0,
        var_x=var_x,
        var_p=osc.mass**2 * osc.omega**2 * var_x,
    )


def snr_prefactor(osc: OscillatorParams, drive: LinearDrive) -> float:
    """T0 kappa^2 alpha^2 / (k_B m w^2), the scale of SNR(theta)."""
    return drive.t_ref * drive.slope**2 / (osc.k_boltzmann * osc.stiffness)


def snr_x(osc: OscillatorParams, drive: LinearDrive, t):
    """Squared mean displacement over position variance at temperature ``t``.

    Evaluated as f(T)^2 / (k_B T m w^2).  For the linear drive this equals
    ``snr_prefactor * (theta - 1)**2 / theta`` with theta = T / T0.
    """
    f = drive_force(drive, t)
    return f * f / (osc.k_boltzmann * t * osc.stiffness)


def potential_energy_split(osc: OscillatorParams, drive: LinearDrive, bath: BathParams):
    """Coherent and incoherent parts of the mean potential energy.

    Returns
    -------
    e_coh : float
        -(m w^2 / 2) <X>^2, never positive.
    e_inc : float
        (m w^2 / 2) Var(X) = k_B T / 2, independent of the drive.
    """
    state = equilibrium_state(osc, drive, bath)
    e_coh = -0.5 * osc.stiffness * state.mean_x**2
    e_inc = 0.5 * osc.stiffness * state.var_x
    return e_coh, e_inc


def d_ecoh_dt(osc: OscillatorParams, drive: LinearDrive, t):
    """Temperature derivative of the coherent potential energy, J/K."""
    return -d_force_sq_dt(drive, t) / (2.0 * osc.stiffness)


def mean_total_energy(
    osc: OscillatorParams, drive: LinearDrive, bath: BathParams, *, rtol=1e-12
) -> float:
    """<H(T)> from the moments, cross-checked against k_B T (1 - SNR/2)."""
    t = bath.temperature
    state = equilibrium_state(osc, drive, bath)
    f = drive_force(drive, t)
    kinetic = (state.var_p + state.mean_p**2) / (2.0 * osc.mass)
    potential = 0.5 * osc.stiffness * state.second_moment_x
    energy = kinetic + potential - f * state.mean_x

    via_snr = osc.k_boltzmann * t * (1.0 - 0.5 * snr_x(osc, drive, t))
    scale = max(abs(energy), abs(via_snr), osc.k_boltzmann * t)
    if abs(energy - via_snr) > rtol * scale:
        raise ConsistencyError(
            f"moment route {energy!r} and SNR route {via_snr!r} disagree"
        )
    return energy
