"""Equilibrium thermodynamics of the piston-driven membrane.

Two routes are provided.  :func:`potentials` gives the classical closed
forms (k_B T >> hbar w); :func:`exact_potentials` sums the Boltzmann factors
of the quantum levels E_n(T) = hbar w (n + 1/2) - f(T)^2 / 2 m w^2 directly
and differentiates ln Z numerically in beta.  The second route shares no
code with the first and is what the tests use as an oracle.

The drive only shifts every level down by the same amount, so it enters
U and F but never S.  Because that shift depends on T, the capacity
c = dU/dT differs from c0 = T dS/dT by the work done by the piston.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core_model import (
    LinearDrive,
    OscillatorParams,
    _check_temperature,
    check_high_temperature,
    d_force_sq_dt,
    level_shift,
    validity_ratio,
)
from .errors import ConsistencyError, DomainError, NumericalError

TAIL_RTOL = 1e-15
MAX_TERMS = 1 << 28
_CHUNK = 1 << 20


@dataclass(frozen=True)
class ThermoReport:
    """Thermodynamic potentials at one bath temperature.

    ``u0`` and ``f0`` are the undriven (f = 0) counterparts of ``u`` and
    ``f_helmholtz``; the entropy is the same for both.
    """

    u: float
    f_helmholtz: float
    s: float
    c: float
    c0: float
    validity_ratio: float
    u0: float
    f0: float


@dataclass(frozen=True)
class TransitionLedger:
    """Energy bookkeeping for a quasistatic change of bath temperature.

    ``work`` is done by the piston on the membrane, ``heat`` enters from
    the bath; ``delta_u == work + heat``.
    """

    t_from: float
    t_to: float
    work: float
    heat: float
    delta_u: float


class PathTerms(NamedTuple):
    heat_term: float
    work_term: float


# ---------------------------------------------------------------------------
# exact partition sum
# ---------------------------------------------------------------------------


def _initial_terms(x):
    return int(math.ceil(-math.log(TAIL_RTOL) / x)) + 16


def _log_level_sum(x, n_max=None):
    """ln sum_{n < N} exp(-x n) by direct summation, N grown until the
    geometric tail is below TAIL_RTOL of the partial sum."""
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"hbar w / k_B T must be finite and > 0, got {x!r}")
    target = _initial_terms(x) if n_max is None else max(int(n_max), 1)
    one_minus_q = -math.expm1(-x)
    chunk_sums = []
    done = 0
    while True:
        if target > MAX_TERMS:
            raise NumericalError(
                f"partition sum needs more than {MAX_TERMS} terms at "
                f"hbar w / k_B T = {x:.3g}"
            )
        for start in range(done, target, _CHUNK):
            stop = min(start + _CHUNK, target)
            n = np.arange(start, stop, dtype=float)
            chunk_sums.append(float(np.sum(np.exp(-x * n))))
        done = target
        partial = math.fsum(chunk_sums)
        tail = math.exp(-x * done) / one_minus_q
        if tail <= TAIL_RTOL * partial:
            return math.log(partial)
        target *= 2


def _log_z0_closed(x):
    # -ln(2 sinh(x/2)), stable for small and large x
    return -0.5 * x - math.log(-math.expm1(-x))


def _log_z_at_beta(osc, shift, beta, n_max=None):
    x = beta * osc.hbar * osc.omega
    return beta * shift - 0.5 * x + _log_level_sum(x, n_max)


def log_partition_exact(
    osc: OscillatorParams, drive: LinearDrive, t, n_max=None, *, check_rtol=1e-10
) -> float:
    """ln Z of the driven membrane from the quantum level sum.

    The result is checked against ln Z0 + SNR/2 with Z0 = 1 / (2 sinh(x/2))
    and :class:`ConsistencyError` is raised if they differ.
    """
    _check_temperature(t)
    beta = 1.0 / (osc.k_boltzmann * t)
    shift = level_shift(osc, drive, t)
    log_z = _log_z_at_beta(osc, shift, beta, n_max)

    closed = beta * shift + _log_z0_closed(beta * osc.hbar * osc.omega)
    if abs(log_z - closed) > check_rtol * max(abs(closed), 1.0):
        raise ConsistencyError(f"level sum ln Z = {log_z!r}, closed form {closed!r}")
    return log_z


def partition_exact(osc: OscillatorParams, drive: LinearDrive, t, n_max=None) -> float:
    return math.exp(log_partition_exact(osc, drive, t, n_max))


def log_partition_undriven(osc: OscillatorParams, t) -> float:
    """Closed-form ln Z0 = -ln(2 sinh(hbar w / 2 k_B T))."""
    _check_temperature(t)
    return _log_z0_closed(osc.hbar * osc.omega / (osc.k_boltzmann * t))


def exact_potentials(
    osc: OscillatorParams, drive: LinearDrive, t, *, rel_step=1e-6, n_max=None
) -> ThermoReport:
    """Potentials from the level sum; U = -d ln Z / d beta by central differences.

    The beta derivative holds the Hamiltonian fixed, i.e. f is evaluated at
    ``t`` and not re-evaluated at the shifted beta.
    """
    _check_temperature(t)
    kb = osc.k_boltzmann
    beta = 1.0 / (kb * t)
    shift = level_shift(osc, drive, t)
    h = rel_step * beta

    log_z = _log_z_at_beta(osc, shift, beta, n_max)
    # difference ln Z = beta*shift - x/2 + ln(sum) term by term; differencing
    # the assembled ln Z would lose ~eps*|ln Z|/h to cancellation
    hw = osc.hbar * osc.omega
    b_hi, b_lo = beta + h, beta - h
    d_sum = _log_level_sum(b_hi * hw, n_max) - _log_level_sum(b_lo * hw, n_max)
    d_log_z = (b_hi - b_lo) * (shift - 0.5 * hw) + d_sum
    u = -d_log_z / (2.0 * h)
    f_helm = -kb * t * log_z
    s = (u - f_helm) / t

    x = beta * osc.hbar * osc.omega
    c0 = kb * (0.5 * x / math.sinh(0.5 * x)) ** 2 if x < 1400 else 0.0
    c = c0 - d_force_sq_dt(drive, t) / (2.0 * osc.stiffness)
    return ThermoReport(
        u=u,
        f_helmholtz=f_helm,
        s=s,
        c=c,
        c0=c0,
        validity_ratio=validity_ratio(osc, t),
        u0=u + shift,
        f0=f_helm + shift,
    )


# ---------------------------------------------------------------------------
# classical closed forms
# ---------------------------------------------------------------------------


def entropy(osc: OscillatorParams, t):
    """S = k_B [1 + ln(k_B T / hbar w)]; the drive does not enter."""
    _check_temperature(t)
    return osc.k_boltzmann * (1.0 + np.log(validity_ratio(osc, t)))


def heat_capacity(osc: OscillatorParams, drive: LinearDrive, t):
    """Return ``(c, c0)``.

    c0 = T dS/dT = k_B is what calorimetry of heat exchanged with the bath
    sees.  c = dU/dT also contains the piston work,
    c = k_B - kappa^2 alpha^2 (T - T0) / m w^2, and changes sign.
    """
    _check_temperature(t)
    c0 = np.full(np.shape(t), osc.k_boltzmann) if np.ndim(t) else osc.k_boltzmann
    c = c0 - d_force_sq_dt(drive, t) / (2.0 * osc.stiffness)
    return c, c0


def capacity_root(osc: OscillatorParams, drive: LinearDrive) -> float:
    """Temperature where c(T) = 0; ``inf`` for an undriven membrane."""
    if drive.slope == 0:
        return math.inf
    return drive.t_ref + osc.k_boltzmann * osc.stiffness / drive.slope**2


def potentials(osc: OscillatorParams, drive: LinearDrive, t) -> ThermoReport:
    _check_temperature(t)
    ratio = check_high_temperature(osc, t)
    kb = osc.k_boltzmann
    shift = level_shift(osc, drive, t)
    u0 = kb * t
    f0 = -kb * t * np.log(ratio)
    c, c0 = heat_capacity(osc, drive, t)
    return ThermoReport(
        u=u0 - shift,
        f_helmholtz=f0 - shift,
        s=entropy(osc, t),
        c=c,
        c0=c0,
        validity_ratio=ratio,
        u0=u0,
        f0=f0,
    )


def internal_energy(osc: OscillatorParams, drive: LinearDrive, t):
    """U = k_B T - f(T)^2 / 2 m w^2 without the validity warning."""
    _check_temperature(t)
    return osc.k_boltzmann * t - level_shift(osc, drive, t)


def transition(osc: OscillatorParams, drive: LinearDrive, t_from, t_to) -> TransitionLedger:
    _check_temperature(t_from)
    _check_temperature(t_to)
    work = -(level_shift(osc, drive, t_to) - level_shift(osc, drive, t_from))
    heat = osc.k_boltzmann * (t_to - t_from)
    delta_u = internal_energy(osc, drive, t_to) - internal_energy(osc, drive, t_from)
    return TransitionLedger(
        t_from=t_from, t_to=t_to, work=work, heat=heat, delta_u=delta_u
    )


# ---------------------------------------------------------------------------
# first law along a temperature path
# ---------------------------------------------------------------------------


def _path_sums(osc, drive, t_from, t_to, n_steps):
    temps = np.linspace(t_from, t_to, n_steps + 1)
    s = entropy(osc, temps)
    # Stieltjes sum of T dS with trapezoidal weights
    heat = float(np.sum(0.5 * (temps[1:] + temps[:-1]) * np.diff(s)))
    # explicit dependence of <H> on T: <dH/dT> = -f'(T) <X>
    dh_dt = -d_force_sq_dt(drive, temps) / (2.0 * osc.stiffness)
    work = float(np.trapezoid(dh_dt, temps))
    return np.array([heat, work])


def first_law_path(
    osc: OscillatorParams,
    drive: LinearDrive,
    t_from,
    t_to,
    n_steps: int,
    *,
    extrapolate: bool = True,
    rtol: float = 1e-10,
    max_levels: int = 12,
) -> PathTerms:
    """Integrate the first law dU = T dS + (d<H>/dT)_explicit dT.

    With ``extrapolate=False`` the plain composite sums on ``n_steps``
    uniform intervals are returned; their error is O(h^2).  Otherwise the
    step is halved repeatedly and Richardson-extrapolated until successive
    diagonal estimates agree to ``rtol``.
    """
    if n_steps < 2:
        raise DomainError(f"n_steps must be >= 2, got {n_steps}")
    _check_temperature(t_from)
    _check_temperature(t_to)
    if t_from == t_to:
        return PathTerms(0.0, 0.0)

    if not extrapolate:
        return PathTerms(*_path_sums(osc, drive, t_from, t_to, n_steps))

    rows = [[_path_sums(osc, drive, t_from, t_to, n_steps)]]
    for level in range(1, max_levels + 1):
        row = [_path_sums(osc, drive, t_from, t_to, n_steps << level)]
        for j in range(1, level + 1):
            factor = 4.0**j
            row.append((factor * row[j - 1] - rows[-1][j - 1]) / (factor - 1.0))
        rows.append(row)
        best, prev = row[-1], rows[-2][-1]
        scale = max(np.max(np.abs(best)), np.finfo(float).tiny)
        if np.max(np.abs(best - prev)) <= rtol * scale:
            return PathTerms(float(best[0]), float(best[1]))
    raise NumericalError(
        f"first-law quadrature did not reach rtol={rtol:g} after {max_levels} halvings"
    )
