"""Laser-cooled membrane as a linear stochastic system.

With X1 = X - f(T)/m w^2 the membrane obeys the linear SDE

    d(X1, P) = A (X1, P) dt + noise,   <noise noise^T> = D dt

    A = [[-gL/2,       1/m            ],
         [-m w^2,  -(gL/2 + gM/m)     ]]
    D = diag(gL hbar / 2 m w,  gL hbar m w / 2 + 2 gM k_B T)

The laser noise intensities are fixed so that without the mechanical bath
(gM = 0) the stationary state is the oscillator ground state.  The
stationary covariance is available three ways: the exact Lyapunov solution,
the weak-damping approximation quoted for this setup, and Monte Carlo over
trajectories propagated with the exact Gaussian one-step transition.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core_model import (
    BathParams,
    LinearDrive,
    OscillatorParams,
    d_force_sq_dt,
    drive_force,
    level_shift,
)
from .errors import DomainError, ModelError, NumericalError, RegimeWarning, SimulationWarning

REGIME_WARN_RATIO = 0.1


@dataclass(frozen=True)
class CoolingParams:
    gamma_l: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma_l) and self.gamma_l > 0):
            raise DomainError(f"gamma_l must be finite and > 0, got {self.gamma_l!r}")


def cooling_ratio(osc: OscillatorParams, bath: BathParams, cool: CoolingParams) -> float:
    """epsilon = gamma_M / (m gamma_L)."""
    return bath.gamma_m / (osc.mass * cool.gamma_l)


def regime_ratios(osc: OscillatorParams, bath: BathParams, cool: CoolingParams, *, warn=True):
    """Ratios that must be small for the weak-damping approximation.

    Returns a dict with ``gamma_l_over_omega``, ``epsilon`` and
    ``gamma_m_over_m_omega``; each one above 0.1 raises a RegimeWarning.
    """
    ratios = {
        "gamma_l_over_omega": cool.gamma_l / osc.omega,
        "epsilon": cooling_ratio(osc, bath, cool),
        "gamma_m_over_m_omega": bath.gamma_m / (osc.mass * osc.omega),
    }
    if warn:
        for name, value in ratios.items():
            if value > REGIME_WARN_RATIO:
                warnings.warn(f"{name} = {value:.3g} is not << 1", RegimeWarning, stacklevel=3)
    return ratios


@dataclass(frozen=True)
class SdeModel:
    """Linear SDE on the state (X1, P).

    ``x1_offset`` maps X1 back to the lab-frame position, X = X1 + offset.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    x1_offset: float = 0.0
    mass: float = field(default=1.0, compare=False)
    omega: float = field(default=1.0, compare=False)
    hbar: float = field(default=1.0, compare=False)
    k_boltzmann: float = field(default=1.0, compare=False)

    def __post_init__(self):
        a = np.array(self.drift, dtype=float)
        d = np.array(self.diffusion, dtype=float)
        if a.shape != (2, 2) or d.shape != (2, 2):
            raise ModelError("drift and diffusion must be 2x2")
        if not np.allclose(d, d.T, rtol=1e-14, atol=0.0):
            raise ModelError("diffusion matrix is not symmetric")
        eig_d = np.linalg.eigvalsh(d)
        if eig_d[0] < -1e-12 * max(abs(eig_d[-1]), np.finfo(float).tiny):
            raise ModelError(f"diffusion matrix is not PSD, eigenvalues {eig_d}")
        if np.max(np.linalg.eigvals(a).real) >= 0:
            raise ModelError("drift matrix is not stable")
        a.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "drift", a)
        object.__setattr__(self, "diffusion", d)

    @property
    def relaxation_rate(self) -> float:
        """Slowest decay rate min |Re eig(A)|."""
        return float(np.min(-np.linalg.eigvals(self.drift).real))

    def scaled_noise(self, factor) -> "SdeModel":
        return SdeModel(
            self.drift, factor * self.diffusion, self.x1_offset,
            self.mass, self.omega, self.hbar, self.k_boltzmann,
        )


@dataclass(frozen=True)
class StationaryStats:
    var_x1: float
    var_p: float
    cov_x1p: float
    n_star: float
    t_star: float

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.var_x1, self.cov_x1p], [self.cov_x1p, self.var_p]])


def build_sde(
    osc: OscillatorParams, drive: LinearDrive, bath: BathParams, cool: CoolingParams
) -> SdeModel:
    m, w, hbar = osc.mass, osc.omega, osc.hbar
    gl, gm = cool.gamma_l, bath.gamma_m
    regime_ratios(osc, bath, cool)
    drift = np.array([[-0.5 * gl, 1.0 / m], [-m * w * w, -(0.5 * gl + gm / m)]])
    diffusion = np.diag(
        [gl * hbar / (2.0 * m * w), 0.5 * gl * hbar * m * w + 2.0 * gm * osc.k_boltzmann * bath.temperature]
    )
    return SdeModel(
        drift=drift,
        diffusion=diffusion,
        x1_offset=drive_force(drive, bath.temperature) / osc.stiffness,
        mass=m,
        omega=w,
        hbar=hbar,
        k_boltzmann=osc.k_boltzmann,
    )


def _osc_of(model: SdeModel) -> OscillatorParams:
    return OscillatorParams(model.mass, model.omega, model.hbar, model.k_boltzmann)


def solve_lyapunov_2x2(a, d) -> np.ndarray:
    """Solve A S + S A^T + D = 0 for symmetric 2x2 S.

    Unknowns (s11, s12, s22); the three independent entries of the matrix
    equation form a 3x3 linear system.
    """
    (a11, a12), (a21, a22) = a
    lhs = np.array(
        [
            [2.0 * a11, 2.0 * a12, 0.0],
            [a21, a11 + a22, a12],
            [0.0, 2.0 * a21, 2.0 * a22],
        ]
    )
    rhs = -np.array([d[0][0], d[0][1], d[1][1]])
    # scale columns so that entries of very different magnitude (m vs 1/m) do
    # not spoil the conditioning
    col = np.max(np.abs(lhs), axis=0)
    col[col == 0] = 1.0
    det = np.linalg.det(lhs / col)
    if not math.isfinite(det) or abs(det) < 1e-14:
        raise NumericalError("Lyapunov system is singular")
    s11, s12, s22 = np.linalg.solve(lhs / col, rhs) / col
    return np.array([[s11, s12], [s12, s22]])


def stationary_lyapunov(model: SdeModel) -> StationaryStats:
    sigma = solve_lyapunov_2x2(model.drift, model.diffusion)
    var_x1, cov, var_p = float(sigma[0, 0]), float(sigma[0, 1]), float(sigma[1, 1])
    try:
        n_star, t_star = effective_temperature(_osc_of(model), var_x1)
    except DomainError:
        # e.g. a noise-free model; no thermal state has this variance
        n_star = t_star = math.nan
    return StationaryStats(var_x1=var_x1, var_p=var_p, cov_x1p=cov, n_star=n_star, t_star=t_star)


def stationary_paper(osc: OscillatorParams, bath: BathParams, cool: CoolingParams) -> StationaryStats:
    """Weak-damping stationary moments.

    <X1^2> = (hbar / 2 m w)(1 - eps) + eps k_B T / m w^2,
    <P^2> = m^2 w^2 <X1^2>, no X1-P correlation.
    """
    regime_ratios(osc, bath, cool)
    eps = cooling_ratio(osc, bath, cool)
    var_x1 = osc.hbar / (2.0 * osc.mass * osc.omega) * (1.0 - eps) + eps * osc.k_boltzmann * bath.temperature / osc.stiffness
    n_star, t_star = effective_temperature(osc, var_x1)
    return StationaryStats(
        var_x1=var_x1,
        var_p=osc.mass**2 * osc.omega**2 * var_x1,
        cov_x1p=0.0,
        n_star=n_star,
        t_star=t_star,
    )


def effective_temperature(osc: OscillatorParams, stats, *, rtol=1e-12):
    """Occupancy n* and temperature T* of the thermal state with this <X1^2>.

    ``stats`` is a :class:`StationaryStats` or a bare position variance.
    A variance below the ground-state value hbar / 2 m w (beyond ``rtol``)
    raises :class:`DomainError`.
    """
    var_x1 = stats.var_x1 if isinstance(stats, StationaryStats) else float(stats)
    floor = osc.hbar / (2.0 * osc.mass * osc.omega)
    n_star = var_x1 / floor * 0.5 - 0.5
    if n_star < -rtol * (n_star + 0.5):
        raise DomainError(f"<X1^2> = {var_x1!r} is below the ground-state value {floor!r}")
    n_star = max(n_star, 0.0)
    if n_star == 0.0:
        return 0.0, 0.0
    t_star = osc.hbar * osc.omega / (osc.k_boltzmann * math.log1p(1.0 / n_star))
    return n_star, t_star


def effective_temperature_approx(osc: OscillatorParams, n_star) -> float:
    """Large-occupancy form T* ~ hbar w n* / k_B."""
    return osc.hbar * osc.omega * n_star / osc.k_boltzmann


def snr_star(
    osc: OscillatorParams, drive: LinearDrive, bath: BathParams, cool: CoolingParams, *, exact=False
) -> float:
    """SNR of the cooled stationary state.

    Cooling leaves the mean position at f(T)/m w^2 and only shrinks the
    variance.  ``exact=True`` uses the Lyapunov variance instead of the
    weak-damping one.
    """
    if exact:
        var = stationary_lyapunov(build_sde(osc, drive, bath, cool)).var_x1
    else:
        var = stationary_paper(osc, bath, cool).var_x1
    mean_x = drive_force(drive, bath.temperature) / osc.stiffness
    return mean_x**2 / var


@dataclass(frozen=True)
class NoneqReport:
    """State functions of the cooled stationary state.

    ``du_dt`` is the heat-flow capture coefficient dU/dT, not a heat
    capacity: the membrane is not in equilibrium with the bath at T.
    """

    u: float
    f_helmholtz: float
    s: float
    du_dt: float
    n_star: float
    t_star: float
    epsilon: float


def noneq_potentials(
    osc: OscillatorParams, drive: LinearDrive, bath: BathParams, cool: CoolingParams
) -> NoneqReport:
    t = bath.temperature
    stats = stationary_paper(osc, bath, cool)
    eps = cooling_ratio(osc, bath, cool)
    kb = osc.k_boltzmann
    shift = level_shift(osc, drive, t)
    t_star = stats.t_star
    if t_star <= 0:
        raise DomainError("stationary state is the ground state; T* = 0")
    log_ratio = math.log(osc.hbar * osc.omega / (kb * t_star))
    return NoneqReport(
        u=kb * t_star - shift,
        f_helmholtz=kb * t_star * log_ratio - shift,
        s=kb * (1.0 - log_ratio),
        du_dt=eps * kb - d_force_sq_dt(drive, t) / (2.0 * osc.stiffness),
        n_star=stats.n_star,
        t_star=t_star,
        epsilon=eps,
    )


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def step_transition(model: SdeModel, dt: float, method: str = "exact"):
    """One-step propagator ``phi`` and noise covariance ``q`` for step ``dt``.

    ``method="exact"`` uses exp(A dt) and the integral of
    exp(A s) D exp(A^T s) over [0, dt] (Van Loan block exponential);
    ``method="euler"`` is Euler-Maruyama with O(dt) bias.
    """
    a, d = model.drift, model.diffusion
    if method == "euler":
        return np.eye(2) + a * dt, d * dt
    if method != "exact":
        raise DomainError(f"unknown method {method!r}")
    # rescale X1 so both coordinates have comparable magnitude; exp() of a
    # badly scaled block matrix loses digits
    scale = np.array([1.0, 1.0 / (model.mass * model.omega)])
    a_s = a * scale[:, None] / scale[None, :]
    d_s = d * np.outer(scale, scale)
    block = np.zeros((4, 4))
    block[:2, :2] = -a_s
    block[:2, 2:] = d_s
    block[2:, 2:] = a_s.T
    e = expm(block * dt)
    phi_s = e[2:, 2:].T
    q_s = phi_s @ e[:2, 2:]
    q_s = 0.5 * (q_s + q_s.T)
    phi = phi_s * (1.0 / scale)[:, None] * scale[None, :]
    q = q_s / np.outer(scale, scale)
    return phi, q


def _noise_factor(q):
    """Matrix L with L L^T = q, tolerant of singular PSD q."""
    vals, vecs = np.linalg.eigh(q)
    top = max(abs(vals[-1]), np.finfo(float).tiny)
    if vals[0] < -1e-10 * top:
        raise ModelError(f"step covariance is not PSD, eigenvalues {vals}")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory, keyed by (seed, index)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class EnsembleResult:
    """Ensemble moments on the sample grid plus stationary-window estimates.

    Standard errors are taken across trajectories of the per-trajectory
    window averages, so time correlation inside a trajectory is accounted
    for.
    """

    times: np.ndarray
    mean_x1: np.ndarray
    mean_p: np.ndarray
    var_x1: np.ndarray
    var_p: np.ndarray
    cov_x1p: np.ndarray
    stationary_var_x1: float
    stationary_var_p: float
    stationary_cov_x1p: float
    se_var_x1: float
    se_var_p: float
    se_cov_x1p: float
    n_traj: int
    window_start: float


def _run_block(phi, chol, x0, n_steps, sample_every, seed, indices):
    n = len(indices)
    z = np.empty((n, n_steps, 2))
    for row, idx in enumerate(indices):
        z[row] = trajectory_rng(seed, idx).standard_normal((n_steps, 2))
    noise = z @ chol.T
    n_samples = n_steps // sample_every + 1
    out = np.empty((n, n_samples, 2))
    state = np.tile(np.asarray(x0, dtype=float), (n, 1))
    out[:, 0] = state
    phi_t = phi.T
    for k in range(n_steps):
        state = state @ phi_t + noise[:, k]
        if (k + 1) % sample_every == 0:
            out[:, (k + 1) // sample_every] = state
    return out


def simulate_ensemble(
    model: SdeModel,
    n_traj: int,
    dt: float,
    t_final: float,
    seed: int,
    *,
    x0=(0.0, 0.0),
    sample_every: int = 1,
    window_start: float | None = None,
    method: str = "exact",
    workers: int = 1,
    block_size: int = 256,
) -> EnsembleResult:
    """Propagate ``n_traj`` independent trajectories of ``model``.

    Every trajectory draws its noise from its own counter-based stream, and
    blocks of ``block_size`` trajectories are written into disjoint slices of
    one array before any reduction, so the output is bit-identical for any
    ``workers``.  The stationary window covers sample times
    ``>= window_start`` (default ``t_final / 2``).
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"dt must be finite and > 0, got {dt!r}")
    if not (t_final >= dt and math.isfinite(t_final)):
        raise DomainError(f"t_final must be finite and >= dt, got {t_final!r}")
    if n_traj < 2:
        raise DomainError("need at least two trajectories")
    if sample_every < 1:
        raise DomainError("sample_every must be >= 1")

    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * t_final:
        raise DomainError("t_final must be an integer multiple of dt")
    n_steps -= n_steps % sample_every
    if t_final < 10.0 / model.relaxation_rate:
        warnings.warn(
            f"t_final = {t_final:.3g} s is shorter than 10 relaxation times "
            f"({10.0 / model.relaxation_rate:.3g} s)",
            SimulationWarning,
            stacklevel=2,
        )

    phi, q = step_transition(model, dt, method)
    chol = _noise_factor(q)

    blocks = [range(i, min(i + block_size, n_traj)) for i in range(0, n_traj, block_size)]
    seed = int(seed)

    def work(indices):
        return _run_block(phi, chol, x0, n_steps, sample_every, seed, indices)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    samples = np.concatenate(parts, axis=0)

    times = np.arange(samples.shape[1]) * dt * sample_every
    x1, p = samples[..., 0], samples[..., 1]
    # deviations from trajectory 0 make identical trajectories give exactly 0
    dx1, dp = x1 - x1[0], p - p[0]
    mean_dx1, mean_dp = dx1.mean(axis=0), dp.mean(axis=0)
    cx1, cp = dx1 - mean_dx1, dp - mean_dp
    var_x1 = np.mean(cx1 * cx1, axis=0)
    var_p = np.mean(cp * cp, axis=0)
    cov = np.mean(cx1 * cp, axis=0)

    if window_start is None:
        window_start = 0.5 * times[-1]
    window = times >= window_start
    if not np.any(window):
        raise DomainError("stationary window is empty")
    wx, wp = x1[:, window], p[:, window]
    mx, mp = wx.mean(), wp.mean()
    per_xx = np.mean((wx - mx) ** 2, axis=1)
    per_pp = np.mean((wp - mp) ** 2, axis=1)
    per_xp = np.mean((wx - mx) * (wp - mp), axis=1)
    root_n = math.sqrt(n_traj)

    return EnsembleResult(
        times=times,
        mean_x1=x1[0] + mean_dx1,
        mean_p=p[0] + mean_dp,
        var_x1=var_x1,
        var_p=var_p,
        cov_x1p=cov,
        stationary_var_x1=float(per_xx.mean()),
        stationary_var_p=float(per_pp.mean()),
        stationary_cov_x1p=float(per_xp.mean()),
        se_var_x1=float(per_xx.std(ddof=1) / root_n),
        se_var_p=float(per_pp.std(ddof=1) / root_n),
        se_cov_x1p=float(per_xp.std(ddof=1) / root_n),
        n_traj=n_traj,
        window_start=float(window_start),
    )


def default_regime(osc: OscillatorParams):
    """Cooling with two decades of separation on each side,
    gamma_M / m = 1e-2 gamma_L and gamma_L = 1e-3 omega.

    Returns ``(gamma_m, CoolingParams)``.
    """
    gamma_l = 1e-3 * osc.omega
    return osc.mass * 1e-2 * gamma_l, CoolingParams(gamma_l)
