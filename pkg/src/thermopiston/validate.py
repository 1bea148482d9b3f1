"""Oracle harness: identity audits, derivative checks and stochastic checks.

Each check compares one measured number with one expected number and
produces a :class:`CheckReport`.  A check covering a grid of points reports
its worst point.  Tolerances live here, next to the checks, and never in
the physics modules.

A check is relative when ``|expected| > ABS_THRESHOLD`` and absolute
otherwise, because many of the audited quantities (c(T), U, work) pass
through zero.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import core_model as cm
from . import langevin as lg
from . import thermo as th
from .core_model import BathParams, LinearDrive, OscillatorParams

ABS_THRESHOLD = 1e-25

PASS, FAIL, WARN = "pass", "fail", "warn"


@dataclass(frozen=True)
class CheckReport:
    check_id: str
    status: str
    measured: float
    expected: float
    tolerance: float
    detail: str = ""
    mode: str = "rel"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


def compare(check_id, measured, expected, *, rtol, atol=0.0, detail="", threshold=ABS_THRESHOLD):
    """Build a report for one comparison, picking relative or absolute mode."""
    measured, expected = float(measured), float(expected)
    if abs(expected) > threshold:
        mode, tol, ok = "rel", rtol, abs(measured - expected) <= rtol * abs(expected)
    else:
        mode, tol, ok = "abs", atol, abs(measured - expected) <= atol
    if not math.isfinite(measured):
        ok = False
    return CheckReport(check_id, PASS if ok else FAIL, measured, expected, tol, detail, mode)


def worst_of(check_id, pairs, *, rtol, atol=0.0, detail="", threshold=ABS_THRESHOLD):
    """Compare every ``(label, measured, expected)`` and report the worst one."""
    worst, worst_score, n_fail = None, -1.0, 0
    for label, measured, expected in pairs:
        rep = compare(check_id, measured, expected, rtol=rtol, atol=atol, threshold=threshold)
        err = abs(rep.measured - rep.expected)
        bound = rep.tolerance * (abs(rep.expected) if rep.mode == "rel" else 1.0)
        score = err / bound if bound > 0 else (0.0 if err == 0 else math.inf)
        if not math.isfinite(rep.measured):
            score = math.inf
        n_fail += rep.status == FAIL
        if score > worst_score:
            worst, worst_score, worst_label = rep, score, label
    info = f"worst at {worst_label}; {n_fail} failing point(s)"
    return CheckReport(
        check_id, worst.status, worst.measured, worst.expected, worst.tolerance,
        f"{detail}; {info}" if detail else info, worst.mode,
    )


# Operations each check exercises; run_all() asserts every closed-form
# operation of the physics modules appears at least once.
REQUIRED_OPERATIONS = frozenset(
    {
        "drive_force", "equilibrium_state", "snr_x", "potential_energy_split",
        "d_ecoh_dt", "mean_total_energy", "partition_exact", "potentials",
        "heat_capacity", "transition", "first_law_path", "build_sde",
        "stationary_lyapunov", "stationary_paper", "effective_temperature",
        "simulate_ensemble", "snr_star", "noneq_potentials",
    }
)

COVERAGE = {
    "identity.drive_force_reference": {"drive_force"},
    "identity.energy_snr": {"mean_total_energy", "snr_x"},
    "identity.snr_theta_form": {"snr_x"},
    "identity.variance_drive_independence": {"equilibrium_state"},
    "identity.energy_split": {"potential_energy_split", "snr_x"},
    "identity.partition_closed_form": {"partition_exact"},
    "identity.entropy_drive_invariance": {"potentials", "partition_exact"},
    "identity.legendre": {"potentials"},
    "identity.work_coherent_energy": {"transition", "potential_energy_split"},
    "identity.first_law_closure": {"first_law_path", "transition"},
    "derivative.ecoh": {"d_ecoh_dt", "potential_energy_split"},
    "derivative.capacity": {"heat_capacity", "potentials"},
    "derivative.capacity_c0": {"heat_capacity", "potentials"},
    "derivative.free_energy_order": {"potentials", "d_ecoh_dt"},
    "derivative.capacity_root_u_peak": {"heat_capacity", "potentials"},
    "derivative.noneq_du_dt": {"noneq_potentials"},
    "stochastic.weak_damping_vs_lyapunov": {"stationary_paper", "stationary_lyapunov", "build_sde"},
    "stochastic.vacuum_var_x1": {"stationary_lyapunov", "build_sde"},
    "stochastic.vacuum_var_p": {"stationary_lyapunov", "build_sde"},
    "stochastic.mc_var_x1": {"simulate_ensemble"},
    "stochastic.mc_var_p": {"simulate_ensemble"},
    "stochastic.determinism": {"simulate_ensemble"},
    "stochastic.effective_temperature": {"effective_temperature", "stationary_paper"},
    "stochastic.snr_star": {"snr_star", "snr_x"},
}


def assert_coverage(coverage=COVERAGE):
    covered = set().union(*coverage.values())
    missing = REQUIRED_OPERATIONS - covered
    if missing:
        raise AssertionError(f"operations without a check: {sorted(missing)}")


def _grid(drive, temps):
    if temps is not None:
        return [float(t) for t in temps]
    t0 = drive.t_ref
    return [float(t) for t in np.linspace(0.5 * t0, 2.0 * t0, 31)]


def _random_temps(drive, n, seed):
    rng = np.random.default_rng(seed)
    return [float(t) for t in rng.uniform(0.5 * drive.t_ref, 2.0 * drive.t_ref, n)]


def quantum_probe(osc: OscillatorParams, t, ratio=1.0e3) -> OscillatorParams:
    """Oscillator with the same stiffness whose k_B t / hbar w equals ``ratio``.

    The level sum needs ~35 k_B T / hbar w terms, so exact-sum audits run on
    this stiffer-in-frequency copy instead of a MHz membrane at 100 K.
    """
    omega = osc.k_boltzmann * t / (osc.hbar * ratio)
    return OscillatorParams.from_stiffness(
        osc.stiffness, omega, hbar=osc.hbar, k_boltzmann=osc.k_boltzmann
    )


def _quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", cm.ValidityWarning)
        warnings.simplefilter("ignore", lg.RegimeWarning)
        return fn(*args, **kwargs)


def run_identity_suite(
    osc: OscillatorParams,
    drive: LinearDrive,
    *,
    temps=None,
    n_random: int = 50,
    seed: int = 0,
    u_offset: float = 0.0,
) -> list[CheckReport]:
    """Closed-form identities over a grid plus seeded random temperatures.

    ``u_offset`` corrupts the moment-route energy and exists to prove the
    harness can fail.
    """
    kb = osc.k_boltzmann
    ts = _grid(drive, temps) + _random_temps(drive, n_random, seed)
    undriven = LinearDrive(0.0, drive.alpha, drive.t_ref)
    reports = []

    reports.append(
        compare("identity.drive_force_reference", cm.drive_force(drive, drive.t_ref), 0.0,
                rtol=0.0, atol=0.0, detail="f(T0) = 0")
    )

    energy_pairs = []
    for t in ts:
        bath = BathParams(t)
        u = _quiet(cm.mean_total_energy, osc, drive, bath) + u_offset
        energy_pairs.append((f"T={t:.6g}", u, kb * t * (1.0 - 0.5 * cm.snr_x(osc, drive, t))))
    reports.append(worst_of("identity.energy_snr", energy_pairs, rtol=1e-12, atol=1e-12 * kb * drive.t_ref,
                            detail="<H> moment route vs k_B T (1 - SNR/2)"))

    pref = cm.snr_prefactor(osc, drive)
    reports.append(worst_of(
        "identity.snr_theta_form",
        [(f"T={t:.6g}", cm.snr_x(osc, drive, t),
          pref * (t / drive.t_ref - 1.0) ** 2 / (t / drive.t_ref)) for t in ts],
        rtol=1e-12, atol=1e-14, threshold=1e-14,
        detail="f^2 / k_B T m w^2 vs prefactor (theta-1)^2/theta",
    ))

    var_pairs = []
    for t in ts:
        a = _quiet(cm.equilibrium_state, osc, drive, BathParams(t))
        b = _quiet(cm.equilibrium_state, osc, undriven, BathParams(t))
        var_pairs.append((f"T={t:.6g} var_x", a.var_x, b.var_x))
        var_pairs.append((f"T={t:.6g} var_p", a.var_p, b.var_p))
    reports.append(worst_of("identity.variance_drive_independence", var_pairs, rtol=0.0, atol=0.0,
                            threshold=0.0, detail="variances equal their undriven values exactly"))

    split_pairs = []
    for t in ts:
        e_coh, e_inc = _quiet(cm.potential_energy_split, osc, drive, BathParams(t))
        split_pairs.append((f"T={t:.6g} e_coh", e_coh, -0.5 * kb * t * cm.snr_x(osc, drive, t)))
        split_pairs.append((f"T={t:.6g} e_inc", e_inc, 0.5 * kb * t))
    reports.append(worst_of("identity.energy_split", split_pairs, rtol=1e-12, atol=1e-35))

    # exact level sums on a probe oscillator at the reference temperature
    t_probe = drive.t_ref
    probe_temps = [0.8 * t_probe, t_probe, 1.5 * t_probe]
    probe = quantum_probe(osc, t_probe)
    z_pairs = []
    for t in probe_temps:
        log_z = th.log_partition_exact(probe, drive, t, check_rtol=math.inf)
        closed = th.log_partition_undriven(probe, t) + 0.5 * cm.snr_x(probe, drive, t)
        z_pairs.append((f"T={t:.6g}", log_z, closed))
    reports.append(worst_of("identity.partition_closed_form", z_pairs, rtol=1e-12, atol=1e-12,
                            threshold=1.0, detail="level sum ln Z vs ln Z0 + SNR/2"))

    s_pairs = []
    for t in probe_temps:
        s_driven = th.exact_potentials(probe, drive, t).s
        s_free = th.exact_potentials(probe, undriven, t).s
        s_pairs.append((f"T={t:.6g} exact", s_driven, s_free))
    for t in ts:
        s_pairs.append((f"T={t:.6g} closed", _quiet(th.potentials, osc, drive, t).s,
                        _quiet(th.potentials, osc, undriven, t).s))
    reports.append(worst_of("identity.entropy_drive_invariance", s_pairs, rtol=1e-10,
                            detail="S(kappa) vs S(0)"))

    leg_pairs = []
    for t in ts:
        rep = _quiet(th.potentials, osc, drive, t)
        leg_pairs.append((f"T={t:.6g}", rep.u - rep.f_helmholtz, t * rep.s))
    reports.append(worst_of("identity.legendre", leg_pairs, rtol=1e-10, detail="U - F = T S"))

    work_pairs = []
    for t in ts:
        ledger = th.transition(osc, drive, drive.t_ref, t)
        e_coh, _ = _quiet(cm.potential_energy_split, osc, drive, BathParams(t))
        work_pairs.append((f"T={t:.6g}", abs(ledger.work), abs(e_coh)))
    reports.append(worst_of("identity.work_coherent_energy", work_pairs, rtol=1e-12,
                            atol=1e-12 * kb * drive.t_ref, detail="|W(T0 -> T)| = |E_coh(T)|"))

    closure_pairs = []
    for t_to in (0.5 * drive.t_ref, 2.0 * drive.t_ref):
        terms = th.first_law_path(osc, drive, drive.t_ref, t_to, 1000)
        ledger = th.transition(osc, drive, drive.t_ref, t_to)
        closure_pairs.append((f"{drive.t_ref:g}->{t_to:g}", terms.heat_term + terms.work_term, ledger.delta_u))
    reports.append(worst_of("identity.first_law_closure", closure_pairs, rtol=1e-10, atol=1e-10 * kb * drive.t_ref,
                            detail="integral T dS + integral <dH/dT> dT vs delta U"))
    return sorted(reports, key=lambda r: r.check_id)


def central_difference(fn, x, h):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def observed_order(fn, exact, x, h):
    """log2 of the error ratio of central differences at steps h and h/2."""
    e1 = abs(central_difference(fn, x, h) - exact)
    e2 = abs(central_difference(fn, x, 0.5 * h) - exact)
    if e2 == 0:
        return math.inf
    return math.log2(e1 / e2)


def run_derivative_suite(
    osc: OscillatorParams,
    drive: LinearDrive,
    *,
    temps=None,
    step: float = 1e-3,
    gamma_m: float | None = None,
    cool: lg.CoolingParams | None = None,
) -> list[CheckReport]:
    """Finite-difference checks of every closed-form temperature derivative."""
    kb = osc.k_boltzmann
    t0 = drive.t_ref
    if temps is None:
        temps = np.linspace(0.8 * t0, 1.2 * t0, 41)
    temps = [float(t) for t in temps]
    if cool is None or gamma_m is None:
        gamma_m, cool = lg.default_regime(osc)
    reports = []

    def e_coh(t):
        return _quiet(cm.potential_energy_split, osc, drive, BathParams(t))[0]

    h_coh = 1e-4 * t0
    reports.append(worst_of(
        "derivative.ecoh",
        [(f"T={t:.6g}", central_difference(e_coh, t, h_coh), cm.d_ecoh_dt(osc, drive, t)) for t in temps + [t0]],
        rtol=1e-6, atol=1e-30, detail=f"central difference h={h_coh:g} K",
    ))

    def u_of(t):
        return _quiet(th.potentials, osc, drive, t).u

    reports.append(worst_of(
        "derivative.capacity",
        [(f"T={t:.6g}", central_difference(u_of, t, step), th.heat_capacity(osc, drive, t)[0]) for t in temps],
        rtol=1e-8, atol=1e-30, detail=f"dU/dT by central difference h={step:g} K",
    ))

    def s_of(t):
        return _quiet(th.potentials, osc, drive, t).s

    reports.append(worst_of(
        "derivative.capacity_c0",
        [(f"T={t:.6g}", t * central_difference(s_of, t, step), th.heat_capacity(osc, drive, t)[1]) for t in temps],
        rtol=1e-6, detail=f"T dS/dT by central difference h={step:g} K",
    ))

    def f_of(t):
        return _quiet(th.potentials, osc, drive, t).f_helmholtz

    exact_df = -s_of(t0) + cm.d_ecoh_dt(osc, drive, t0)
    order = observed_order(f_of, exact_df, t0, 0.02 * t0)
    reports.append(compare(
        "derivative.free_energy_order", order, 2.0, rtol=0.0, atol=0.1, threshold=math.inf,
        detail="observed order of central differences of F against -S + dE_coh/dT",
    ))

    # U has its maximum where c crosses zero
    root = th.capacity_root(osc, drive)
    if math.isfinite(root):
        fine = np.linspace(root - 5.0, root + 5.0, 10001)
        u_vals = _quiet(th.potentials, osc, drive, fine).u
        peak = float(fine[int(np.argmax(u_vals))])
        reports.append(compare("derivative.capacity_root_u_peak", peak, root, rtol=0.0,
                               atol=float(fine[1] - fine[0]), threshold=math.inf,
                               detail="argmax U vs root of c(T), within one grid step"))
    else:
        c_vals = th.heat_capacity(osc, drive, np.asarray(temps))[0]
        reports.append(compare("derivative.capacity_root_u_peak", float(np.min(c_vals)), kb, rtol=0.0,
                               atol=0.0, threshold=math.inf,
                               detail="undriven: c = k_B everywhere, no root"))

    def u_noneq(t):
        return _quiet(lg.noneq_potentials, osc, drive, BathParams(t, gamma_m), cool).u

    reports.append(worst_of(
        "derivative.noneq_du_dt",
        [(f"T={t:.6g}", central_difference(u_noneq, t, step),
          _quiet(lg.noneq_potentials, osc, drive, BathParams(t, gamma_m), cool).du_dt) for t in temps],
        rtol=1e-8, atol=1e-30, detail="cooled-state dU/dT",
    ))
    return sorted(reports, key=lambda r: r.check_id)


def mc_settings(model: lg.SdeModel):
    """dt = tau/16 and 32 relaxation times of simulation, tau = 1/rate."""
    tau = 1.0 / model.relaxation_rate
    dt = tau / 16.0
    return dt, 512 * dt


def run_stochastic_suite(
    osc: OscillatorParams,
    drive: LinearDrive,
    bath: BathParams,
    cool: lg.CoolingParams,
    *,
    seed: int = 42,
    n_traj: int = 10_000,
    workers: int = 2,
) -> list[CheckReport]:
    """Monte Carlo vs Lyapunov vs weak-damping formula, plus determinism."""
    reports = []
    ratios = lg.regime_ratios(osc, bath, cool, warn=False)
    bound = 5.0 * (ratios["gamma_l_over_omega"] + ratios["epsilon"])

    model = _quiet(lg.build_sde, osc, drive, bath, cool)
    lyap = lg.stationary_lyapunov(model)
    weak = _quiet(lg.stationary_paper, osc, bath, cool)
    reports.append(worst_of(
        "stochastic.weak_damping_vs_lyapunov",
        [("var_x1", weak.var_x1, lyap.var_x1), ("var_p", weak.var_p, lyap.var_p)],
        rtol=bound, threshold=0.0, detail="bound 5 (gamma_L/omega + eps)",
    ))

    vac = lg.stationary_lyapunov(_quiet(lg.build_sde, osc, drive, BathParams(bath.temperature, 0.0), cool))
    reports.append(compare("stochastic.vacuum_var_x1", vac.var_x1, osc.hbar / (2 * osc.mass * osc.omega),
                           rtol=1e-12, threshold=0.0))
    reports.append(compare("stochastic.vacuum_var_p", vac.var_p, 0.5 * osc.hbar * osc.mass * osc.omega,
                           rtol=1e-12, threshold=0.0))

    dt, t_final = mc_settings(model)
    run = lg.simulate_ensemble(model, n_traj, dt, t_final, seed, sample_every=4, workers=1)
    for name, est, se, ref in (
        ("mc_var_x1", run.stationary_var_x1, run.se_var_x1, lyap.var_x1),
        ("mc_var_p", run.stationary_var_p, run.se_var_p, lyap.var_p),
    ):
        rep = compare(f"stochastic.{name}", est, ref, rtol=0.0, atol=3.0 * se, threshold=math.inf,
                      detail=f"n_traj={n_traj}, seed={seed}, 3 standard errors")
        reports.append(rep)

    again = lg.simulate_ensemble(model, n_traj, dt, t_final, seed, sample_every=4, workers=workers)
    diff = max(
        float(np.max(np.abs(again.var_x1 - run.var_x1))),
        float(np.max(np.abs(again.var_p - run.var_p))),
        abs(again.stationary_var_x1 - run.stationary_var_x1),
    )
    reports.append(compare("stochastic.determinism", diff, 0.0, rtol=0.0, atol=0.0, threshold=math.inf,
                           detail=f"workers=1 vs workers={workers}, same seed"))

    eps = ratios["epsilon"]
    reports.append(compare("stochastic.effective_temperature", weak.t_star, eps * bath.temperature,
                           rtol=1.0 / weak.n_star if weak.n_star > 0 else 0.0, threshold=0.0,
                           detail=f"T* vs eps T, n*={weak.n_star:.4g}"))

    snr = cm.snr_x(osc, drive, bath.temperature)
    if snr > 0:
        reports.append(compare("stochastic.snr_star", _quiet(lg.snr_star, osc, drive, bath, cool), snr / eps,
                               rtol=1.0 / weak.n_star, threshold=0.0, detail="SNR* vs SNR / eps"))
    else:
        reports.append(compare("stochastic.snr_star", _quiet(lg.snr_star, osc, drive, bath, cool), 0.0,
                               rtol=0.0, atol=0.0, threshold=math.inf, detail="undriven: SNR* = 0"))
    return sorted(reports, key=lambda r: r.check_id)


def run_all(osc, drive, bath, cool, *, seed=42, n_traj=10_000, workers=2, u_offset=0.0):
    assert_coverage()
    reports = run_identity_suite(osc, drive, seed=seed, u_offset=u_offset)
    reports += run_derivative_suite(osc, drive, gamma_m=bath.gamma_m, cool=cool)
    reports += run_stochastic_suite(osc, drive, bath, cool, seed=seed, n_traj=n_traj, workers=workers)
    return reports
