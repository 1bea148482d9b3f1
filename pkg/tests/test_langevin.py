import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, solve_discrete_lyapunov

from thermopiston import (
    BathParams,
    CoolingParams,
    LinearDrive,
    OscillatorParams,
    SdeModel,
    build_sde,
    effective_temperature,
    noneq_potentials,
    simulate_ensemble,
    snr_star,
    stationary_lyapunov,
    stationary_paper,
)
from thermopiston.core_model import snr_x
from thermopiston.errors import DomainError, ModelError, RegimeWarning, SimulationWarning
from thermopiston.langevin import (
    default_regime,
    effective_temperature_approx,
    regime_ratios,
    step_transition,
    trajectory_rng,
)
from thermopiston.validate import mc_settings

from conftest import H_PLANCK, HBAR, KB


def vacuum(osc):
    return HBAR / (2 * osc.mass * osc.omega), HBAR * osc.mass * osc.omega / 2


def test_build_sde_structure(osc, drive, regime):
    gamma_m, cool = regime
    model = build_sde(osc, drive, BathParams(200.0, gamma_m), cool)
    gl, m, w = cool.gamma_l, osc.mass, osc.omega
    np.testing.assert_allclose(model.drift, [[-gl / 2, 1 / m], [-m * w * w, -(gl / 2 + gamma_m / m)]], rtol=1e-15)
    assert model.diffusion[0, 1] == model.diffusion[1, 0] == 0.0
    assert model.diffusion[0, 0] == pytest.approx(gl * HBAR / (2 * m * w), rel=1e-15)
    assert model.diffusion[1, 1] == pytest.approx(gl * HBAR * m * w / 2 + 2 * gamma_m * KB * 200, rel=1e-14)
    assert model.x1_offset == pytest.approx(1e-12, rel=1e-12)
    assert build_sde(osc, LinearDrive.undriven(), BathParams(200.0, gamma_m), cool).x1_offset == 0.0
    with pytest.raises(ValueError):
        model.drift[0, 0] = 1.0


def test_model_validation():
    stable = [[-1.0, 1.0], [-1.0, -1.0]]
    with pytest.raises(ModelError):
        SdeModel([[0.0, 1.0], [-1.0, 0.0]], np.eye(2))
    with pytest.raises(ModelError):
        SdeModel(stable, [[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(ModelError):
        SdeModel(stable, [[1.0, 0.5], [0.0, 1.0]])


def test_vacuum_stationary_state(osc, drive, regime):
    _, cool = regime
    stats = stationary_lyapunov(build_sde(osc, drive, BathParams(100.0, 0.0), cool))
    vx, vp = vacuum(osc)
    assert stats.var_x1 == pytest.approx(vx, rel=1e-12)
    assert stats.var_p == pytest.approx(vp, rel=1e-12)
    assert abs(stats.cov_x1p) <= 1e-12 * math.sqrt(vx * vp)
    assert stats.n_star == 0.0


def test_equipartition_limit(osc, drive):
    bath = BathParams(100.0, osc.mass * 1e-2 * osc.omega)
    stats = stationary_lyapunov(build_sde(osc, drive, bath, CoolingParams(1e-8 * osc.omega)))
    assert stats.var_x1 == pytest.approx(KB * 100 / osc.stiffness, rel=1e-4)


def test_lyapunov_linear_in_diffusion(osc, drive, regime):
    gamma_m, cool = regime
    model = build_sde(osc, drive, BathParams(100.0, gamma_m), cool)
    one = stationary_lyapunov(model).covariance
    two = stationary_lyapunov(model.scaled_noise(2.0)).covariance
    np.testing.assert_allclose(two, 2 * one, rtol=1e-12)


def test_lyapunov_solves_the_equation(osc, drive, regime):
    gamma_m, cool = regime
    model = build_sde(osc, drive, BathParams(100.0, gamma_m), cool)
    sigma = stationary_lyapunov(model).covariance
    a, d = model.drift, model.diffusion
    residual = a @ sigma + sigma @ a.T + d
    # each residual entry relative to the size of the terms that cancel
    scale = np.abs(a) @ np.abs(sigma) + np.abs(sigma) @ np.abs(a.T) + np.abs(d)
    assert np.all(np.abs(residual) <= 1e-12 * scale)


def test_weak_damping_variance_examples(osc, regime):
    gamma_m, cool = regime
    stats = stationary_paper(osc, BathParams(100.0, gamma_m), cool)
    vx, vp = vacuum(osc)
    thermal = 1e-2 * KB * 100 / osc.stiffness
    assert thermal == pytest.approx(1.380649e-27, rel=1e-12)
    assert stats.var_x1 == pytest.approx(vx * 0.99 + thermal, rel=1e-12)
    assert stats.var_p == pytest.approx(osc.mass**2 * osc.omega**2 * stats.var_x1, rel=1e-12)
    assert stats.cov_x1p == 0.0
    # thermal part over the vacuum part is 2 eps k_B T / hbar w ~ 2 n*
    assert thermal / vx == pytest.approx(2 * 1e-2 * KB * 100 / (H_PLANCK * 1e6), rel=1e-8)
    assert thermal / vx == pytest.approx(4.17e4, rel=1e-3)

    tiny = stationary_paper(osc, BathParams(100.0, osc.mass * 1e-12 * cool.gamma_l), cool)
    assert tiny.var_x1 == pytest.approx(vx, rel=1e-6)
    full = stationary_paper(osc, BathParams(100.0, osc.mass * cool.gamma_l), cool)
    assert full.var_x1 == pytest.approx(KB * 100 / osc.stiffness, rel=1e-14)


def test_weak_damping_vs_lyapunov_in_regime(osc, drive, regime):
    gamma_m, cool = regime
    bath = BathParams(100.0, gamma_m)
    ratios = regime_ratios(osc, bath, cool)
    bound = 5 * (ratios["gamma_l_over_omega"] + ratios["epsilon"])
    lyap = stationary_lyapunov(build_sde(osc, drive, bath, cool))
    weak = stationary_paper(osc, bath, cool)
    assert abs(weak.var_x1 - lyap.var_x1) <= bound * abs(lyap.var_x1)
    assert abs(weak.var_p - lyap.var_p) <= bound * abs(lyap.var_p)


def test_regime_warnings(osc, regime):
    _, cool = regime
    with warnings.catch_warnings():
        warnings.simplefilter("error", RegimeWarning)
        regime_ratios(osc, BathParams(100.0, regime[0]), cool)
        with pytest.raises(RegimeWarning):
            regime_ratios(osc, BathParams(100.0, osc.mass * cool.gamma_l), cool)
    assert regime_ratios(osc, BathParams(100.0, regime[0]), cool, warn=False)["epsilon"] == pytest.approx(1e-2)


def test_default_regime_matches_test_regime(osc, regime):
    gamma_m, cool = default_regime(osc)
    assert cool.gamma_l == pytest.approx(regime[1].gamma_l, rel=1e-14)
    assert gamma_m == pytest.approx(regime[0], rel=1e-14)


def test_effective_temperature_examples(osc, regime):
    vx, _ = vacuum(osc)
    assert effective_temperature(osc, vx) == (0.0, 0.0)
    n1, t1 = effective_temperature(osc, 3 * vx)
    assert n1 == pytest.approx(1.0, rel=1e-14)
    assert t1 == pytest.approx(HBAR * osc.omega / (KB * math.log(2)), rel=1e-14)
    with pytest.raises(DomainError):
        effective_temperature(osc, 0.5 * vx)

    gamma_m, cool = regime
    stats = stationary_paper(osc, BathParams(100.0, gamma_m), cool)
    n_ref = 1e-2 * KB * 100 / (H_PLANCK * 1e6)
    assert stats.n_star == pytest.approx(n_ref, rel=1e-4)
    assert stats.n_star == pytest.approx(2.08e4, rel=2e-3)
    assert abs(stats.t_star - 1.0) <= 1.0 / stats.n_star
    assert effective_temperature_approx(osc, stats.n_star) == pytest.approx(stats.t_star, rel=1 / stats.n_star)


def test_snr_star_examples(osc, drive, regime):
    gamma_m, cool = regime
    bath = BathParams(200.0, gamma_m)
    assert snr_star(osc, LinearDrive.undriven(), bath, cool) == 0.0
    n_star = stationary_paper(osc, bath, cool).n_star
    value = snr_star(osc, drive, bath, cool)
    assert value == pytest.approx(snr_x(osc, drive, 200.0) / 1e-2, rel=1 / n_star)
    assert round(value, 1) == 362.1
    exact = snr_star(osc, drive, bath, cool, exact=True)
    assert exact == pytest.approx(value, rel=0.05)
    eq = BathParams(200.0, osc.mass * cool.gamma_l)
    assert snr_star(osc, drive, eq, cool) == pytest.approx(snr_x(osc, drive, 200.0), rel=1e-13)


def test_noneq_examples(osc, drive, regime):
    gamma_m, cool = regime
    free = noneq_potentials(osc, LinearDrive.undriven(), BathParams(200.0, gamma_m), cool)
    assert free.u == pytest.approx(KB * free.t_star, rel=1e-14)
    rep = noneq_potentials(osc, drive, BathParams(200.0, gamma_m), cool)
    assert rep.u == pytest.approx(KB * 2.0 - 5e-21, rel=1e-3)
    assert rep.u - rep.f_helmholtz == pytest.approx(rep.t_star * rep.s, rel=1e-10)
    assert rep.epsilon == pytest.approx(1e-2)


@pytest.mark.parametrize("t", [90.0, 113.0, 150.0, 200.0])
def test_noneq_du_dt_matches_finite_difference(osc, drive, regime, t):
    gamma_m, cool = regime
    h = 1e-3

    def u(temp):
        return noneq_potentials(osc, drive, BathParams(temp, gamma_m), cool).u

    fd = (u(t + h) - u(t - h)) / (2 * h)
    closed = noneq_potentials(osc, drive, BathParams(t, gamma_m), cool).du_dt
    assert fd == pytest.approx(closed, rel=1e-8)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(1e-6, 1e-1), st.floats(0.0, 1.0), st.floats(1.0, 1e3),
)
def test_heisenberg_floor(gl_ratio, eps, t):
    osc = OscillatorParams.default()
    cool = CoolingParams(gl_ratio * osc.omega)
    bath = BathParams(t, eps * osc.mass * cool.gamma_l)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for stats in (
            stationary_lyapunov(build_sde(osc, LinearDrive.default(), bath, cool)),
            stationary_paper(osc, bath, cool),
        ):
            assert stats.var_x1 * stats.var_p >= (HBAR / 2) ** 2 * (1 - 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-5, 1e-1))
def test_mean_invariant_under_cooling(gl_ratio):
    osc, drive = OscillatorParams.default(), LinearDrive.default()
    bath = BathParams(150.0, 1.0e-20)
    model = build_sde(osc, drive, bath, CoolingParams(gl_ratio * osc.omega))
    assert model.x1_offset == pytest.approx(drive.slope * 50.0 / osc.stiffness, rel=1e-14)


# ---------------------------------------------------------------- simulation


@pytest.fixture
def cooled_model(osc, drive, regime):
    gamma_m, cool = regime
    return build_sde(osc, drive, BathParams(100.0, gamma_m), cool)


def test_exact_step_reproduces_lyapunov(cooled_model):
    dt, _ = mc_settings(cooled_model)
    phi, q = step_transition(cooled_model, dt)
    # rescale to comparable units before the discrete Lyapunov solve
    s = np.diag([1.0, 1.0 / (cooled_model.mass * cooled_model.omega)])
    disc = solve_discrete_lyapunov(s @ phi @ np.linalg.inv(s), s @ q @ s)
    cont = s @ stationary_lyapunov(cooled_model).covariance @ s
    np.testing.assert_allclose(disc, cont, rtol=1e-8, atol=1e-8 * np.max(np.abs(cont)))


def test_euler_bias_is_first_order():
    model = SdeModel([[-0.25, 1.0], [-1.0, -0.35]], np.diag([0.25, 0.45]))
    target = stationary_lyapunov(model).covariance

    def bias(dt):
        phi, q = step_transition(model, dt, "euler")
        return np.max(np.abs(solve_discrete_lyapunov(phi, q) - target))

    b1, b2 = bias(0.02), bias(0.01)
    assert b1 > 0
    assert b1 / b2 == pytest.approx(2.0, rel=0.05)
    phi, q = step_transition(model, 0.02, "exact")
    np.testing.assert_allclose(solve_discrete_lyapunov(phi, q), target, rtol=1e-10)


def test_deterministic_limit_matches_matrix_exponential(cooled_model):
    model = cooled_model.scaled_noise(0.0)
    dt, _ = mc_settings(model)
    x0 = np.array([1e-12, 0.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SimulationWarning)
        run = simulate_ensemble(model, 4, dt, 64 * dt, seed=0, x0=x0)
    expected = np.array([(expm(model.drift * t) @ x0)[0] for t in run.times])
    assert np.max(np.abs(run.mean_x1 - expected)) <= 1e-10 * np.max(np.abs(expected))
    assert np.all(run.var_x1 == 0.0)
    assert np.all(run.var_p == 0.0)
    stats = stationary_lyapunov(model)
    assert stats.var_x1 == 0.0
    assert math.isnan(stats.n_star) and math.isnan(stats.t_star)


def test_vacuum_monte_carlo(osc, drive, regime):
    _, cool = regime
    model = build_sde(osc, drive, BathParams(100.0, 0.0), cool)
    dt, t_final = mc_settings(model)
    run = simulate_ensemble(model, 10_000, dt, t_final, seed=42, sample_every=4)
    vx, vp = vacuum(osc)
    assert abs(run.stationary_var_x1 - vx) <= 3 * run.se_var_x1
    assert abs(run.stationary_var_p - vp) <= 3 * run.se_var_p


@pytest.mark.parametrize("n_traj", [1_000, 10_000])
def test_monte_carlo_matches_lyapunov(cooled_model, n_traj):
    dt, t_final = mc_settings(cooled_model)
    run = simulate_ensemble(cooled_model, n_traj, dt, t_final, seed=7, sample_every=4)
    ref = stationary_lyapunov(cooled_model)
    assert abs(run.stationary_var_x1 - ref.var_x1) <= 3 * run.se_var_x1
    assert abs(run.stationary_var_p - ref.var_p) <= 3 * run.se_var_p
    assert abs(run.mean_x1[-1]) <= 5 * math.sqrt(ref.var_x1 / n_traj)


def test_standard_error_scaling(cooled_model):
    dt, t_final = mc_settings(cooled_model)
    small = simulate_ensemble(cooled_model, 1_000, dt, t_final, seed=3, sample_every=4)
    large = simulate_ensemble(cooled_model, 10_000, dt, t_final, seed=3, sample_every=4)
    assert small.se_var_x1 / large.se_var_x1 == pytest.approx(math.sqrt(10), rel=0.2)
    assert small.se_var_p / large.se_var_p == pytest.approx(math.sqrt(10), rel=0.2)


def test_step_size_robustness(cooled_model):
    dt, t_final = mc_settings(cooled_model)
    coarse = simulate_ensemble(cooled_model, 2_000, dt, t_final, seed=11, sample_every=1)
    fine = simulate_ensemble(cooled_model, 2_000, dt / 10, t_final, seed=12, sample_every=10)
    for a, sa, b, sb in (
        (coarse.stationary_var_x1, coarse.se_var_x1, fine.stationary_var_x1, fine.se_var_x1),
        (coarse.stationary_var_p, coarse.se_var_p, fine.stationary_var_p, fine.se_var_p),
    ):
        assert abs(a - b) <= 3 * math.hypot(sa, sb)


def test_bit_identical_across_workers(cooled_model):
    dt, t_final = mc_settings(cooled_model)
    runs = [
        simulate_ensemble(cooled_model, 1_500, dt, t_final, seed=42, sample_every=4, workers=w, block_size=256)
        for w in (1, 4)
    ]
    for name in ("mean_x1", "var_x1", "var_p", "cov_x1p"):
        assert np.array_equal(getattr(runs[0], name), getattr(runs[1], name))
    assert runs[0].stationary_var_x1 == runs[1].stationary_var_x1
    assert runs[0].se_var_p == runs[1].se_var_p


def test_trajectory_streams_are_independent_of_order():
    a = trajectory_rng(5, 17).standard_normal(8)
    trajectory_rng(5, 3).standard_normal(100)
    assert np.array_equal(a, trajectory_rng(5, 17).standard_normal(8))
    assert not np.array_equal(a, trajectory_rng(5, 18).standard_normal(8))
    assert not np.array_equal(a, trajectory_rng(6, 17).standard_normal(8))


def test_simulation_argument_errors(cooled_model):
    dt, t_final = mc_settings(cooled_model)
    with pytest.raises(DomainError):
        simulate_ensemble(cooled_model, 10, 0.0, t_final, seed=0)
    with pytest.raises(DomainError):
        simulate_ensemble(cooled_model, 10, dt, 2.5 * dt, seed=0)
    with pytest.raises(DomainError):
        simulate_ensemble(cooled_model, 1, dt, t_final, seed=0)
    with pytest.warns(SimulationWarning):
        simulate_ensemble(cooled_model, 4, dt, 8 * dt, seed=0)
