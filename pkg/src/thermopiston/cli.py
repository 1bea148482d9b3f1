"""Command-line front end.

    thermopiston [--config FILE] [--out DIR] [--seed N] [--format csv]
                 {sweep,figures,simulate,validate} [--section.field VALUE ...]

Any config field can be overridden with ``--section.field value`` (for
example ``--bath.t 150`` or ``--drive.kappa 0``).  Defaults reproduce the
figure-caption constants: alpha = 1e-12 m/K, m w^2 = 1e4 kg/s^2,
kappa = 1e2 N/m, T0 = 100 K, with w = 2 pi x 1 MHz and m = 1e4 / w^2.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import core_model as cm
from . import langevin as lg
from . import thermo as th
from . import validate as va
from .config import ConfigError, RunConfig, apply_override, load_config_file, parse_value
from .core_model import BathParams
from .errors import ModelError, NumericalError, ThermoPistonError

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

SWEEP_COLUMNS = (
    "T_kelvin", "theta", "f_newton", "mean_x_m", "var_x_m2", "snr", "e_coh_J", "e_inc_J",
    "U_J", "F_J", "S_J_per_K", "c_J_per_K", "c0_J_per_K", "work_from_Tref_J", "heat_from_Tref_J",
)

FIGURE_FILES = (
    "fig3_snr.csv",
    "fig4_work.csv",
    "fig5_free_energy.csv",
    "fig6_entropy.csv",
    "fig7_internal_energy.csv",
    "fig8_capacity.csv",
)

# corruption applied by --corrupt-fixture, in joules
CORRUPT_U_OFFSET = 1e-22


def _fmt(value):
    if isinstance(value, str):
        return value
    return "%.17g" % value


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def sweep_temperatures(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.sweep.t_min, cfg.sweep.t_max, cfg.sweep.n_points)


def sweep_rows(cfg: RunConfig):
    osc, drive = cfg.osc, cfg.drive
    rows = []
    for t in sweep_temperatures(cfg):
        t = float(t)
        bath = BathParams(t)
        state = cm.equilibrium_state(osc, drive, bath)
        e_coh, e_inc = cm.potential_energy_split(osc, drive, bath)
        rep = th.potentials(osc, drive, t)
        ledger = th.transition(osc, drive, drive.t_ref, t)
        rows.append((
            t, t / drive.t_ref, cm.drive_force(drive, t), state.mean_x, state.var_x,
            cm.snr_x(osc, drive, t), e_coh, e_inc, rep.u, rep.f_helmholtz, rep.s,
            rep.c, rep.c0, ledger.work, ledger.heat,
        ))
    return rows


def cmd_sweep(cfg: RunConfig, out_dir: Path) -> Path:
    return write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, sweep_rows(cfg))


def _branch(t, t_ref):
    if t > t_ref:
        return "pushing"
    if t < t_ref:
        return "pulling"
    return "reference"


def cmd_figures(cfg: RunConfig, out_dir: Path) -> list[Path]:
    osc, drive = cfg.osc, cfg.drive
    e0 = osc.ground_energy
    fig3, fig4, fig5, fig6, fig7, fig8 = ([] for _ in range(6))
    for t in sweep_temperatures(cfg):
        t = float(t)
        theta = t / drive.t_ref
        mean_x = cm.drive_force(drive, t) / osc.stiffness
        snr = cm.snr_x(osc, drive, t)
        rep = th.potentials(osc, drive, t)
        work = th.transition(osc, drive, drive.t_ref, t).work
        fig3.append((t, theta, snr, mean_x, 1e12 * mean_x))
        fig4.append((t, theta, _branch(t, drive.t_ref), mean_x, snr, work, abs(work) / e0))
        fig5.append((t, rep.f_helmholtz, rep.f0, rep.f_helmholtz / e0, rep.f0 / e0))
        fig6.append((t, rep.s, rep.s / osc.k_boltzmann))
        fig7.append((t, rep.u, rep.u0, rep.u / e0, rep.u0 / e0))
        fig8.append((t, rep.c, rep.c0))
    headers = (
        ("T_kelvin", "theta", "snr", "mean_x_m", "mean_x_1e12"),
        ("T_kelvin", "theta", "branch", "mean_x_m", "snr", "work_J", "abs_work_E0"),
        ("T_kelvin", "F_J", "F0_J", "F_E0", "F0_E0"),
        ("T_kelvin", "S_J_per_K", "S_kB"),
        ("T_kelvin", "U_J", "U0_J", "U_E0", "U0_E0"),
        ("T_kelvin", "c_J_per_K", "c0_J_per_K"),
    )
    tables = (fig3, fig4, fig5, fig6, fig7, fig8)
    return [write_csv(out_dir / name, hdr, rows) for name, hdr, rows in zip(FIGURE_FILES, headers, tables)]


def simulation_grid(cfg: RunConfig, model: lg.SdeModel):
    dt, t_final = va.mc_settings(model)
    sim = cfg.simulation
    if sim.dt is not None:
        dt = sim.dt
    if sim.t_final is not None:
        t_final = sim.t_final
    elif sim.dt is not None:
        t_final = dt * math.ceil(32.0 / (model.relaxation_rate * dt))
    return dt, t_final


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> tuple[Path, Path]:
    if cfg.cool is None:
        raise ConfigError("cooling: simulate needs a cooling section")
    osc, drive, bath, cool, sim = cfg.osc, cfg.drive, cfg.bath, cfg.cool, cfg.simulation
    model = lg.build_sde(osc, drive, bath, cool)
    if sim.noise_scale != 1.0:
        model = model.scaled_noise(sim.noise_scale)
    dt, t_final = simulation_grid(cfg, model)
    run = lg.simulate_ensemble(
        model, sim.n_traj, dt, t_final, sim.seed,
        sample_every=sim.sample_every, method=sim.method, workers=sim.workers,
    )
    series = write_csv(
        out_dir / "simulate_timeseries.csv",
        ("t_s", "mean_x1_m", "var_x1_m2", "var_p_kg2m2_per_s2"),
        zip(run.times, run.mean_x1, run.var_x1, run.var_p),
    )

    lyap = lg.stationary_lyapunov(model)
    weak = lg.stationary_paper(osc, bath, cool)
    summary = {
        "seed": sim.seed,
        "n_traj": sim.n_traj,
        "dt_s": dt,
        "t_final_s": t_final,
        "method": sim.method,
        "window_start_s": run.window_start,
        "mc_var_x1_m2": run.stationary_var_x1,
        "mc_var_p": run.stationary_var_p,
        "mc_cov_x1p": run.stationary_cov_x1p,
        "se_var_x1_m2": run.se_var_x1,
        "se_var_p": run.se_var_p,
        "se_cov_x1p": run.se_cov_x1p,
        "lyapunov_var_x1_m2": lyap.var_x1,
        "lyapunov_var_p": lyap.var_p,
        "lyapunov_cov_x1p": lyap.cov_x1p,
        "weak_damping_var_x1_m2": weak.var_x1,
        "weak_damping_var_p": weak.var_p,
        "epsilon": lg.cooling_ratio(osc, bath, cool),
        "n_star": weak.n_star,
        "t_star_K": weak.t_star,
        "snr": cm.snr_x(osc, drive, bath.temperature),
        "snr_star": lg.snr_star(osc, drive, bath, cool),
        "mean_x_m": model.x1_offset,
    }
    summary_path = out_dir / "simulate_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return series, summary_path


def cmd_validate(cfg: RunConfig, out_dir: Path | None, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    if cfg.cool is None:
        raise ConfigError("cooling: validate needs a cooling section")
    reports = va.run_all(
        cfg.osc, cfg.drive, cfg.bath, cfg.cool,
        seed=cfg.simulation.seed,
        n_traj=cfg.simulation.n_traj,
        workers=max(2, cfg.simulation.workers),
        u_offset=CORRUPT_U_OFFSET if cfg.corrupt else 0.0,
    )
    lines = [r.to_json() for r in reports]
    for line in lines:
        print(line, file=stream)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "validate_report.jsonl").write_text("\n".join(lines) + "\n")
    failed = sum(r.status == va.FAIL for r in reports)
    return EXIT_VALIDATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermopiston",
        allow_abbrev=False,
        description=__doc__.split("\n\n")[0].strip(),
        epilog=(
            "Override any config field with --section.field VALUE, e.g. --bath.t 150. "
            "Defaults: alpha=1e-12 m/K, m w^2=1e4 kg/s^2, kappa=1e2 N/m, T0=100 K, "
            "w=2 pi x 1e6 rad/s with m=1e4/w^2."
        ),
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output directory (overrides output.path)")
    parser.add_argument("--seed", type=int, help="RNG seed (overrides simulation.seed)")
    parser.add_argument("--format", choices=["csv"], default=None, help="output format")
    parser.add_argument(
        "--corrupt-fixture", action="store_true",
        help="validate: add 1e-22 J to U to demonstrate a failing check",
    )
    parser.add_argument("command", choices=["sweep", "figures", "simulate", "validate"])
    return parser


def _split_overrides(extra):
    overrides = []
    it = iter(extra)
    for token in it:
        if not token.startswith("--") or "." not in token:
            raise ConfigError(f"unrecognized argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, text = key.split("=", 1)
        else:
            try:
                text = next(it)
            except StopIteration:
                raise ConfigError(f"--{key}: missing value") from None
        overrides.append((key, parse_value(text)))
    return overrides


def resolve_config(args, extra) -> RunConfig:
    data = load_config_file(args.config) if args.config else {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    for key, value in _split_overrides(extra):
        data = apply_override(data, key, value)
    if args.out is not None:
        data = apply_override(data, "output.path", args.out)
    if args.seed is not None:
        data = apply_override(data, "simulation.seed", args.seed)
    if args.format is not None:
        data = apply_override(data, "output.format", args.format)
    if args.corrupt_fixture:
        data = apply_override(data, "validate.corrupt", True)
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = resolve_config(args, extra)
        out_dir = Path(cfg.output_path)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "sweep":
                print(cmd_sweep(cfg, out_dir))
            elif args.command == "figures":
                for path in cmd_figures(cfg, out_dir):
                    print(path)
            elif args.command == "simulate":
                for path in cmd_simulate(cfg, out_dir):
                    print(path)
            else:
                return cmd_validate(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ModelError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThermoPistonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
