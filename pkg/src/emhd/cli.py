"""Command-line front end: ``emhd simulate|check|curves|saliency|fit --config <path>``."""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .config import RunConfig, build_energy, build_scenario, load_config, model_phi_m
from .dynamics import ConnectionScheme, FullState, Resistances, constitutive
from .energy import check_reciprocity, check_symmetry, expected_symmetries, sample_points
from .energy.checks import CheckReport
from .energy.models import transform_energy
from .errors import ConfigurationError, NumericError, ParameterError
from .frames import Frame, convert_array
from .sim import ConstantDq, ConstantTorque, Scenario, consistent_state, simulate, steady_state

__all__ = ["main", "run_checks", "output_dir"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4


def output_dir(cli_out: str | None, cfg: RunConfig, config_path: Path) -> Path:
    """``--out`` beats ``EMHD_OUT``, which beats the config's ``outputs.dir`` (relative to the cwd)."""
    if cli_out:
        out = Path(cli_out)
    elif os.environ.get("EMHD_OUT"):
        out = Path(os.environ["EMHD_OUT"])
    else:
        out = Path(cfg.outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# checks


def _energy_checks(cfg: RunConfig, H) -> list[CheckReport]:
    base = build_scenario(cfg, H)
    dur = min(base.duration, 0.1)
    cons = Scenario(
        H, base.initial, dur, base.dt, base.scheme, base.frame,
        ConstantDq((0.0, 0.0)), ConstantTorque(0.0), Resistances(0.0, 0.0), base.method,
    )
    a = analysis.energy_audit(simulate(cons), cons.resistances, H)
    out = [CheckReport("energy[conservative]", a.mismatch, 1e-6, a.mismatch < 1e-6)]
    a = analysis.energy_audit(simulate(base), base.resistances, H)
    out.append(CheckReport("energy[driven]", a.mismatch, 1e-5, a.mismatch < 1e-5))
    return out


def _frame_checks(cfg: RunConfig, H) -> list[CheckReport]:
    base = build_scenario(cfg, H)
    if base.frame is Frame.ABC:
        return [CheckReport("frames[skipped:abc]", 0.0, 1e-8, True)]
    other = Frame.ROTOR_DQ0 if base.frame is Frame.ALPHABETA0 else Frame.ALPHABETA0
    dur = min(base.duration, 0.1)
    sc1 = Scenario(H, base.initial, dur, base.dt, base.scheme, base.frame, base.source, base.load,
                   base.resistances, base.method, base.prescribed_speed)
    x0 = sc1.initial_array()
    st = FullState.from_array(x0, base.frame, 3)
    sc2 = Scenario(H, st, dur, base.dt, base.scheme, other, base.source, base.load,
                   base.resistances, base.method, base.prescribed_speed)
    t1, t2 = simulate(sc1), simulate(sc2)
    worst = 0.0
    for k in range(len(t1)):
        th, ths = t2.theta[k], t1.theta_s[k]
        ps = convert_array(t2.phis[k], other, base.frame, theta=th, theta_s=ths, kind="stator")
        pr = convert_array(t2.phir[k], other, base.frame, theta=th, theta_s=ths, kind="rotor")
        worst = max(worst, np.abs(ps - t1.phis[k]).max(), np.abs(pr - t1.phir[k]).max())
    out = [CheckReport(f"frames[{base.frame.value}~{other.value}]", worst, 1e-8, worst < 1e-8)]
    # pointwise torque agreement of the two energy representations
    Ha, Hb = transform_energy(H, base.frame), transform_energy(H, other)
    tq = 0.0
    for k in np.linspace(0, len(t1) - 1, 50).astype(int):
        sa, ths = t1.state(k), t1.theta_s[k]
        xb = sa.to_array()
        xb[0:3] = convert_array(xb[0:3], base.frame, other, theta=sa.theta, theta_s=ths, kind="stator")
        xb[3:6] = convert_array(xb[3:6], base.frame, other, theta=sa.theta, theta_s=ths, kind="rotor")
        sb = FullState.from_array(xb, other, Ha.rotor_dim)
        ta, tb = constitutive(Ha, sa, _omega_s(t1, k)).Te, constitutive(Hb, sb).Te
        tq = max(tq, abs(ta - tb) / max(1.0, abs(ta)))
    out.append(CheckReport("frames[torque]", tq, 1e-10, tq < 1e-10))
    return out


def _omega_s(traj, k: int) -> float:
    if traj.frame is not Frame.DQ0 or len(traj) < 2:
        return 0.0
    j = min(k, len(traj) - 2)
    return float((traj.theta_s[j + 1] - traj.theta_s[j]) / traj.dt)


def harmonic_run(cfg: RunConfig, H):
    """Prescribed-speed run in DQ0 settled onto its periodic regime."""
    hc = cfg.checks.harmonics
    T = 2 * math.pi / hc.omega
    dt = T / (6 * hc.steps_per_sixth)
    n_settle = math.ceil(hc.settle / T)
    duration = (n_settle + hc.n_periods) * T
    src = build_scenario(cfg, H).source
    if not isinstance(src, ConstantDq):
        src = ConstantDq((0.0, 0.0))
    Hd = transform_energy(H, Frame.ROTOR_DQ0)
    x0 = build_scenario(cfg, H).initial_array()
    x0[7] = H.mech.J * hc.omega
    sc = Scenario(Hd, x0, duration, dt, cfg.connection, Frame.ROTOR_DQ0, src, ConstantTorque(0.0),
                  Resistances(cfg.resistances.Rs, cfg.resistances.Rr), cfg.integration.method, True)
    ss = steady_state(sc, hc.omega)
    sc.initial = consistent_state(Hd, ss.to_array(), cfg.connection)
    return simulate(sc)


def _harmonic_checks(cfg: RunConfig, H) -> tuple[list[CheckReport], list[str]]:
    hc = cfg.checks.harmonics
    traj = harmonic_run(cfg, H)
    scheme = ConnectionScheme(cfg.connection)
    rule = 6 if scheme.star else 3
    sp = analysis.torque_spectrum(traj, hc.n_periods, hc.omega, hc.max_order)
    leak = sp.leakage(rule)
    out = [CheckReport(f"harmonics[Te:{rule}k]", leak, hc.threshold, leak < hc.threshold)]
    table = [f"Te order={k} amplitude={sp.amplitude(k):.6e}" for k in range(0, hc.max_order + 1, rule)]
    if scheme.star:
        sv = analysis.star_point_spectrum(traj, hc.n_periods, hc.omega, hc.max_order)
        lv = sv.leakage(3)
        out.append(CheckReport("harmonics[v_N:3k]", lv, hc.threshold, lv < hc.threshold))
        table += [f"v_N order={k} amplitude={sv.amplitude(k):.6e}" for k in range(0, hc.max_order + 1, 3)]
    return out, table


def run_checks(cfg: RunConfig) -> tuple[list[CheckReport], list[str]]:
    """Run the requested suites; model-construction failures count as failed checks."""
    try:
        H = build_energy(cfg.model)
    except ParameterError as exc:
        return [CheckReport(f"reciprocity[construction: {exc}]", math.inf, 1e-10, False)], []
    reports: list[CheckReport] = []
    extra: list[str] = []
    rng = np.random.default_rng(cfg.checks.seed)
    pts = sample_points(H, cfg.checks.n_points, rng)
    for suite in cfg.checks.run:
        if suite == "reciprocity":
            reports.append(check_reciprocity(H, pts))
        elif suite == "symmetry":
            for kind, expect in expected_symmetries(H):
                r = check_symmetry(H, kind, pts)
                ok = r.passed == expect
                label = f"{r.name}[expect {'hold' if expect else 'break'}]"
                reports.append(CheckReport(label, r.value, r.threshold, ok, r.n_points))
        elif suite == "energy":
            reports.extend(_energy_checks(cfg, H))
        elif suite == "harmonics":
            rep, table = _harmonic_checks(cfg, H)
            reports.extend(rep)
            extra.extend(table)
        elif suite == "frames":
            reports.extend(_frame_checks(cfg, H))
    return reports, extra


# commands


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    traj = simulate(build_scenario(cfg))
    path = traj.to_csv(out / cfg.outputs.trajectory)
    print(f"trajectory {path} rows={len(traj)}")
    return EXIT_OK


def cmd_check(cfg: RunConfig, out: Path) -> int:
    reports, extra = run_checks(cfg)
    lines = [r.line() for r in reports] + extra
    (out / "check_report.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def cmd_curves(cfg: RunConfig, out: Path) -> int:
    H = build_energy(cfg.model)
    cc = cfg.curves
    phi_m = model_phi_m(cfg.model)
    for axis, rng in (("D", cc.d_range), ("Q", cc.q_range)):
        samples = analysis.flux_current_curves(H, axis, rng, cc.n_points)
        path = analysis.curves_to_csv(samples, axis, out / f"curve_{axis}.csv", phi_m=phi_m)
        print(f"curve {axis} {path} points={len(samples)}")
    return EXIT_OK


def cmd_saliency(cfg: RunConfig, out: Path) -> int:
    H = build_energy(cfg.model)
    sc = cfg.saliency
    thetas = np.linspace(0.0, math.pi, sc.n_theta, endpoint=False)
    rows = []
    for th in thetas:
        S = analysis.saliency(H, th, sc.phi)
        y = analysis.virtual_output(S, sc.v_high)
        rows.append([th, *S.matrix.ravel(), *y])
    data = np.array(rows)
    path = out / "saliency.csv"
    np.savetxt(path, data, delimiter=",", header="theta,S11,S12,S21,S22,y_alpha,y_beta", comments="", fmt="%.17g")
    variation = float(np.max(np.ptp(data[:, 1:5], axis=0)))
    asym = float(np.max(np.abs(data[:, 2] - data[:, 3])))
    kind = "constant" if variation < 1e-12 else "theta-dependent"
    print(f"saliency {path} variation={variation:.3e} asymmetry={asym:.3e} {kind}")
    return EXIT_OK


def cmd_fit(cfg: RunConfig, out: Path, config_path: Path) -> int:
    if cfg.fit is None:
        raise ConfigurationError("fit: section with a samples CSV path is required")
    spath = Path(cfg.fit.samples)
    if not spath.is_absolute():
        spath = config_path.parent / spath
    samples = analysis.FluxSamples.from_csv(spath)
    phi_m = cfg.fit.phi_m if cfg.fit.phi_m is not None else model_phi_m(cfg.model)
    H = build_energy(cfg.model)
    res = analysis.fit_saturation(samples, phi_m, H.mech)
    doc = {name: float(getattr(res.params, name)) for name in analysis.SATURATION_NAMES}
    doc["phi_m"] = float(phi_m)
    (out / "fit_params.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    for line in res.report():
        print(line)
    print(f"fit {out / 'fit_params.yaml'} converged={res.converged}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emhd", description="Energy-based AC motor models")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "check", "curves", "saliency", "fit"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", default=None, help="output directory")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    config_path = Path(args.config)
    try:
        cfg = load_config(config_path)
        out = output_dir(args.out, cfg, config_path)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "check":
            return cmd_check(cfg, out)
        if args.command == "curves":
            return cmd_curves(cfg, out)
        if args.command == "saliency":
            return cmd_saliency(cfg, out)
        return cmd_fit(cfg, out, config_path)
    except (ConfigurationError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        where = f" at t={exc.time:.9g} s" if getattr(exc, "time", None) is not None else ""
        print(f"numeric failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
