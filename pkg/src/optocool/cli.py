"""Command-line harness: config loading, dispatch, artifact generation.

Every artifact (CSV or structured text) starts with ``#`` header lines
carrying the command, the fully resolved configuration, and the seed, so a
rerun with the same inputs is byte identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import compare_single_step, plan_cascade
from .config import ExperimentConfig, load_config
from .cooling import (CoolingSetup, closed_loop_variance,
                      effective_temperature, effective_temperature_floor,
                      noise_temperature, optimal_gain)
from .errors import ConfigError
from .feedback import actuator_gain
from .psd import estimate_psd
from .resonator import fit_q_from_ringdown
from .simulate import simulate
from .spectrum import SpectrumRecord, write_spectrum_csv

TWO_PI = 2.0 * math.pi

OUT_DIR_ENV = "OPTOCOOL_OUT"

MATCH_TOLERANCE = 0.10  # relative deviation separating MATCH from DEVIATION


def _header_lines(command: str, cfg: ExperimentConfig, seed=None) -> list:
    lines = [f"optocool {__version__} {command}"]
    if seed is not None:
        lines.append(f"seed = {seed}")
    lines.extend(cfg.echo())
    return lines


def _write_text(path: Path, command: str, cfg: ExperimentConfig, body: list,
                seed=None) -> None:
    with open(path, "w") as fh:
        for line in _header_lines(command, cfg, seed):
            fh.write(f"# {line}\n")
        for line in body:
            fh.write(line + "\n")


def _write_csv(path: Path, command: str, cfg: ExperimentConfig, columns,
               rows, seed=None) -> None:
    buf = io.StringIO()
    for line in _header_lines(command, cfg, seed):
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def _format_gain(g: float) -> str:
    return f"{g:g}".replace("+", "")


def _gain_grid(res, g: float) -> np.ndarray:
    """Log band plus a linear window resolving the closed-loop line."""
    w0 = res.omega0
    gamma_eff = (1.0 + g) * float(res.damping_rate(w0))
    broad = np.logspace(math.log10(w0 / 10), math.log10(10 * w0), 1001)
    half = min(12.0 * gamma_eff, 0.5 * w0)
    narrow = np.linspace(w0 - half, w0 + half, 1001)
    grid = np.unique(np.concatenate([broad, narrow]))
    return grid[grid > 0.0]


# -- subcommands ---------------------------------------------------------


def _cmd_susceptibility(args, cfg: ExperimentConfig, out: Path) -> None:
    res = cfg.resonator()
    from .cooling import effective_susceptibility

    for g in _parse_float_list(args.gains):
        omega = _gain_grid(res, g)
        chi = effective_susceptibility(res, g, omega)
        rec = SpectrumRecord(omega, chi, "response", "m/N")
        path = out / f"susceptibility_g{_format_gain(g)}.csv"
        write_spectrum_csv(rec, path,
                           _header_lines(f"susceptibility g={g:g}", cfg))
        print(f"wrote {path}")


def _cmd_noise_budget(args, cfg: ExperimentConfig, out: Path) -> None:
    res = cfg.resonator()
    fpi = cfg.fpi()
    g = cfg.get("cooling", "gain")
    omega = _gain_grid(res, g)
    thermal = fpi.output_spectrum(res, g, omega=omega).values
    readout = fpi.noise_asd(omega)
    total = np.sqrt(thermal ** 2 + readout ** 2)
    rows = zip(omega / TWO_PI, total, thermal, readout)
    _write_csv(out / "noise_budget.csv", "noise-budget", cfg,
               ["freq_hz", "total_hz_rthz", "thermal_hz_rthz",
                "readout_hz_rthz"], rows)
    print(f"wrote {out / 'noise_budget.csv'}")


def _cmd_cool_sweep(args, cfg: ExperimentConfig, out: Path) -> None:
    res = cfg.resonator()
    if args.gains:
        gains = _parse_float_list(args.gains)
    else:
        gains = np.logspace(0, 5, 51).tolist()
    noises = (_parse_float_list(args.noise) if args.noise
              else [cfg.get("hli", "imprecision_asd")])
    external = cfg.external_force_psd()
    for asd in noises:
        rows = []
        for g in gains:
            setup = CoolingSetup(res, g, imprecision_psd=asd ** 2,
                                 external_force_psd=external)
            num = closed_loop_variance(setup).numeric
            rows.append((g, num.t_eff, num.variance, num.thermal,
                         num.feedthrough))
        path = out / f"cool_sweep_noise{asd:g}.csv"
        _write_csv(path, f"cool sweep noise={asd:g}", cfg,
                   ["g", "T_eff_K", "x2_m2", "thermal_m2", "feedthrough_m2"],
                   rows)
        print(f"wrote {path}")


def _cmd_cool_optimum(args, cfg: ExperimentConfig, out: Path) -> None:
    res = cfg.resonator()
    s_n = cfg.imprecision_psd()
    got = optimal_gain(res, s_n)
    t_n = noise_temperature(res, s_n)
    floor = effective_temperature_floor(res, t_n)
    body = [
        "cool optimum",
        f"imprecision_asd_m_rthz = {math.sqrt(s_n)!r}",
        f"g_opt_closed_form = {got.closed_form!r}",
        f"g_opt_numeric_minimizer = {got.minimized!r}",
        f"noise_temperature_K = {t_n!r}",
        f"t_eff_at_g_opt_K = {effective_temperature(res, got.closed_form, t_n)!r}",
        f"t_eff_floor_K = {floor!r}",
    ]
    _write_text(out / "cool_optimum.txt", "cool optimum", cfg, body)
    print(f"wrote {out / 'cool_optimum.txt'}")


def _cmd_cascade_run(args, cfg: ExperimentConfig, out: Path) -> None:
    from dataclasses import replace

    res = cfg.resonator()
    chain = cfg.chain()
    hli = cfg.hli()
    fpi = cfg.fpi()
    base = cfg.cascade_config()
    g0_list = _parse_float_list(args.g0) if args.g0 else [base.initial_gain]
    for g0 in g0_list:
        ccfg = replace(base, initial_gain=g0, power=None)
        schedule = plan_cascade(ccfg, chain, res, hli, fpi)
        tag = _format_gain(g0)
        stage_rows = [(s.index, s.gain, s.dac_gain, s.start, s.duration,
                       s.variance_out, s.t_eff_out)
                      for s in schedule.stages]
        _write_csv(out / f"cascade_g{tag}.csv", f"cascade run g0={g0:g}", cfg,
                   ["stage", "g", "gdac_v_per_rad", "t_start_s", "duration_s",
                    "x2_exit_m2", "teff_exit_K"], stage_rows)

        t_lo = schedule.stages[0].duration / 100.0
        times = np.logspace(math.log10(t_lo), math.log10(schedule.total_time),
                            400)
        series_rows = [(t, schedule.variance_at(t), schedule.t_eff_at(t))
                       for t in times]
        _write_csv(out / f"cascade_g{tag}_timeseries.csv",
                   f"cascade run g0={g0:g}", cfg,
                   ["t_s", "x2_m2", "teff_K"], series_rows)

        comparison = compare_single_step(
            schedule.stages[-1].gain, ccfg, chain, res, hli, fpi)
        body = [
            f"initial_gain = {g0!r}",
            f"optical_power_W = {schedule.power!r}",
            f"stages = {len(schedule.stages)}",
            f"termination = {schedule.termination}",
            f"handover_stage = {schedule.handover_stage}",
            f"total_time_s = {schedule.total_time!r}",
            f"final_gain = {schedule.stages[-1].gain!r}",
            f"final_t_eff_K = {schedule.final_t_eff!r}",
            f"single_step_power_W = {comparison.single_power!r}",
            f"single_step_time_s = {comparison.single_time!r}",
            f"single_step_exceeds_threshold = {comparison.single_exceeds_threshold}",
            f"power_ratio_cascade_over_single = {comparison.power_ratio!r}",
            f"time_ratio_cascade_over_single = {comparison.time_ratio!r}",
            f"reciprocity_product = {comparison.reciprocity!r}",
        ]
        _write_text(out / f"cascade_g{tag}.txt", f"cascade run g0={g0:g}",
                    cfg, body)
        print(f"wrote {out / f'cascade_g{tag}.csv'} (+timeseries, summary)")


def _cmd_simulate(args, cfg: ExperimentConfig, out: Path) -> None:
    res = cfg.sim_resonator()
    sim_cfg = cfg.sim_config(seed=args.seed)
    chain = cfg.chain() if sim_cfg.controller == "chain" else None
    trace = simulate(sim_cfg, res, chain=chain, hli=cfg.hli())

    columns = ["t_s", "x_m", "y_m"]
    series = [trace.t, trace.x, trace.y]
    if trace.control_voltage is not None:
        columns += ["v_volt", "p_watt"]
        series += [trace.control_voltage, trace.power]
    columns.append("f_fb_newton")
    series.append(trace.feedback_force)
    rows = zip(*[s.tolist() for s in series])
    _write_csv(out / "trace.csv", "simulate", cfg, columns, rows,
               seed=trace.seed)

    tail = trace.x[trace.x.size // 2:]
    body = [
        f"steps = {trace.x.size}",
        f"dt_s = {float(trace.t[1] - trace.t[0])!r}",
        f"steady_state_variance_m2 = {float(np.var(tail))!r}",
        f"steady_state_rms_m = {float(np.std(tail))!r}",
    ]
    _write_text(out / "simulate.txt", "simulate", cfg, body, seed=trace.seed)
    print(f"wrote {out / 'trace.csv'} and {out / 'simulate.txt'}")


def _read_trace_csv(path, column: str):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = rows[0]
    if column not in header:
        raise ConfigError(
            f"{path}: no column {column!r}; available: {header}")
    c_idx = header.index(column)
    t = np.array([float(r[0]) for r in rows[1:]])
    x = np.array([float(r[c_idx]) for r in rows[1:]])
    return t, x


def _cmd_psd(args, cfg: ExperimentConfig, out: Path) -> None:
    t, x = _read_trace_csv(args.input, args.column)
    fs = 1.0 / float(t[1] - t[0])
    rec = estimate_psd(x, fs, args.segment, overlap=args.overlap,
                       unit=f"({args.column})^2/Hz")
    path = out / f"psd_{args.column}.csv"
    write_spectrum_csv(rec, path, _header_lines(
        f"psd input={args.input} column={args.column} "
        f"segment={args.segment}", cfg))
    print(f"wrote {path} (parseval ratio "
          f"{rec.meta['parseval_ratio']:.4f}, {rec.meta['segments']} segments)")


def _cmd_ringdown_fit(args, cfg: ExperimentConfig, out: Path) -> None:
    t, x = _read_trace_csv(args.input, args.column)
    omega0 = TWO_PI * args.frequency if args.frequency else None
    fit = fit_q_from_ringdown(t, x, omega0=omega0)
    body = [
        f"input = {args.input}",
        f"q = {fit.q!r}",
        f"omega0_rad_s = {fit.omega0!r}",
        f"decay_rate_rad_s = {fit.decay_rate!r}",
        f"amplitude0 = {fit.amplitude0!r}",
        f"residual_rms = {fit.residual_rms!r}",
        f"n_points = {fit.n_points}",
    ]
    _write_text(out / "ringdown_fit.txt", "ringdown-fit", cfg, body)
    print(f"wrote {out / 'ringdown_fit.txt'} (Q = {fit.q:.6g})")


def _cmd_chain_report(args, cfg: ExperimentConfig, out: Path) -> None:
    res = cfg.resonator()
    chain = cfg.chain()
    g = chain.gain_factor(res)
    body = [
        "composed feedback chain gains",
        f"actuator_gain_N_per_W = {actuator_gain()!r}",
        f"eoam_gain_W_per_V = {chain.eoam.gain()!r}",
        f"dac_gain_V_per_rad = {chain.dac_gain!r}",
        f"phase_per_displacement_rad_per_m = {TWO_PI / chain.wavelength!r}",
        f"static_feedback_gain_N_per_m = {chain.static_gain()!r}",
        f"optical_power_W = {chain.eoam.max_power!r}",
        f"damage_threshold_W = {chain.eoam.damage_threshold!r}",
        f"gain_factor = {g!r}",
        f"power_for_unity_gain_W = {chain.required_power(res, 1.0)!r}",
    ]
    _write_text(out / "chain_report.txt", "chain report", cfg, body)
    print(f"wrote {out / 'chain_report.txt'}")


def _paper_report_rows(cfg: ExperimentConfig) -> list:
    """Computed values against the published reference numbers."""
    res = cfg.resonator()
    fpi = cfg.fpi()
    chain = cfg.chain()
    s_n = cfg.imprecision_psd()

    g_opt = optimal_gain(res, s_n).closed_form
    p_unity = chain.required_power(res, 1.0)
    p_opt = chain.required_power(res, g_opt)
    a_th = float(res.thermal_accel_asd(res.omega0))
    delta_l = fpi.dynamic_range()
    gamma_m = float(res.damping_rate(res.omega0))
    equivalent = fpi.acceleration_equivalent(res)

    rows = [
        ("g_opt", "", g_opt, 3.40e4),
        ("P0_for_g1", "W", p_unity, 1.16e-3),
        ("P0_for_g_opt", "W", p_opt, 34.43),
        ("a_th_at_resonance", "m s^-2/rtHz", a_th, 1e-11),
        ("dynamic_range", "m", delta_l, 1.8e-6),
        ("gamma_m", "rad/s", gamma_m, TWO_PI * 10e-6),
        ("equiv_accel_as_written", "g/rtHz", equivalent["as_written_g"], 8e-9),
        ("equiv_accel_dimensional", "g/rtHz", equivalent["dimensional_g"], 8e-9),
    ]
    out = []
    for name, unit, computed, reference in rows:
        ratio = computed / reference
        flag = "MATCH" if abs(ratio - 1.0) <= MATCH_TOLERANCE else "DEVIATION"
        out.append((name, unit, computed, reference, ratio, flag))
    return out


def _cmd_paper_report(args, cfg: ExperimentConfig, out: Path) -> None:
    body = ["quantity | unit | computed | reference | ratio | flag"]
    for name, unit, computed, reference, ratio, flag in _paper_report_rows(cfg):
        body.append(f"{name} | {unit} | {computed!r} | {reference!r} | "
                    f"{ratio!r} | {flag}")
    _write_text(out / "paper_report.txt", "paper-report", cfg, body)
    print(f"wrote {out / 'paper_report.txt'}")
    for line in body:
        print(line)


# -- dispatch ------------------------------------------------------------


def _parse_float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optocool",
        description="Feedback-cooling toolkit for a low-frequency "
                    "optomechanical inertial sensor")
    parser.add_argument("--config", default=None,
                        help="config file (defaults to built-in parameters)")
    parser.add_argument("--out", default=None,
                        help=f"output directory (default ${OUT_DIR_ENV} "
                             "or ./optocool_out)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured simulation seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("susceptibility",
                       help="closed-loop susceptibility curves")
    p.add_argument("--gains", default="0,2500,5000,10000",
                   help="comma list of gain factors")
    p.set_defaults(func=_cmd_susceptibility)

    p = sub.add_parser("noise-budget",
                       help="frequency-readout noise decomposition")
    p.set_defaults(func=_cmd_noise_budget)

    p = sub.add_parser("cool", help="cooling analysis")
    csub = p.add_subparsers(dest="subcommand", required=True)
    ps = csub.add_parser("sweep", help="effective temperature vs gain")
    ps.add_argument("--gains", default=None, help="comma list of gains")
    ps.add_argument("--noise", default=None,
                    help="comma list of imprecision ASDs, m/rtHz")
    ps.set_defaults(func=_cmd_cool_sweep)
    po = csub.add_parser("optimum", help="optimal gain summary")
    po.set_defaults(func=_cmd_cool_optimum)

    p = sub.add_parser("cascade", help="cascaded cooling")
    csub = p.add_subparsers(dest="subcommand", required=True)
    pr = csub.add_parser("run", help="plan a cascade schedule")
    pr.add_argument("--g0", default=None,
                    help="comma list of initial gain factors")
    pr.set_defaults(func=_cmd_cascade_run)

    p = sub.add_parser("simulate", help="time-domain loop simulation")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("psd", help="Welch PSD of a trace column")
    p.add_argument("--input", required=True, help="trace CSV path")
    p.add_argument("--column", default="x_m")
    p.add_argument("--segment", type=int, default=4096)
    p.add_argument("--overlap", type=float, default=0.5)
    p.set_defaults(func=_cmd_psd)

    p = sub.add_parser("ringdown-fit", help="fit Q from a decay record")
    p.add_argument("--input", required=True, help="CSV with t_s,value rows")
    p.add_argument("--column", default="value")
    p.add_argument("--frequency", type=float, default=None,
                   help="resonance frequency hint, Hz")
    p.set_defaults(func=_cmd_ringdown_fit)

    p = sub.add_parser("chain", help="feedback chain")
    csub = p.add_subparsers(dest="subcommand", required=True)
    pc = csub.add_parser("report", help="composed gains with units")
    pc.set_defaults(func=_cmd_chain_report)

    p = sub.add_parser("paper-report",
                       help="computed values against published references")
    p.set_defaults(func=_cmd_paper_report)
    return parser


def run_command(argv) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config)
    out = Path(args.out or os.environ.get(OUT_DIR_ENV) or "optocool_out")
    out.mkdir(parents=True, exist_ok=True)
    args.func(args, cfg, out)
    return 0


def main(argv=None) -> int:
    try:
        return run_command(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # single-line machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
