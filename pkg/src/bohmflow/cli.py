"""Command-line interface and persistent CSV artifacts.

Every output file starts with the full serialized run configuration as
``# key = value`` comment lines (plus ``##`` free-form metadata), so any
artifact can be fed back through :func:`read_provenance` to reproduce the
run bit-identically.
"""

import argparse
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .analysis import detect_events, detect_vortices, distance_channels, lcn_series
from .config import (RunConfig, apply_overrides, parse_config,
                     serialize_config)
from .critical import find_x_points, nodal_points, y_points
from .ensemble import colorplot as make_colorplot
from .ensemble import entanglement_sweep, frobenius_distance, run_ensemble
from .errors import BohmflowError, ParseError, ValidationError
from .integrate import IntegrationControls, integrate, integrate_with_deviation
from .models import OscillatorFrequencies, TwoQubitModel, velocity

FMT = ".17g"


def fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return format(float(v), FMT)


def provenance_lines(cfg, command):
    lines = [f"## bohmflow {__version__} :: {command}"]
    lines += [f"# {line}" for line in serialize_config(cfg).splitlines()]
    return lines


def read_provenance(path):
    """Recover the RunConfig embedded in an artifact's header."""
    keys = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("##"):
                continue
            if line.startswith("#"):
                keys.append(line[1:].strip())
            else:
                break
    return parse_config("\n".join(keys))


def _write(path, cfg, command, header, rows):
    with open(path, "w") as fh:
        for line in provenance_lines(cfg, command):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v
                             for v in row) + "\n")
    return path


def _traj_rows(rec, controls):
    every = controls.renorm_every
    acum = np.cumsum(rec.stretching) if rec.stretching is not None else None
    for i, t in enumerate(rec.times):
        a = acm = chi = math.nan
        if acum is not None and i > 0 and i % every == 0:
            s = i // every - 1
            if s < len(acum):
                a = rec.stretching[s]
                acm = acum[s]
                chi = acm / t
        yield (t, rec.positions[i, 0], rec.positions[i, 1], a, acm, chi,
               int(rec.flags[i]))


def cmd_simulate(cfg, outdir):
    model = cfg.build_model()
    rec = integrate_with_deviation(model, cfg.simulate.x0, cfg.simulate.y0,
                                   cfg.integration)
    path = _write(os.path.join(outdir, "trajectory.csv"), cfg, "simulate",
                  ["t", "x", "y", "a", "a_cum", "chi", "flag"],
                  _traj_rows(rec, cfg.integration))
    print(f"wrote {path} ({len(rec.times)} samples, status {rec.status})")
    return 0 if rec.status == "completed" else 2


def cmd_critical_points(cfg, outdir):
    model = cfg.build_model()
    t = cfg.critical.t
    rows = []
    nodes = nodal_points(model, t, cfg.critical.k_window)
    for n in nodes:
        rows.append(("N", n.k, t, n.position[0], n.position[1],
                     math.nan, math.nan, math.nan, math.nan, math.nan,
                     math.nan, 1))
    for yp in y_points(model, t, cfg.critical.k_window):
        rows.append(("Y", yp.k_prime, t, yp.position[0], yp.position[1],
                     math.nan, math.nan, math.nan, math.nan, math.nan,
                     math.nan, 1))
    for n in nodes:
        found = find_x_points(model, t, n)
        for xp in found:
            ev = np.asarray(xp.eigenvalues, dtype=complex)
            rows.append(("X", n.k, t, xp.position_inertial[0],
                         xp.position_inertial[1], xp.offset[0], xp.offset[1],
                         ev[0].real, ev[0].imag, ev[1].real, ev[1].imag, 1))
        for side in ("left", "right"):
            if not any(xp.side == side for xp in found):
                rows.append(("X", n.k, t, math.nan, math.nan, math.nan,
                             math.nan, math.nan, math.nan, math.nan,
                             math.nan, 0))
    path = _write(os.path.join(outdir, "critical_points.csv"), cfg,
                  "critical-points",
                  ["kind", "k", "t", "x", "y", "u", "v", "eig_re1", "eig_im1",
                   "eig_re2", "eig_im2", "converged"], rows)
    print(f"wrote {path} ({len(rows)} points)")
    return 0


def cmd_events(cfg, outdir):
    model = cfg.build_model()
    rec = integrate_with_deviation(model, cfg.simulate.x0, cfg.simulate.y0,
                                   cfg.integration)
    ch = distance_channels(rec, model, k_window=cfg.analysis.k_window)
    log = detect_events(ch, threshold_d=cfg.analysis.threshold_d,
                        min_gap=cfg.analysis.min_gap)
    log.vortices = detect_vortices(rec, ch, model,
                                   threshold_d=cfg.analysis.threshold_d)
    path = _write(os.path.join(outdir, "events.csv"), cfg, "events",
                  ["t_start", "t_end", "k_sequence", "min_d_n", "min_d_x",
                   "min_d_y", "a_cum_delta"],
                  [(e.t_start, e.t_end, ";".join(str(k) for k in e.involved_k),
                    e.min_d_n, e.min_d_x, e.min_d_y, e.a_cum_delta)
                   for e in log.events])
    path2 = _write(os.path.join(outdir, "vortices.csv"), cfg, "events",
                   ["t_start", "t_end", "node_k", "winding"],
                   [(v.t_start, v.t_end, v.node_k, v.winding)
                    for v in log.vortices])
    print(f"wrote {path} ({len(log.events)} events) and {path2} "
          f"({len(log.vortices)} vortices)")
    return 0 if rec.status == "completed" else 2


def cmd_lcn(cfg, outdir):
    model = cfg.build_model()
    rec = integrate_with_deviation(model, cfg.simulate.x0, cfg.simulate.y0,
                                   cfg.integration)
    lcn = lcn_series(rec.stretching, cfg.integration.renorm_dt)
    path = _write(os.path.join(outdir, "lcn.csv"), cfg, "lcn",
                  ["t", "a", "a_cum", "chi"],
                  zip(lcn.times, rec.stretching, lcn.a_cum, lcn.chi))
    print(f"wrote {path} ({len(lcn.times)} rows, final chi {fmt(lcn.final_chi)})")
    return 0 if rec.status == "completed" else 2


def _ensemble_exit(table):
    bad = sum(r.status != "completed" for r in table.rows)
    return 2 if bad > 0.1 * len(table.rows) else 0


def cmd_ensemble(cfg, outdir):
    model = cfg.build_model()
    table = run_ensemble(model, cfg.build_grid(), cfg.integration,
                         cfg.ensemble.checkpoints,
                         class_window=cfg.analysis.class_window or None,
                         class_floor=cfg.analysis.class_floor)
    header = ["index", "x0", "y0", "status", "classification"]
    header += [f"chi_{fmt(c)}" for c in table.checkpoints] + ["final_chi"]
    rows = [(r.index, r.x0, r.y0, r.status, r.classification,
             *r.chi_checkpoints, r.final_chi) for r in table.rows]
    path = _write(os.path.join(outdir, "ensemble.csv"), cfg, "ensemble",
                  header, rows)
    n_ch = sum(r.classification == "chaotic" for r in table.rows)
    print(f"wrote {path} ({len(rows)} rows, {n_ch} chaotic)")
    return _ensemble_exit(table)


def cmd_sweep(cfg, outdir):
    freq = OscillatorFrequencies(cfg.model.omega_x, cfg.model.omega_y)
    rows = entanglement_sweep(cfg.ensemble.c2_values, cfg.build_grid(),
                              cfg.integration, cfg.ensemble.checkpoints,
                              a0=cfg.model.a0, frequencies=freq,
                              class_floor=cfg.analysis.class_floor)
    header = ["c2", "n_rows", "n_chaotic", "fraction_chaotic", "mean_chi",
              "std_chi", "delta_chi"]
    header += [f"mean_chi_{fmt(c)}" for c in cfg.ensemble.checkpoints]
    path = _write(os.path.join(outdir, "sweep.csv"), cfg, "sweep",
                  [(h) for h in header],
                  [(r.c2, r.n_rows, r.n_chaotic, r.fraction_chaotic,
                    r.mean_chi, r.std_chi, r.delta_chi,
                    *r.mean_chi_checkpoints) for r in rows])
    print(f"wrote {path} ({len(rows)} c2 values)")
    return 0


def cmd_colorplot(cfg, outdir):
    model = cfg.build_model()
    cp_cfg = cfg.colorplot
    controls = IntegrationControls(
        t_final=cfg.integration.t_final, atol=cfg.integration.atol,
        rtol=cfg.integration.rtol, h_min=cfg.integration.h_min,
        dt_sample=cp_cfg.sample_dt, renorm_dt=cp_cfg.sample_dt)
    rec = integrate(model, cfg.simulate.x0, cfg.simulate.y0, controls)
    grid = make_colorplot(rec, region=(cp_cfg.lo, cp_cfg.hi),
                          bin_size=cp_cfg.bin_size, sample_dt=cp_cfg.sample_dt)
    path = os.path.join(outdir, "colorplot.csv")
    with open(path, "w") as fh:
        for line in provenance_lines(cfg, "colorplot"):
            fh.write(line + "\n")
        fh.write(f"region,{fmt(grid.region[0])},{fmt(grid.region[1])}\n")
        fh.write(f"bin_size,{fmt(grid.bin_size)}\n")
        fh.write(f"total_samples,{grid.total_samples},{grid.overflow}\n")
        for row in grid.counts:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    print(f"wrote {path} ({grid.counts.shape[0]}x{grid.counts.shape[1]} bins, "
          f"{grid.total_samples} samples, {grid.overflow} outside)")
    return 0 if rec.status == "completed" else 2


def read_colorplot(path):
    """Load a colorplot artifact: (region, bin_size, counts, overflow, total)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    region = tuple(float(x) for x in lines[0].split(",")[1:3])
    bin_size = float(lines[1].split(",")[1])
    total, overflow = (int(x) for x in lines[2].split(",")[1:3])
    counts = np.array([[int(v) for v in ln.split(",")] for ln in lines[3:]])
    return region, bin_size, counts, overflow, total


def _rational_reduction(wx, wy, max_den=64):
    frac = Fraction(wx / wy).limit_denominator(max_den)
    s1, s2 = frac.numerator, frac.denominator
    if s1 == 0:
        return None
    omega = wx / s1
    if abs(wy - s2 * omega) > 1e-9 * max(1.0, wy):
        return None
    return s1, s2, omega


def cmd_periodicity_check(cfg, outdir):
    red = _rational_reduction(cfg.model.omega_x, cfg.model.omega_y)
    if red is None:
        print("error: omega_x/omega_y is not a small rational ratio; "
              "periodicity-check requires commensurable frequencies",
              file=sys.stderr)
        return 1
    s1, s2, omega = red
    freq = OscillatorFrequencies.from_ratio(s1, s2, omega)
    model = cfg.build_model()
    if isinstance(model, TwoQubitModel):
        model = TwoQubitModel(model.c1, model.c2, model.a0, freq)
    period = freq.period
    # velocity must vanish identically at T/2
    rng = np.random.default_rng(0)
    vmax = 0.0
    for _ in range(16):
        x, y = rng.uniform(-3, 3, 2)
        v = velocity(model, x, y, period / 2.0)
        vmax = max(vmax, math.hypot(v.vx, v.vy))
    n_samp = 628
    dt = period / n_samp
    n_periods = max(2, int(cfg.integration.t_final / period))
    controls = IntegrationControls(
        t_final=n_periods * period, atol=cfg.integration.atol,
        rtol=cfg.integration.rtol, h_min=cfg.integration.h_min,
        dt_sample=dt, renorm_dt=dt)
    rec = integrate_with_deviation(model, cfg.simulate.x0, cfg.simulate.y0,
                                   controls)
    half = n_samp // 2
    retrace = max(float(np.max(np.abs(rec.positions[half + j] -
                                      rec.positions[half - j])))
                  for j in range(1, half))
    acum = np.cumsum(rec.stretching)
    a_T = float(acum[n_samp - 1])
    chi_nT = [abs(acum[n * n_samp - 1]) / (n * period)
              for n in range(1, n_periods + 1)]
    rows = [("velocity_max_at_half_period", vmax),
            ("retrace_error", retrace),
            ("a_cum_period", a_T),
            ("max_abs_chi_at_periods", max(chi_nT)),
            ("n_periods", n_periods),
            ("period", period)]
    path = _write(os.path.join(outdir, "periodicity.csv"), cfg,
                  "periodicity-check", ["quantity", "value"], rows)
    ok = vmax < 1e-10 and retrace < 1e-6 and abs(a_T) < 1e-6
    print(f"wrote {path}; velocity@T/2 {fmt(vmax)}, retrace {fmt(retrace)}, "
          f"a_cum(T) {fmt(a_T)} -> {'ok' if ok else 'FAILED'}")
    return 0 if ok else 2


COMMANDS = {
    "simulate": cmd_simulate,
    "critical-points": cmd_critical_points,
    "events": cmd_events,
    "lcn": cmd_lcn,
    "ensemble": cmd_ensemble,
    "sweep": cmd_sweep,
    "colorplot": cmd_colorplot,
    "periodicity-check": cmd_periodicity_check,
}


def build_parser():
    ap = argparse.ArgumentParser(
        prog="bohmflow",
        description="Bohmian trajectories, critical points and chaos "
                    "diagnostics for 2-D oscillator wavefunctions")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="run-configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a single config key (repeatable)")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--seed", type=int, help="override ensemble.seed")
    ap.add_argument("--workers", type=int,
                    help=f"worker threads (default: ${{{'BOHMFLOW_WORKERS'}}} "
                         f"or hardware threads)")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = RunConfig()
        if args.config:
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"ensemble.seed = {args.seed}")
        if args.out:
            overrides.append(f"output.directory = {args.out}")
        if overrides:
            cfg = apply_overrides(cfg, overrides)
        if args.workers is not None:
            os.environ["BOHMFLOW_WORKERS"] = str(args.workers)
        outdir = cfg.output.directory
        os.makedirs(outdir, exist_ok=True)
        return COMMANDS[args.command](cfg, outdir)
    except (ParseError, ValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BohmflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
