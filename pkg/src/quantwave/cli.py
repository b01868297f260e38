"""Command-line entry point: ``quantwave <command> [options]``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .config import (
    RunConfig,
    read_cdf,
    read_csv,
    stream,
    write_cdf,
    write_csv,
    write_json,
    write_positions,
)
from .frame import FrameSpec, apply_operator_mc, fixed_point, verify_fixed_point
from .grid import EmpiricalCDF, GridCDF
from .kernels import ConfigError, wave_speed
from .meanfield import conservation_residual, evolve, l1_distance_to_wave, pad
from .particles import empirical_sup_distance, recenter_median, simulate
from .wave import solve_wave, tail_moment_estimate, wave_residual


class CommandError(RuntimeError):
    pass


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _count(text: str) -> int:
    # accepts 1e7 style counts
    value = float(text)
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer count, got {text!r}")
    return int(value)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.default()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    for key in ("h", "dt", "tol"):
        value = getattr(args, key, None)
        if value is not None:
            cfg.numerics[key] = value
    return cfg


def _set_threads(n):
    if n is None:
        return
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


# ------------------------------------------------------------------ commands


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    T = args.horizon
    times = [T * (k + 1) / args.snapshots for k in range(args.snapshots)] if args.snapshots else []
    log, state = simulate(cfg.model, args.n, T, stream(cfg.seed, "simulate"), snapshot_times=times)
    summary = log.summary()
    summary["speed"] = wave_speed(cfg.model)
    for k, snap in enumerate(log.snapshots):
        write_positions(out / f"snapshot_{k:03d}.csv", snap.positions)
    if args.reference:
        phi = read_cdf(args.reference)
        summary["reference_sup_distance"] = [
            empirical_sup_distance(recenter_median(s), phi) for s in log.snapshots
        ]
    write_json(out / "summary.json", summary)
    print(json.dumps({"mean_speed": log.mean_speed, "se": log.mean_speed_se, "events": log.events}))
    return 0


def cmd_evolve(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    params = cfg.model
    f0 = read_cdf(args.initial)
    if args.h is not None and abs(f0.h - args.h) > 1e-9 * args.h:
        f0 = GridCDF.from_function(f0, f0.left, f0.right, args.h)
    T = args.T
    f0 = pad(f0, args.pad_left, args.pad_right + 2 * wave_speed(params) * T)
    every = args.every
    times = np.arange(every, T + 0.5 * every, every) if every > 0 else [T]
    state = evolve(f0, T, params, cfg.numerics["dt"], snapshot_times=times, tail_tol=cfg.numerics["tail_tol"])
    phi = read_cdf(args.reference) if args.reference else None
    diag = {"t": [], "conservation_residual": [], "empirical_c": state.max_rate}
    if phi is not None:
        diag["l1_to_wave"] = []
    for s in state.snapshots:
        write_cdf(out / f"snapshot_t{s.t:.6g}.csv", s.f)
        diag["t"].append(s.t)
        diag["conservation_residual"].append(conservation_residual(f0, s.f, s.t, params))
        if phi is not None:
            diag["l1_to_wave"].append(l1_distance_to_wave(s, phi))
    write_json(out / "diagnostics.json", diag)
    print(json.dumps({"snapshots": len(state.snapshots), "max_conservation_residual": max(diag["conservation_residual"])}))
    return 0


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def cmd_frame_solve(args, cfg: RunConfig) -> int:
    spec = FrameSpec(args.w, args.BL, args.BR, cfg.numerics["h"])
    sol = fixed_point(spec, cfg.model, fp_tol=cfg.numerics["fp_tol"])
    out = Path(args.out or cfg.out)
    if out.suffix != ".csv":
        out = out / "gamma.csv"
    write_cdf(out, sol.gamma, "gamma")
    report = verify_fixed_point(sol.gamma, spec, cfg.model)
    meta = {
        "w": spec.w,
        "B_L": spec.B_L,
        "B_R": spec.B_R,
        "h": spec.h,
        "atom": sol.p,
        "gamma_right_raw": sol.gamma_right_raw,
        "bisection_marches": sol.iterations,
        "checks": report.checks,
        "residuals": vars(report),
        "model": cfg.model.to_dict(),
    }
    write_json(_sidecar(out), meta)
    print(json.dumps({"atom": sol.p, "ok": report.ok}))
    return 0 if report.ok else 1


def cmd_frame_mc(args, cfg: RunConfig) -> int:
    gpath = Path(args.gamma)
    gamma = read_cdf(gpath)
    w = args.w
    side = _sidecar(gpath)
    if w is None and side.exists():
        w = json.loads(side.read_text())["w"]
    if w is None:
        raise CommandError(f"--w not given and no {side.name} next to {gpath}")
    spec = FrameSpec(w, -gamma.left, gamma.right, gamma.h)
    mc = apply_operator_mc(gamma, spec, cfg.model, args.events, stream(cfg.seed, "frame-mc"))
    out = Path(args.out or cfg.out)
    if out.suffix != ".csv":
        out = out / "gamma_mc.csv"
    write_cdf(out, mc, "gamma")
    dist = gamma.sup_distance(mc)
    write_json(_sidecar(out), {"w": w, "events": args.events, "seed": cfg.seed, "sup_distance_to_input": dist})
    print(json.dumps({"sup_distance_to_input": dist}))
    return 0


def cmd_wave_solve(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    report = solve_wave(
        args.frames,
        cfg.model,
        tol=cfg.numerics["tol"],
        h=args.h,
        median_tol=cfg.numerics["median_tol"],
        tail_tol=cfg.numerics["tail_tol"],
    )
    write_cdf(out / "phi.csv", report.phi, "phi")
    body = report.to_dict()
    body["residual"] = wave_residual(report.phi, cfg.model)
    body["model"] = cfg.model.to_dict()
    write_json(out / "report.json", body)
    print(json.dumps({"converged": report.converged, "w_final": report.w_final, "residual": body["residual"]}))
    return 0


def cmd_wave_check(args, cfg: RunConfig) -> int:
    phi = read_cdf(args.phi)
    moments = tail_moment_estimate(phi, 1)
    body = {
        "residual": wave_residual(phi, cfg.model),
        "speed": wave_speed(cfg.model),
        "lipschitz_excess": phi.lipschitz_excess(1.0 / wave_speed(cfg.model)),
        "first_moment_windows": list(moments.windows),
        "first_moment_series": list(moments.moments),
        "first_moment_stable": moments.stable,
    }
    if args.out:
        write_json(Path(args.out) if args.out.endswith(".json") else Path(args.out) / "residual.json", body)
    print(json.dumps(body, indent=2))
    return 0


def cmd_verify(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    suite = acceptance.Suite(cfg)
    results = suite.run(only=args.only, skip=args.skip or (), echo=print)
    status = acceptance.exit_status(results)
    write_json(out / "verify.json", {"exit_status": status, "config": cfg.to_dict(), "results": [r.to_dict() for r in results]})
    lines = [r.line() for r in results]
    lines.append(f"exit status {status}")
    (out / "verify.txt").write_text("\n".join(lines) + "\n")
    return status


_SNAP_TIME = re.compile(r"_t([-+0-9.eE]+)\.csv$")


def _load_curve(path: Path, recenter: bool):
    header, data = read_csv(path)
    if header and header[0] == "position":
        cdf = EmpiricalCDF(data[:, 0])
        return recenter_median(cdf) if recenter else cdf
    return read_cdf(path)


def _window(obj):
    if isinstance(obj, GridCDF):
        return obj.left, obj.right
    return float(obj.positions[0]), float(obj.positions[-1])


def cmd_plotdata(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    inputs = [Path(p) for p in args.inputs]
    if not inputs:
        raise CommandError("plotdata needs at least one input CSV")
    curves = [_load_curve(p, args.recenter) for p in inputs]
    windows = [_window(c) for c in curves]
    if args.series:
        rows_t, rows_x, rows_f = [], [], []
        for p, c in zip(inputs, curves):
            m = _SNAP_TIME.search(p.name)
            if m is None:
                raise CommandError(f"{p.name}: series inputs must be named like snapshot_t<time>.csv")
            x = c.x if isinstance(c, GridCDF) else c.positions
            rows_t.append(np.full(len(x), float(m.group(1))))
            rows_x.append(x)
            rows_f.append(c(x))
        csv = write_csv(out / "series.csv", ["t", "x", "F"], [np.concatenate(rows_t), np.concatenate(rows_x), np.concatenate(rows_f)])
        script = f"set datafile separator ','\nplot '{csv.name}' using 2:3:1 with lines palette title 'F(x,t)'\n"
    else:
        lo = max(w[0] for w in windows)
        hi = min(w[1] for w in windows)
        if not hi > lo:
            listing = "; ".join(f"{p.name} [{a:.6g}, {b:.6g}]" for p, (a, b) in zip(inputs, windows))
            raise CommandError(f"inputs do not overlap: {listing}")
        steps = [c.h for c in curves if isinstance(c, GridCDF)]
        h = min(steps) if steps else cfg.numerics["h"]
        n = max(1, int(np.ceil((hi - lo) / h)))
        x = lo + (hi - lo) * np.arange(n + 1) / n
        names = [p.stem for p in inputs]
        csv = write_csv(out / "overlay.csv", ["x"] + names, [x] + [c(x) for c in curves])
        plots = ", ".join(f"'{csv.name}' using 1:{k + 2} with lines title '{name}'" for k, name in enumerate(names))
        script = f"set datafile separator ','\nset key autotitle columnhead\nplot {plots}\n"
    (out / "plot.gp").write_text(script)
    print(json.dumps({"csv": str(csv), "script": str(out / "plot.gp")}))
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory or file")
    common.add_argument("--threads", type=int, help="worker threads for jitted code")

    # global flags go after the command name so subcommand defaults cannot shadow them
    parser = argparse.ArgumentParser(prog="quantwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the n-particle system")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--snapshots", type=int, default=0)
    p.add_argument("--reference", help="phi CSV to compare recentered snapshots with")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evolve", parents=[common], help="integrate the mean-field CDF")
    p.add_argument("--initial", required=True, help="initial CDF CSV (x, F)")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--h", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--every", type=float, default=1.0, help="snapshot spacing (0: final only)")
    p.add_argument("--pad-left", type=float, default=10.0)
    p.add_argument("--pad-right", type=float, default=20.0)
    p.add_argument("--reference", help="phi CSV for the L1 series")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("frame-solve", parents=[common], help="finite-frame fixed point")
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--BL", type=float, required=True)
    p.add_argument("--BR", type=float, required=True)
    p.add_argument("--h", type=float)
    p.set_defaults(func=cmd_frame_solve)

    p = sub.add_parser("frame-mc", parents=[common], help="Monte Carlo frame operator")
    p.add_argument("--gamma", required=True, help="environment CSV (x, gamma)")
    p.add_argument("--events", type=_count, default=10**7)
    p.add_argument("--w", type=float, help="speed (default: from the gamma sidecar JSON)")
    p.set_defaults(func=cmd_frame_mc)

    p = sub.add_parser("wave-solve", parents=[common], help="wave shape from growing frames")
    p.add_argument("--frames", type=_float_list, default=[5.0, 10.0, 20.0, 40.0])
    p.add_argument("--tol", type=float)
    p.add_argument("--h", type=float, help="grid step (default min(1e-2, B/1000) per frame)")
    p.set_defaults(func=cmd_wave_solve)

    p = sub.add_parser("wave-check", parents=[common], help="wave-equation residual of a shape")
    p.add_argument("--phi", required=True)
    p.set_defaults(func=cmd_wave_check)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", type=_int_list, help="comma-separated criterion numbers")
    p.add_argument("--skip", type=_int_list, help="comma-separated criterion numbers")
    p.add_argument("--dt", type=float)
    p.add_argument("--h", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plotdata", parents=[common], help="aligned tables and a gnuplot script")
    p.add_argument("inputs", nargs="*", help="CSV files: (x, F) grids or position samples")
    p.add_argument("--series", action="store_true", help="long format (t, x, F) from snapshot_t<t>.csv files")
    p.add_argument("--recenter", action="store_true", help="recenter position samples at their median")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        _set_threads(args.threads)
        target = Path(cfg.out)
        (target.parent if target.suffix else target).mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg)
    except (ConfigError, CommandError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
