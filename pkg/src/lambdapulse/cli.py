"""Command-line entry point: ``lambdapulse <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as lpio
from .analytic import analytic_velocity, velocity_table
from .core import ColdLinear, ConfigError, DEFAULT_PARAMS, SimulationConfig, default_z_max
from .dispersion import scan_dispersion
from .hierarchy import (
    IntegrationDiverged,
    classify_behavior,
    converge_in_order,
    simulate,
)

log = logging.getLogger("lambdapulse")


def _load(path: str) -> lpio.Settings:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return lpio.parse_settings(text)


def _out_dir(args, settings: Optional[lpio.Settings]) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(settings.output_dir if settings else "out")


def cmd_simulate(args) -> int:
    settings = _load(args.config)
    cfg = settings.config
    traj = simulate(cfg, keep_final=False)
    cls = classify_behavior(traj)
    with lpio.staged_output(_out_dir(args, settings)) as tmp:
        lpio.write_trajectory_files(traj, tmp)
        (tmp / "config.txt").write_text(lpio.render_config(cfg))
        lpio.write_csv(tmp / "summary.csv", ("behavior", "separation", "onset_time", "I_final"),
                       [(cls.variant.value, cls.evidence,
                         math.nan if cls.onset_time is None else cls.onset_time,
                         traj.strength_series[-1])])
        if not args.no_figures:
            from . import plotting
            plotting.intensity_map(traj, tmp / "intensity.png",
                                   title=f"L0={cfg.L0:g}, ell={cfg.ell}")
            plotting.strength_curves({"I": (traj.times, traj.strength_series)}, tmp / "strength.png")
    print(f"behavior,{cls.variant.value}")
    print(f"I_final,{lpio.fmt(traj.strength_series[-1])}")
    return 0


def cmd_vgroup(args) -> int:
    settings = _load(args.config)
    base = settings.config
    schedule = range(args.ell_min, args.ell_max + 1)
    result = converge_in_order(base, schedule, tol=args.tol, window=args.window,
                               workers=args.workers,
                               progress=lambda ell, est: log.info("ell %d done", ell))
    header = ("ell", "v_g", "stderr", "c0_exact", "c0_slowlight")
    rows = []
    for ell, est in result.points:
        a = analytic_velocity(ell, base.params)
        v, e = (math.nan, math.nan) if est is None else (est.value, est.stderr)
        rows.append((ell, v, e, a.c0_exact_slow, a.c0_slowlight_slow))
    with lpio.staged_output(_out_dir(args, settings)) as tmp:
        lpio.write_csv(tmp / "vgroup.csv", header, rows)
        lpio.write_csv(tmp / "vgroup_summary.csv", ("plateau", "converged", "tol", "window"),
                       [(math.nan if result.plateau is None else result.plateau,
                         int(result.converged), result.tol, result.window)])
        if not args.no_figures:
            from . import plotting
            plotting.group_velocity([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                                    [r[3] for r in rows], tmp / "vgroup.png", result.plateau)
    sys.stdout.write(lpio.csv_text(header, rows))
    print(f"plateau,{lpio.fmt(math.nan if result.plateau is None else result.plateau)}")
    if not result.converged:
        print("no plateau within tolerance", file=sys.stderr)
    return 0


def cmd_dispersion(args) -> int:
    settings = _load(args.config)
    cfg = settings.config
    if args.points < 2 or not args.omega_max > args.omega_min:
        raise ConfigError("need --points >= 2 and --omega-max > --omega-min")
    omegas = np.linspace(args.omega_min, args.omega_max, args.points)
    pts = scan_dispersion(omegas, cfg.params, cfg.decay, ell=args.depth, closure=cfg.closure)
    header = ("omega", "re_k_plus", "im_k_plus", "re_k_minus", "im_k_minus")
    rows = [(p.omega, p.k_plus.real, p.k_plus.imag, p.k_minus.real, p.k_minus.imag) for p in pts]
    with lpio.staged_output(_out_dir(args, settings)) as tmp:
        lpio.write_csv(tmp / "dispersion.csv", header, rows)
        if not args.no_figures:
            from . import plotting
            plotting.dispersion_curves(omegas, np.array([p.k_plus for p in pts]),
                                       tmp / "dispersion.png")
    sys.stdout.write(lpio.csv_text(header, rows))
    return 0


def _parse_vary(text: str):
    key, sep, values = text.partition("=")
    key = key.strip().lower()
    if not sep or key not in ("a", "l0"):
        raise ConfigError(f"--vary expects a=v1,v2,... or l0=v1,v2,..., got {text!r}")
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--vary values must be numbers: {values!r}") from exc
    if not vals:
        raise ConfigError("--vary needs at least one value")
    return key, vals


def sweep_configs(base: SimulationConfig, key: str, values: Sequence[float]) -> list:
    """One config per sweep value; the domain grows when a wider packet needs it."""
    out = []
    for v in values:
        if key == "a":
            cfg = dataclasses.replace(base, decay=ColdLinear(v))
        else:
            grid = base.grid
            z_max = max(grid.z_max, default_z_max(v, base.ell, base.total_time, base.params))
            if z_max > grid.z_max:
                z_max = math.ceil(z_max / grid.dz) * grid.dz
                grid = type(grid).from_spacing(z_max, grid.dz, grid.dt, grid.snapshot_stride)
            cfg = dataclasses.replace(base, L0=v, grid=grid)
        out.append(cfg)
    return out


def _sweep_point(cfg: SimulationConfig):
    traj = simulate(cfg, keep_final=False)
    return traj, classify_behavior(traj)


def cmd_sweep(args) -> int:
    settings = _load(args.config)
    key, values = _parse_vary(args.vary)
    configs = sweep_configs(settings.config, key, values)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_point, configs))
    else:
        results = [_sweep_point(cfg) for cfg in configs]

    header = ("param", "value", "behavior", "separation", "onset_time", "I_final")
    rows = []
    long_rows = []
    for v, (traj, cls) in zip(values, results):
        rows.append((key, v, cls.variant.value, cls.evidence,
                     math.nan if cls.onset_time is None else cls.onset_time,
                     traj.strength_series[-1]))
        long_rows += [(v, t, s) for t, s in zip(traj.times, traj.strength_series)]
    with lpio.staged_output(_out_dir(args, settings)) as tmp:
        lpio.write_csv(tmp / "sweep.csv", header, rows)
        lpio.write_csv(tmp / "sweep_strength.csv", (key, "t", "I"), long_rows)
        if not args.no_figures:
            from . import plotting
            plotting.strength_curves({f"{key}={v:g}": (tr.times, tr.strength_series)
                                      for v, (tr, _) in zip(values, results)},
                                     tmp / "sweep_strength.png")
            for v, (tr, _) in zip(values, results):
                plotting.intensity_map(tr, tmp / f"intensity_{key}_{v:g}.png", title=f"{key}={v:g}")
    sys.stdout.write(lpio.csv_text(header, rows))
    return 0


def cmd_analytic(args) -> int:
    params = _load(args.config).config.params if args.config else DEFAULT_PARAMS
    header = ("ell", "c0_exact", "c0_slowlight")
    rows = [(a.ell, a.c0_exact_slow, a.c0_slowlight_slow) for a in velocity_table(args.ell_max, params)]
    if args.out is not None:
        with lpio.staged_output(args.out) as tmp:
            lpio.write_csv(tmp / "analytic.csv", header, rows)
    sys.stdout.write(lpio.csv_text(header, rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lambdapulse",
                                     description="Light-pulse retrieval in a standing-wave EIT medium.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="key = value config file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("simulate", help="one run; CSV tables, heatmaps and figures")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("vgroup", help="group velocity against truncation order")
    common(p)
    p.add_argument("--ell-max", type=int, required=True)
    p.add_argument("--ell-min", type=int, default=1)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_vgroup)

    p = sub.add_parser("dispersion", help="complex k(omega) of both branches")
    common(p)
    p.add_argument("--omega-min", type=float, required=True)
    p.add_argument("--omega-max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--depth", type=int, default=1000, help="continued-fraction depth in ell")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("sweep", help="behaviour class and I(t) over decay rate or packet width")
    common(p)
    p.add_argument("--vary", required=True, help="a=v1,v2,... or l0=v1,v2,...")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analytic", help="adiabatic splitting velocity table")
    p.add_argument("--ell-max", type=int, required=True)
    p.add_argument("--config", help="take physical parameters from this file")
    p.add_argument("--out", help="also write analytic.csv here")
    p.set_defaults(func=cmd_analytic)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, IntegrationDiverged, OSError) as exc:
        print(f"lambdapulse {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
