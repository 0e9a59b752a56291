"""``sharpflow`` command line: run presets, inspect trajectories, run all checks."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from scipy import fft

from .analysis_harness import norm_L1_Hm2, norm_L3_spacetime, norm_Linf_Hm1
from .config import ConfigError, _coerce, echo, parse_config
from .experiments import EXIT_OK, EXIT_RUNTIME, EXIT_THRESHOLD, PRESETS, run_preset
from .interface_profile import Circle, FlatStrip, ProfileParams, potential_field
from .noise_engine import NoiseFamily, NoiseSpec
from .sch_solver import BlowUpError, Constant, FromFile, Profile, SolverConfig, run
from .trajectory_io import read_trajectory, write_trajectory


def _out_dir(args, cfg) -> Path:
    return Path(os.environ.get("SHARPFLOW_OUT") or args.out or cfg["output.dir"])


def _load(args, preset: str | None = None) -> dict:
    overrides = {}
    if preset:
        overrides["preset"] = preset
    if getattr(args, "seed", None) is not None:
        overrides["noise.seed"] = args.seed
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = _coerce(v)
    return parse_config(args.config, overrides)


def geometry(cfg: dict):
    if cfg["interface.shape"] == "strip":
        return FlatStrip(cfg["interface.strip_position"])
    return Circle(cfg["interface.center"], cfg["interface.radius"])


def solver_config(cfg: dict) -> SolverConfig:
    """Build a :class:`SolverConfig` from a parsed configuration."""
    n = int(cfg["noise.cutoff"])
    noise = None
    if cfg["noise.family"] != "none":
        noise = NoiseSpec(NoiseFamily(cfg["noise.family"]), cfg["noise.sigma"], cfg["noise.h"], n)
    kind = cfg["initial.kind"]
    if kind == "profile":
        initial = Profile(geometry(cfg), cfg["profile.lambda_formula"])
    elif kind == "constant":
        initial = Constant(float(cfg["initial.value"]))
    else:
        initial = FromFile(cfg["initial.path"])
    return SolverConfig(
        eps=cfg["solver.eps"], T=cfg["solver.T"], dt=None if cfg["solver.dt"] == "auto" else cfg["solver.dt"],
        cutoff=n, scheme=cfg["solver.scheme"], stabilization=cfg["solver.stabilization"], noise=noise,
        renorm=cfg["renorm.mode"], initial=initial, seed=cfg["noise.seed"],
        cadence=None if cfg["output.cadence"] == "auto" else cfg["output.cadence"],
    )


def cmd_run(args) -> int:
    cfg = _load(args, args.preset)
    print(echo(cfg))
    return run_preset(args.preset, cfg, _out_dir(args, cfg), threads=args.threads)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    print(echo(cfg))
    scfg = solver_config(cfg)
    w_A = None
    if isinstance(scfg.initial, Profile):
        w_A = potential_field(scfg.initial.geom, ProfileParams(scfg.eps, scfg.initial.lambda_formula), scfg.cutoff)
    rec = run(scfg)
    out = write_trajectory(_out_dir(args, cfg), rec, w_A)
    print(f"{scfg.n_steps} steps, {len(rec.times)} snapshots -> {out}")
    return EXIT_OK


def cmd_norms(args) -> int:
    rec, _ = read_trajectory(args.traj)
    m = rec.meta.get("grid")
    print(f"trajectory {args.traj}: {len(rec.times)} snapshots, t in [{rec.times[0]:g}, {rec.times[-1]:g}]")
    if rec.reference is not None:
        res = rec.residuals()
        print(f"||u - u_A||_L3(D_T)   = {norm_L3_spacetime(rec.times, res, m):.10e}")
        print(f"||u - u_A||_Linf(H^-1) = {norm_Linf_Hm1(rec.times, res):.10e}")
        print(f"||u - u_A||_L1(H^-2)  = {norm_L1_Hm2(rec.times, res):.10e}")
    print(f"||u||_L3(D_T)          = {norm_L3_spacetime(rec.times, rec.u_snapshots, m):.10e}")
    print(f"int ||Y||_L3^3 dt      = {rec.Y_L3_accumulator:.10e}")
    return EXIT_OK


def cmd_check(args) -> int:
    names = list(PRESETS) if args.all or not args.preset else args.preset
    cfg = _load(args)
    base = _out_dir(args, cfg)
    codes = {}
    for name in names:
        codes[name] = run_preset(name, dict(cfg, preset=name), base / name, threads=args.threads)
    print("\nsummary")
    for name, code in codes.items():
        print(f"  {'PASS' if code == EXIT_OK else 'FAIL'}  {name}")
    if any(c == EXIT_RUNTIME for c in codes.values()):
        return EXIT_RUNTIME
    return EXIT_THRESHOLD if any(codes.values()) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sharpflow", description="Stochastic Cahn-Hilliard sharp-interface experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="key = value file or JSON")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
        sp.add_argument("--out", help="output directory (SHARPFLOW_OUT takes precedence)")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        if seed:
            sp.add_argument("--seed", type=int)

    r = sub.add_parser("run", help="run one experiment preset")
    r.add_argument("--preset", required=True, choices=list(PRESETS))
    common(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("simulate", help="integrate one trajectory and write its snapshots")
    common(s)
    s.set_defaults(func=cmd_simulate)

    n = sub.add_parser("norms", help="residual norms of a stored trajectory")
    n.add_argument("--traj", required=True)
    n.set_defaults(func=cmd_norms)

    c = sub.add_parser("check", help="run acceptance presets")
    c.add_argument("--all", action="store_true")
    c.add_argument("--preset", action="append", choices=list(PRESETS))
    common(c)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    threads = max(1, getattr(args, "threads", 1) or 1)
    try:
        with fft.set_workers(threads):
            return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, BlowUpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
