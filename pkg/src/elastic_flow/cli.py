"""Command-line front end: simulate, sweep, verify."""

from __future__ import annotations

import argparse
import sys

from . import iotools
from .convergence import SweepConfig, run_sweep
from .errors import ConfigError, CurveError, IoError
from .flow import FlowConfig, run
from .geometry import make_initial_curve


def _load(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc


def _initial_curve(text: str, n: int):
    spec = iotools.parse_initial_spec(text)
    family = spec.pop("family")
    return make_initial_curve(family, n, **spec)


def _cmd_simulate(args) -> int:
    text = _load(args.config)
    config = iotools.parse_config(text)
    if isinstance(config, SweepConfig):
        raise ConfigError("sweep", "config declares a sweep; use the sweep command")
    curve = _initial_curve(text, config.n)
    traj = run(curve, config, snapshot_stride=args.stride)
    manifest = iotools.RunManifest(
        command="simulate", config_path=args.config, out_dir=args.out,
        stride=args.stride,
    )
    written = iotools.emit_outputs(traj, manifest)
    print(f"{traj.terminated_by.value}; wrote {len(written)} files to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    text = _load(args.config)
    config = iotools.parse_config(text)
    if isinstance(config, FlowConfig):
        raise ConfigError("sweep", "config lacks a [sweep] section")
    curve = _initial_curve(text, config.base.n)
    report = run_sweep(curve, config)
    manifest = iotools.RunManifest(
        command="sweep", config_path=args.config, out_dir=args.out
    )
    written = iotools.emit_outputs(report, manifest)
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def _cmd_verify(args) -> int:
    manifest = iotools.RunManifest(command="verify", out_dir=args.out, seed=args.seed)
    status, text = iotools.run_verify(manifest, tag_filter=args.filter)
    print(text)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elastic-flow",
        description="Evolve pinned plane curves by the regularized curvature "
        "flow and verify its identities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one evolution and emit snapshots")
    sim.add_argument("-c", "--config", required=True, help="config file path")
    sim.add_argument("-o", "--out", required=True, help="output directory")
    sim.add_argument("--stride", type=int, default=1, help="snapshot stride in steps")
    sim.set_defaults(func=_cmd_simulate)

    swp = sub.add_parser("sweep", help="run the epsilon ladder experiment")
    swp.add_argument("-c", "--config", required=True, help="config file path")
    swp.add_argument("-o", "--out", required=True, help="output directory")
    swp.set_defaults(func=_cmd_sweep)

    ver = sub.add_parser("verify", help="run the verification suite")
    ver.add_argument("--filter", default=None, help="criterion tag or name substring")
    ver.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    ver.add_argument("-o", "--out", default=None, help="also write the report here")
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CurveError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
