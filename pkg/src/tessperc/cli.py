"""Command line interface: tessperc run | sweep | render."""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError, EstimatorFailure, ParameterError


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("TESSPERC_WORKERS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tessperc",
                                     description="Percolation experiments on random tessellations")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the op named in a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="runs", help="output directory (default: runs)")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None, help="override master_seed")

    p_sweep = sub.add_parser("sweep", help="coupled p-grid / t-schedule sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", default="runs")
    p_sweep.add_argument("--workers", type=int, default=None)

    p_render = sub.add_parser("render", help="render one replicate as SVG")
    p_render.add_argument("config")
    p_render.add_argument("--out", required=True, help="output .svg path")
    p_render.add_argument("--rep", type=int, default=0)
    p_render.add_argument("--show-graph", choices=["none", "face", "star"], default="none")
    p_render.add_argument("--core-only", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    workers = getattr(args, "workers", None) or _default_workers()
    try:
        if args.command == "run":
            from .harness import run
            record = run(args.config, out_dir=args.out, workers=workers,
                         seed_override=args.seed)
            print(f"{record.op}: wrote {record.out_dir} (hash {record.spec_hash[:16]})")
        elif args.command == "sweep":
            from .harness import sweep
            record = sweep(args.config, out_dir=args.out, workers=workers)
            print(f"sweep[{record.op}]: wrote {record.out_dir}")
        elif args.command == "render":
            from .harness import _spec_from_config, load_config
            from .experiment import build_tessellation, coloring_for
            from .render import render_svg
            cfg = load_config(args.config)
            spec = _spec_from_config(cfg, p=cfg.get("p") or 0.5)
            tess = build_tessellation(spec, args.rep)
            col = coloring_for(spec, args.rep, tess)
            render_svg(tess, col, args.out, show_graph=args.show_graph,
                       core_only=args.core_only)
            print(f"render: wrote {args.out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, EstimatorFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
