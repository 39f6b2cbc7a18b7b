"""Command line: ``lagcrowd run|render|validate``.

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import records
from .config import ConfigError, RunConfig, dump_config, parse_config
from .render import render_density_svg, render_trajectories_svg
from .scenarios import CASES
from .stepper import SimulationError, run

OUT_DIR_ENV = "LAGCROWD_OUT_DIR"
DEFAULT_OUT_DIR = "out"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("lagcrowd")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _snapshot_list(text: str) -> str:
    for part in text.split(","):
        if part.strip():
            float(part)
    return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lagcrowd", description="Lagrangian moving-mesh crowd flow simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="INI configuration file")
        sp.add_argument("--scenario", choices=CASES)

    r = sub.add_parser("run", help="simulate and write CSV (and SVG) output")
    common(r)
    r.add_argument("--out-dir", type=Path)
    r.add_argument("--duration", type=float)
    r.add_argument("--snapshots", type=_snapshot_list, help="comma separated times, e.g. 20,80")
    r.add_argument("--gradient-scheme", choices=("line", "paper-literal"))
    r.add_argument("--no-render", action="store_true", help="skip SVG output")

    d = sub.add_parser("render", help="draw SVG plots from an existing output directory")
    d.add_argument("--config", type=Path, help="defaults to <out-dir>/config.ini")
    d.add_argument("--out-dir", type=Path)

    v = sub.add_parser("validate", help="check a configuration and print it with defaults filled in")
    common(v)
    return p


def _out_dir(arg: Path | None) -> Path:
    if arg is not None:
        return arg
    return Path(os.environ.get(OUT_DIR_ENV, DEFAULT_OUT_DIR))


def _load(args, **overrides) -> RunConfig:
    text = args.config.read_text() if args.config else ""
    return parse_config(text, scenario=getattr(args, "scenario", None), **overrides)


def render_outputs(cfg: RunConfig, out_dir: Path) -> list[Path]:
    written = []
    if cfg.render_density:
        for t in cfg.snapshots:
            snap = records.snapshot_path(out_dir, t)
            mesh = records.mesh_path(out_dir, t)
            if not (snap.exists() and mesh.exists()):
                continue
            svg = render_density_svg(records.read_snapshot(snap), records.read_mesh(mesh), cfg.rho_jam,
                                     title=f"{cfg.scenario} density t={records.time_label(t)} s")
            path = out_dir / f"density_{records.time_label(t)}.svg"
            path.write_text(svg)
            written.append(path)
    traj = out_dir / "trajectories.csv"
    if cfg.render_trajectories and traj.exists():
        svg = render_trajectories_svg(records.read_trajectories(traj), cfg.duration,
                                      title=f"{cfg.scenario} trajectories")
        path = out_dir / "trajectories.svg"
        path.write_text(svg)
        written.append(path)
    return written


def cmd_run(args) -> int:
    overrides = {"gradient_scheme": args.gradient_scheme, "duration": args.duration,
                 "snapshots": args.snapshots}
    if args.out_dir is not None:
        overrides["out_dir"] = str(args.out_dir)
    cfg = _load(args, **overrides)
    out_dir = Path(cfg.out_dir) if cfg.out_dir else _out_dir(None)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(dump_config(cfg))
    sink = records.CsvSink(out_dir)
    result = run(cfg.scenario_spec(), cfg.duration, cfg.snapshots, sinks=[sink])
    sink.close()
    total0 = result.initial_total
    drift = max(abs(t - total0) for t in result.totals) / total0 if total0 > 0 else 0.0
    summary = {
        "scenario": cfg.scenario,
        "steps": result.state.step_index,
        "final_time": result.state.time,
        "initial_total": total0,
        "final_total": result.state.total,
        "max_relative_drift": drift,
        "remesh_steps": result.remesh_steps,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if not args.no_render:
        render_outputs(cfg, out_dir)
    print(f"{cfg.scenario}: {summary['steps']} steps, {len(result.remesh_steps)} remeshes, "
          f"total {result.state.total:.6g} (drift {drift:.2e}) -> {out_dir}")
    return EXIT_OK


def cmd_render(args) -> int:
    out_dir = _out_dir(args.out_dir)
    cfg_path = args.config or out_dir / "config.ini"
    if not cfg_path.exists():
        raise ConfigError("config", f"{cfg_path} not found")
    cfg = parse_config(cfg_path.read_text())
    for path in render_outputs(cfg, out_dir):
        print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "render": cmd_render, "validate": cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SimulationError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
