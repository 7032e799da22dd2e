"""Command-line entry point: ``run`` a scenario or ``bench`` the planner.

Exit codes: 0 on success, 2 for an invalid or missing scenario (or replay
file), 3 when the wall-clock cap stops a run before it terminates.
Set ``OCTOFRONTIER_LOG`` to a logging level name (e.g. ``INFO``) for progress
messages on stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import DEFAULT_SIZES, BenchParams, run_bench
from .metrics import (
    CANDIDATE_COLUMNS, ITERATION_COLUMNS, VOLUME_COLUMNS, CsvStream, MetricsLog, write_summary,
)
from .octree import write_voxel_records
from .sim.explore import Explorer, Observer, WallClockExceeded, replay_exploration
from .sim.world import ScenarioError, load_scenario
from .submap import load_scans, write_scans

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_WALL_CAP = 3

BENCH_COLUMNS = ["target", "Fg", "Fl", "Fexp", "Fc", "t_detect", "t_cluster", "t_select", "t_total"]

log = logging.getLogger("octofrontier")


class ReportWriter(Observer):
    """Streams metrics, volumes and scored candidates to CSV as the run goes."""

    def __init__(self, out_dir: Path, frontier_dir: Path | None = None, scan_sink=None):
        self.out_dir = out_dir
        self.frontier_dir = frontier_dir
        self.scan_sink = scan_sink
        self.octree = None
        self._files = [open(out_dir / name, "w", newline="") for name in
                       ("metrics.csv", "volume.csv", "candidates.csv")]
        self.metrics = CsvStream(self._files[0], ITERATION_COLUMNS)
        self.volumes = CsvStream(self._files[1], VOLUME_COLUMNS)
        self.candidates = CsvStream(self._files[2], CANDIDATE_COLUMNS)

    def on_start(self, explorer):
        self.octree = explorer.octree

    def on_scan(self, scan):
        if self.scan_sink is not None:
            self.scan_sink.append(scan)

    def on_volume(self, sample):
        self.volumes.write(sample.row())

    def on_iteration(self, metrics, scored, chosen, frontier):
        self.metrics.write(metrics.row())
        for c in scored:
            self.candidates.write([
                str(metrics.iteration), *(f"{v:.6f}" for v in c.position),
                f"{c.info_gain:.9g}", f"{c.distance:.6f}", f"{c.total_gain:.9g}",
                "1" if chosen is not None and c.position == chosen.position else "0",
            ])
        if self.frontier_dir is not None:
            self._dump_frontier(metrics.iteration, frontier.global_)

    def _dump_frontier(self, j: int, flat):
        tree = self.octree
        lo, hi = tree.bounds_min, tree.bounds_max
        with open(self.frontier_dir / f"frontier_{j:04d}.txt", "w") as fh:
            fh.write(f"{tree.resolution:.6f} {tree.max_depth} "
                     f"{lo[0]:.6f} {lo[1]:.6f} {lo[2]:.6f} {hi[0]:.6f} {hi[1]:.6f} {hi[2]:.6f}\n")
            write_voxel_records(fh, tree.unravel(flat), tree.grid.ravel()[flat])

    def close(self):
        for fh in self._files:
            fh.close()


def _configure_logging() -> None:
    level = os.environ.get("OCTOFRONTIER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _print_parameters(scenario) -> None:
    w, p, s = scenario.world, scenario.planner, scenario.sensor
    extent = w.bounds_max - w.bounds_min
    shape = np.ceil(extent / p.r_max - 1e-9).astype(int)
    print(f"scenario        {scenario.name}")
    print(f"bounds          {w.bounds_min.tolist()} .. {w.bounds_max.tolist()}")
    print(f"grid            {shape[0]} x {shape[1]} x {shape[2]} voxels ({int(np.prod(shape))} total)")
    print(f"r_max           {p.r_max:g} m  (d_max {p.d_max})")
    print(f"d_exp           {p.d_exp}")
    print(f"r_exp           {p.r_exp:g} m")
    print(f"bandwidth       {p.bandwidth:g} m")
    print(f"lambda          {p.lam:g}")
    print(f"gain cube       {scenario.gain_cube_side:g} m")
    print(f"N_s             {p.n_scans}")
    print(f"safety margin   {p.safety_margin:g} m")
    print(f"sensor          range {s.max_range:g} m, {s.vertical_beams} beams over {s.vertical_fov:g} deg, "
          f"azimuth step {s.azimuth_step:g} deg, {s.scan_rate:g} Hz")
    print(f"obstacles       {len(w.obstacles)}")
    print(f"seed            {scenario.seed}")


def _print_summary(summary: dict) -> None:
    print(f"termination     {summary['termination']}")
    print(f"exploration     {summary['exploration_time']:.2f} s simulated, "
          f"{summary['distance_travelled']:.1f} m travelled")
    print(f"planner time    {summary['planner_time_mean']:.4f} +/- {summary['planner_time_sd']:.4f} s "
          f"over {summary['iterations']} iterations")
    print(f"final volume    free {summary['final_free']:.4f}  occupied {summary['final_occ']:.4f}  "
          f"unknown {summary['final_unknown']:.4f}")
    print(f"collisions      {summary['collisions']}")


def _finish(out_dir: Path, metrics: MetricsLog, writer: ReportWriter, plots: bool) -> dict:
    writer.close()
    summary = metrics.summary()
    with open(out_dir / "summary.json", "w") as fh:
        write_summary(fh, summary)
    if plots and metrics.iterations:
        from .plotting import plot_iteration_metrics, plot_volumes
        plot_iteration_metrics(metrics.iterations, out_dir / "metrics.png")
        plot_volumes(metrics.volumes, out_dir / "volume.png")
    return summary


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        scenario = scenario.with_overrides(
            seed=args.seed, lam=args.lam, bandwidth=args.bandwidth, d_exp=args.d_exp, r_max=args.r_max,
        )
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (OSError, ScenarioError) as exc:
        print(f"error: invalid scenario {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    if args.dry_run:
        _print_parameters(scenario)
        return EXIT_OK

    scans = None
    if args.replay:
        try:
            scans = load_scans(args.replay)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read replay file: {exc}", file=sys.stderr)
            return EXIT_BAD_INPUT

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frontier_dir = None
    if args.dump_frontier is not None:
        frontier_dir = Path(args.dump_frontier) if args.dump_frontier else out_dir / "frontier"
        frontier_dir.mkdir(parents=True, exist_ok=True)
    recorded = [] if args.record_scans and scans is None else None
    writer = ReportWriter(out_dir, frontier_dir, recorded)

    code = EXIT_OK
    try:
        if scans is not None:
            metrics = replay_exploration(scenario, scans, writer)
        else:
            metrics = Explorer(scenario, writer).run(args.wall_cap)
    except WallClockExceeded as exc:
        print(f"error: wall-clock cap of {args.wall_cap:g} s reached", file=sys.stderr)
        metrics = exc.metrics
        code = EXIT_WALL_CAP
    summary = _finish(out_dir, metrics, writer, not args.no_plots)
    if recorded is not None:
        with open(args.record_scans, "w") as fh:
            write_scans(fh, recorded)
    _print_summary(summary)
    print(f"outputs         {out_dir}")
    return code


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(float(s)) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list: {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def cmd_bench(args) -> int:
    params = BenchParams(repeats=args.repeats)
    result = run_bench(args.sizes, args.seed, params,
                       progress=lambda r: log.info("|F_g|=%d t_total=%.4f s", r["Fg"], r["t_total"]))
    rows = result["rows"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            w.writerow([r[k] if isinstance(r[k], int) else f"{r[k]:.6f}" for k in BENCH_COLUMNS])
    finally:
        if out is not sys.stdout:
            out.close()
    fit = result["fit"]
    if fit is not None:
        print(f"# fit: t_total = {fit['slope']:.4e} * |F_g| + {fit['intercept']:.4e}  (R^2 = {fit['r2']:.4f})")
        if args.out and not args.no_plots:
            from .plotting import plot_bench
            plot_bench(rows, fit, Path(args.out).with_suffix(".png"))
    return EXIT_OK


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0 or math.isinf(v):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="octofrontier", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="explore a scenario and write metrics")
    run.add_argument("scenario", help="scenario JSON file (or the name of a bundled scenario)")
    run.add_argument("--out-dir", default="out", help="directory for CSV/JSON/PNG outputs (default: out)")
    run.add_argument("--dump-frontier", nargs="?", const="", default=None, metavar="DIR",
                     help="write the global frontier every iteration (default DIR: OUT_DIR/frontier)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--lambda", dest="lam", type=float, help="distance weight of the total gain")
    run.add_argument("--bandwidth", type=float, help="mean-shift bandwidth in meters")
    run.add_argument("--d-exp", type=int, help="exploration depth used for frontier coarsening")
    run.add_argument("--r-max", type=float, help="finest voxel edge in meters")
    run.add_argument("--wall-cap", type=_positive, metavar="SECONDS", help="abort after this much wall time")
    run.add_argument("--dry-run", action="store_true", help="print derived parameters and exit")
    run.add_argument("--replay", metavar="FILE", help="drive mapping from a recorded scan file")
    run.add_argument("--record-scans", metavar="FILE", help="save simulated scans for later replay")
    run.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="time planner phases against frontier size")
    bench.add_argument("--sizes", type=_parse_sizes, default=list(DEFAULT_SIZES),
                       help="comma-separated target frontier sizes (default: 1000,10000,100000)")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--repeats", type=int, default=3, help="timed repetitions per size (median kept)")
    bench.add_argument("--out", metavar="FILE", help="CSV output path (default: stdout)")
    bench.add_argument("--no-plots", action="store_true", help="skip the PNG next to --out")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
