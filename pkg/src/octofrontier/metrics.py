"""Per-iteration metrics, volume samples, and their CSV/JSON encodings."""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import IO

ITERATION_COLUMNS = ["iter", "Fg", "Fl", "Fexp", "Fc", "t_octo", "t_detect", "t_cluster", "t_select", "t_total",
                     "gx", "gy", "gz", "G"]
TIMING_COLUMNS = ["t_octo", "t_detect", "t_cluster", "t_select", "t_total"]
VOLUME_COLUMNS = ["t", "free", "occ", "unknown"]
CANDIDATE_COLUMNS = ["iter", "x", "y", "z", "I", "L", "G", "chosen"]


def usec(seconds: float) -> float:
    """Round a duration to microseconds, the resolution used in every report."""
    return round(seconds, 6)


@dataclass
class IterationMetrics:
    iteration: int
    n_global: int
    n_local: int
    n_parents: int
    n_candidates: int
    t_octo: float = 0.0
    t_detect: float = 0.0
    t_cluster: float = 0.0
    t_select: float = 0.0
    target: tuple[float, float, float] | None = None
    gain: float | None = None

    @property
    def t_total(self) -> float:
        return usec(self.t_octo + self.t_detect + self.t_cluster + self.t_select)

    def row(self) -> list[str]:
        if self.target is None:
            tail = ["", "", "", ""]
        else:
            tail = [f"{v:.6f}" for v in self.target] + [f"{self.gain:.9g}"]
        times = [f"{t:.6f}" for t in (self.t_octo, self.t_detect, self.t_cluster, self.t_select, self.t_total)]
        counts = [str(v) for v in (self.iteration, self.n_global, self.n_local, self.n_parents, self.n_candidates)]
        return counts + times + tail


@dataclass(frozen=True)
class VolumeSample:
    sim_time: float
    free: float
    occ: float
    unknown: float

    def row(self) -> list[str]:
        return [f"{self.sim_time:.3f}", f"{self.free:.12f}", f"{self.occ:.12f}", f"{self.unknown:.12f}"]


@dataclass
class MetricsLog:
    iterations: list[IterationMetrics] = field(default_factory=list)
    volumes: list[VolumeSample] = field(default_factory=list)
    targets: list[tuple[float, float, float]] = field(default_factory=list)
    termination: str = ""
    sim_time: float = 0.0
    collisions: int = 0
    distance_travelled: float = 0.0
    submaps: int = 0
    replans: int = 0
    skipped_points: int = 0

    def summary(self) -> dict:
        totals = [m.t_total for m in self.iterations]
        return summarize(totals, self)


def summarize(totals: list[float], log: MetricsLog | None = None) -> dict:
    out = {
        "iterations": len(totals),
        "planner_time_mean": statistics.fmean(totals) if totals else 0.0,
        "planner_time_sd": statistics.stdev(totals) if len(totals) > 1 else 0.0,
    }
    if log is not None:
        final = log.volumes[-1] if log.volumes else None
        out.update({
            "exploration_time": log.sim_time,
            "termination": log.termination,
            "collisions": log.collisions,
            "distance_travelled": log.distance_travelled,
            "submaps": log.submaps,
            "replans": log.replans,
            "skipped_points": log.skipped_points,
            "final_free": final.free if final else math.nan,
            "final_occ": final.occ if final else math.nan,
            "final_unknown": final.unknown if final else math.nan,
            "targets": [list(t) for t in log.targets],
        })
    return out


class CsvStream:
    """Append-only CSV writer flushed after every row."""

    def __init__(self, fh: IO[str], columns: list[str]):
        self.fh = fh
        self.writer = csv.writer(fh, lineterminator="\n")
        self.writer.writerow(columns)
        fh.flush()

    def write(self, row: list[str]) -> None:
        self.writer.writerow(row)
        self.fh.flush()


def summary_from_csv(path) -> dict:
    """Recompute the planner-time statistics from a metrics CSV."""
    with open(path, newline="") as fh:
        totals = [float(r["t_total"]) for r in csv.DictReader(fh)]
    return summarize(totals)


def write_summary(fh: IO[str], summary: dict) -> None:
    json.dump(summary, fh, indent=2, sort_keys=True)
    fh.write("\n")


def iteration_dicts(log: MetricsLog) -> list[dict]:
    return [asdict(m) for m in log.iterations]
