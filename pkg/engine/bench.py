"""
Single-mesh versus multi-mesh comparison of one configured problem.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .problems import MULTI, SINGLE
from .runner import build_problem

logger = logging.getLogger(__name__)

# --- Configuration ---
PHASES = (("assembler", "assemble_s"), ("solver", "solve_s"), ("estimator", "estimate_s"))


@dataclass
class BenchRow:
    name: str
    single: float
    multi: float

    @property
    def speedup(self):
        """Runtime saved by the multi-mesh run, in percent of the single-mesh run."""
        if self.single <= 0:
            return 0.0
        return 100.0 * (self.single - self.multi) / self.single


@dataclass
class BenchReport:
    problem: str
    steps: int
    rows: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def row(self, name):
        return next(r for r in self.rows if r.name == name)


def _mean_times(records, wall):
    out = {name: float(np.mean([r[key] for r in records])) if records else 0.0 for name, key in PHASES}
    out["overall"] = wall / max(len(records), 1)
    return out


def _run_mode(config, mode, max_steps, identical=False):
    problem = build_problem(config, mode=mode, identical_meshes=identical)
    start = time.perf_counter()
    records = problem.run(max_steps=max_steps)
    wall = time.perf_counter() - start
    summary = {"dofs": problem.total_dofs(), "nnz": records[-1]["nnz"] if records else 0,
               "leaves": problem.mesh_summary(), "wall_s": wall}
    return _mean_times(records, wall), summary, len(records)


def bench_compare(config, max_steps=None, identical=False):
    """
    Runs the configured problem in single- and multi-mesh mode.

    :param config: RunConfig.
    :param max_steps: Optional cap on the number of steps of each run.
    :param identical: Run the multi-mesh side with all meshes forced identical.
    :return: BenchReport with rows assembler/solver/estimator/overall (mean seconds per step).
    """
    single, single_summary, steps = _run_mode(config, SINGLE, max_steps)
    multi, multi_summary, _ = _run_mode(config, MULTI, max_steps, identical)
    report = BenchReport(config.problem, steps)
    for name in ("assembler", "solver", "estimator", "overall"):
        report.rows.append(BenchRow(name, single[name], multi[name]))
    report.totals = {"single": single_summary, "multi": multi_summary}
    logger.info("Bench %s: overall speedup %.1f%%", config.problem, report.row("overall").speedup)
    return report


def format_report(report):
    """Plain-text table: one line per phase with both mean times and the speedup."""
    lines = [f"{report.problem}: mean time per step over {report.steps} steps",
             f"{'':<12}{'single [s]':>14}{'multi [s]':>14}{'speedup':>10}"]
    for r in report.rows:
        lines.append(f"{r.name:<12}{r.single:>14.4f}{r.multi:>14.4f}{r.speedup:>9.1f}%")
    for mode in ("single", "multi"):
        t = report.totals.get(mode, {})
        lines.append(f"{mode}: {t.get('dofs', 0)} dofs, nnz {t.get('nnz', 0)}, total {t.get('wall_s', 0.0):.1f} s")
    return "\n".join(lines)
