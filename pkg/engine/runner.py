"""
Builds problems from a RunConfig and runs them with CSV/VTK output.
"""
import logging
import os
from dataclasses import dataclass, field

from .config import dump_config
from .output import CsvSeries, export_vtk
from .simplicial_mesh import load_macro_mesh

logger = logging.getLogger(__name__)


@dataclass
class RunSummary:
    problem: str
    mode: str
    steps: int
    time: float
    dofs: dict
    leaves: dict
    csv_path: str = None
    vtk_files: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    eddies: list = field(default_factory=list)


def build_problem(config, mode=None, identical_meshes=None):
    """
    Instantiates the configured problem.

    :param config: RunConfig.
    :param mode: Overrides ``config.mode``.
    :param identical_meshes: Overrides ``config.mesh.identical``.
    :return: Problem (not yet set up).
    """
    macro = load_macro_mesh(config.macro_path())
    if config.mesh.scale != 1.0:
        macro = macro.scaled(config.mesh.scale)
    return config.problem_class(
        macro, dict(config.parameters),
        mode=mode or config.mode,
        adapt=config.adapt_settings(),
        solver=config.solver,
        initial_refinement=config.mesh.initial_refinement,
        identical_meshes=config.mesh.identical if identical_meshes is None else identical_meshes,
        initial_adapt=config.mesh.initial_adapt,
        seed=config.seed,
    )


def run_config(config, max_steps=None, callback=None):
    """
    Runs a configuration and writes its outputs under ``config.output.dir``.

    :param max_steps: Optional cap on the number of steps.
    :param callback: Optional function receiving (problem, record) after each step.
    :return: RunSummary.
    """
    out_dir = config.output.dir
    os.makedirs(out_dir, exist_ok=True)
    prefix = config.output.prefix or f"{config.problem}_{config.mode}"
    with open(os.path.join(out_dir, f"{prefix}.cfg"), "w", encoding="utf-8") as f:
        f.write(dump_config(config))

    problem = build_problem(config)
    problem.setup()
    vtk_files = []
    interval = config.output.vtk_interval
    if interval:
        vtk_files += export_vtk(problem.state.fields, out_dir, prefix, 0)

    csv_path = os.path.join(out_dir, f"{prefix}.csv") if config.output.csv else None
    series = CsvSeries(csv_path, problem.columns()) if csv_path else None

    def on_step(p, record):
        if series:
            series.write(record)
        if interval and record["step"] % interval == 0:
            vtk_files.extend(export_vtk(p.state.fields, out_dir, prefix, record["step"]))
        if callback:
            callback(p, record)

    try:
        records = problem.run(max_steps=max_steps, callback=on_step)
    finally:
        if series:
            series.close()

    summary = RunSummary(
        problem=config.problem, mode=config.mode, steps=len(records), time=problem.state.time,
        dofs={c: problem.spaces[c].num_dofs for c in problem.components},
        leaves=problem.mesh_summary(), csv_path=csv_path, vtk_files=vtk_files,
        final=records[-1] if records else {},
    )
    if hasattr(problem, "eddies"):
        summary.eddies = problem.eddies()
    logger.info("Run finished: %d steps, t=%.4g", summary.steps, summary.time)
    return summary
