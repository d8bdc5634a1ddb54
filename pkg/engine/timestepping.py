"""
Shared driver for the coupled problems: meshes per component group,
the per-step adaptation loop and the bookkeeping behind the CSV output.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .adapt import (
    COARSEN, KEEP, REFINE, AdaptConfig, adapt_mesh, combine_marks, estimate_residual, limit_marks,
    mark, transfer_solution,
)
from .assembly import Assembler, FESpace
from .linalg import SolverConfig, SolverError, solve
from .simplicial_mesh import Mesh
from .transform_cache import MatrixCache, cache_stats

logger = logging.getLogger(__name__)

# --- Configuration ---
SINGLE = "single"
MULTI = "multi"
MODES = (SINGLE, MULTI)
SHARED_GROUP = "all"


@dataclass
class ProblemState:
    """Fields at t_n (and t_{n-1} once a step was taken) plus the run parameters."""
    time: float
    step: int
    tau: float
    fields: dict
    previous: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"Timestep must be positive, got {self.tau}")


class Problem:
    """
    Base class of the time-stepping drivers.

    Subclasses declare their components, degrees, mesh groups and default
    parameters, and implement ``initial_condition``, ``assemble_system`` and
    ``diagnostics``. In single-mesh mode every component lives on one mesh;
    in multi-mesh mode each mesh group gets its own mesh over the shared macro mesh.
    """
    name = None
    components = ()
    mesh_groups = {}
    conserved = ()
    stationary = False
    PARAMETERS = {"tau": 1.0, "steps": 10}
    DEFAULT_ADAPT = {}
    DEFAULT_SOLVER = {}
    DIAGNOSTICS = ()

    def __init__(self, macro, parameters=None, mode=MULTI, adapt=None, solver=None,
                 initial_refinement=0, identical_meshes=False, initial_adapt=0, seed=0):
        """
        :param macro: Shared MacroMesh.
        :param parameters: Overrides of PARAMETERS.
        :param mode: 'single' or 'multi'.
        :param adapt: Dict component -> AdaptConfig (or dict of its fields); defaults from DEFAULT_ADAPT.
        :param solver: SolverConfig; DEFAULT_SOLVER when omitted.
        :param initial_refinement: Uniform bisections of every mesh before the run.
        :param identical_meshes: Multi-mesh mode with all meshes adapted by the same marks.
        :param initial_adapt: Adaptation passes on the initial condition.
        :param seed: Seed for random initial data.
        """
        if mode not in MODES:
            raise ValueError(f"Unknown mode {mode!r}; expected one of {MODES}")
        unknown = set(parameters or {}) - set(self.PARAMETERS)
        if unknown:
            raise ValueError(f"Unknown parameters for {self.name}: {sorted(unknown)}")
        self.macro = macro
        self.mode = mode
        self.parameters = {**self.PARAMETERS, **(parameters or {})}
        self.solver_config = solver or SolverConfig(**self.DEFAULT_SOLVER)
        self.initial_refinement = initial_refinement
        self.identical_meshes = identical_meshes and mode == MULTI
        self.initial_adapt = initial_adapt
        self.rng = np.random.default_rng(seed)
        self.cache = MatrixCache()
        self.assembler = Assembler(self.cache)

        adapt = self.DEFAULT_ADAPT if adapt is None else adapt
        self.adapt = {c: cfg if isinstance(cfg, AdaptConfig) else AdaptConfig(**cfg) for c, cfg in adapt.items()}
        for component in self.adapt:
            if component not in self.components:
                raise ValueError(f"Adapt settings for unknown component {component!r}")

        self.meshes = {}
        self.spaces = {}
        self.state = None
        self.records = []
        self.last_system = None

    # --- Layout ---

    @property
    def tau(self):
        return float(self.parameters["tau"])

    def group_of(self, component):
        if self.mode == SINGLE:
            return SHARED_GROUP
        return self.mesh_groups.get(component, component)

    def groups(self):
        ordered = []
        for c in self.components:
            g = self.group_of(c)
            if g not in ordered:
                ordered.append(g)
        return ordered

    def degree_of(self, component):
        return int(self.parameters.get("degree", 1))

    def extra_levels(self, group):
        """Additional uniform bisections of one mesh group."""
        return 0

    def setup(self):
        """Builds the meshes, spaces and the (adapted) initial state."""
        for g in self.groups():
            mesh = Mesh(self.macro)
            mesh.refine_uniform(self.initial_refinement + self.extra_levels(g))
            self.meshes[g] = mesh
        self._rebuild_spaces(self.groups())

        fields = self._interpolate_initial()
        for iteration in range(self.initial_adapt):
            changed = self._adapt_once(fields, allow_coarsen=True, step=None)
            if not changed:
                break
            fields = self._interpolate_initial()
        self.state = ProblemState(0.0, 0, self.tau, fields, {}, dict(self.parameters))
        logger.info("%s set up in %s mode: %s", self.name, self.mode,
                    ", ".join(f"{c}={self.spaces[c].num_dofs} dofs" for c in self.components))
        return self.state

    def _rebuild_spaces(self, groups):
        for c in self.components:
            if self.group_of(c) in groups:
                self.spaces[c] = FESpace(self.meshes[self.group_of(c)], self.degree_of(c), c)

    def _interpolate_initial(self):
        return {c: self.spaces[c].interpolate(self.initial_condition(c), c) for c in self.components}

    # --- To be provided by the problems ---

    def initial_condition(self, component):
        raise NotImplementedError

    def assemble_system(self, old):
        """:return: BlockSystem for the step from ``old`` (dict of FEFunctions)."""
        raise NotImplementedError

    def diagnostics(self, new, old):
        return {}

    def strong_residual(self, component, fields):
        """Strong-form residual callable for the element residual; None when c0 = 0."""
        return None

    def finished(self):
        return False

    # --- Adaptation ---

    def _marks(self, fields, step):
        """Combined marks per mesh group."""
        by_group = {}
        for c, cfg in self.adapt.items():
            if not cfg.enabled or (step is not None and step < cfg.start_step):
                continue
            est = estimate_residual(fields[c], self.strong_residual(c, fields) if cfg.c0 else None,
                                    cfg.c0, cfg.c1, cfg.p)
            key = SHARED_GROUP if self.identical_meshes else self.group_of(c)
            marks = limit_marks(mark(est, cfg), fields[c].space.levels, cfg.max_level, cfg.min_level)
            by_group.setdefault(key, []).append(marks)
        return {g: combine_marks(m) for g, m in by_group.items()}

    def _adapt_once(self, fields, allow_coarsen, step):
        """
        One estimate/mark/adapt pass.

        :return: Dict of old spaces per adapted component, empty if nothing changed.
        """
        group_marks = self._marks(fields, step)
        old_spaces = {}
        for g, marks in group_marks.items():
            if not allow_coarsen:
                marks = np.where(marks == COARSEN, KEEP, marks)
            if not np.any(marks != KEEP):
                continue
            targets = self.groups() if g == SHARED_GROUP and self.identical_meshes else [g]
            for target in targets:
                owner = next(c for c in self.components if self.group_of(c) == target)
                before = self.meshes[target].revision
                adapt_mesh(self.spaces[owner], marks)
                if self.meshes[target].revision != before:
                    for c in self.components:
                        if self.group_of(c) == target:
                            old_spaces[c] = self.spaces[c]
            self._rebuild_spaces({self.group_of(c) for c in old_spaces})
        return old_spaces

    def _transfer(self, fields, old_spaces):
        out = dict(fields)
        for c in old_spaces:
            out[c] = transfer_solution(fields[c], self.spaces[c], conserve_mass=c in self.conserved,
                                       cache=self.cache)
        return out

    # --- Stepping ---

    def solve_system(self, old, timings):
        t0 = time.perf_counter()
        system = self.assemble_system(old)
        A, b = system.assemble()
        timings["assemble_s"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        x0 = system.initial_guess(old)
        result = solve(A, b, x0, self.solver_config)
        timings["solve_s"] += time.perf_counter() - t0
        timings["solver_iterations"] += result.iterations
        if not np.all(np.isfinite(result.x)):
            raise SolverError(f"{self.name}: non-finite solution at step {self.state.step + 1}")
        if not result.converged:
            logger.warning("%s: solver did not converge (residual %.3e)", self.name, result.residual)
        self.last_system = (system, A)
        return system.split(result.x)

    def advance(self):
        """
        One timestep: solve, then estimate -> mark -> adapt -> transfer ->
        reassemble -> resolve until no element is marked for refinement.

        :return: Dict of step statistics and diagnostics.
        """
        if self.state is None:
            self.setup()
        step = self.state.step + 1
        timings = {"assemble_s": 0.0, "solve_s": 0.0, "estimate_s": 0.0, "solver_iterations": 0}
        old = self.state.fields
        max_iterations = max([cfg.max_iterations for cfg in self.adapt.values()], default=0)

        for iteration in range(max_iterations + 1):
            new = self.solve_system(old, timings)
            if not self.adapt:
                break
            t0 = time.perf_counter()
            final = iteration == max_iterations
            group_marks = self._marks(new, step)
            refine_wanted = any(np.any(m == REFINE) for m in group_marks.values())
            timings["estimate_s"] += time.perf_counter() - t0
            if not refine_wanted or final:
                old_spaces = self._adapt_once(new, allow_coarsen=True, step=step) if group_marks else {}
                if old_spaces:
                    new = self._transfer(new, old_spaces)
                    old = self._transfer(old, old_spaces)
                break
            old_spaces = self._adapt_once(new, allow_coarsen=True, step=step)
            if not old_spaces:
                break
            old = self._transfer(old, old_spaces)

        record = self._record(step, new, old, timings)
        self.state = ProblemState(self.state.time + self.tau, step, self.tau, new, old, self.state.parameters)
        self.records.append(record)
        return record

    def _record(self, step, new, old, timings):
        record = {"step": step, "time": self.state.time + self.tau}
        for c in self.components:
            record[f"dofs_{c}"] = self.spaces[c].num_dofs
        for g in self.groups():
            record[f"leaves_{g}"] = self.meshes[g].num_leaves
        record["nnz"] = int(self.last_system[1].nnz) if self.last_system else 0
        record.update(timings)
        diagnostics = self.diagnostics(new, old)
        record.update({k: diagnostics.get(k, float("nan")) for k in self.DIAGNOSTICS})
        return record

    def columns(self):
        base = ["step", "time"] + [f"dofs_{c}" for c in self.components] + \
               [f"leaves_{g}" for g in self.groups()]
        return base + ["nnz", "assemble_s", "solve_s", "estimate_s", "solver_iterations"] + list(self.DIAGNOSTICS)

    def run(self, max_steps=None, callback=None):
        """
        Advances until ``steps`` (or ``max_steps``) or until ``finished()``.

        :param callback: Optional function receiving (problem, record) after each step.
        :return: List of step records.
        """
        if self.state is None:
            self.setup()
        steps = 1 if self.stationary else int(self.parameters["steps"])
        if max_steps is not None:
            steps = min(steps, max_steps)
        for _ in range(steps):
            record = self.advance()
            if callback:
                callback(self, record)
            if self.finished():
                logger.info("%s finished after %d steps", self.name, record["step"])
                break
        entries, hits, misses = cache_stats(self.cache)
        logger.info("Transformation cache: %d entries, %d hits, %d misses", entries, hits, misses)
        return self.records

    def total_dofs(self):
        return sum(self.spaces[c].num_dofs for c in self.components)

    def mesh_summary(self):
        return {g: self.meshes[g].num_leaves for g in self.groups()}
