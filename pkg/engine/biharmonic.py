"""
Biharmonic equation in mixed form: -Laplace u + v = 0, Laplace v = f.

u and v may live on different meshes. With Navier (simply supported)
boundary conditions both components are prescribed on the boundary.
"""
import logging
import math

import numpy as np

from .assembly import SECOND, ZERO, Assembler, BlockSystem, LinearTerm, OperatorTerm
from .linalg import SolverConfig, solve
from .timestepping import Problem

logger = logging.getLogger(__name__)


def manufactured_solution(x):
    """u = sin(pi x) sin(pi y); v = Laplace u = -2 pi^2 u; f = Laplace^2 u = 4 pi^4 u."""
    u = np.prod(np.sin(math.pi * x), axis=-1)
    dim = x.shape[-1]
    return u, -dim * math.pi ** 2 * u, (dim * math.pi ** 2) ** 2 * u


def biharmonic_system(spaces, rhs, u_boundary=0.0, v_boundary=0.0, assembler=None, markers=None):
    """
    Block system of the mixed biharmonic problem.

    Rows of u: int grad u . grad psi + int v psi = 0.
    Rows of v: int grad v . grad chi = -int f chi.

    :param spaces: Dict with FESpaces 'u' and 'v'.
    :param rhs: f as constant or callable of physical points.
    :param u_boundary: Dirichlet data of u.
    :param v_boundary: Dirichlet data of v (= Laplace u on the boundary).
    :return: BlockSystem.
    """
    assembler = assembler or Assembler()
    u_space, v_space = spaces["u"], spaces["v"]
    system = BlockSystem({"u": u_space, "v": v_space})
    system.add_block("u", "u", assembler.assemble_block(u_space, u_space, [OperatorTerm(SECOND)]))
    system.add_block("u", "v", assembler.assemble_block(u_space, v_space, [OperatorTerm(ZERO)]))
    system.add_block("v", "v", assembler.assemble_block(v_space, v_space, [OperatorTerm(SECOND)]))
    if callable(rhs):
        load = LinearTerm(ZERO, lambda x: -rhs(x), coefficient_degree=v_space.degree + 2)
    else:
        load = LinearTerm(ZERO, -float(rhs))
    system.add_rhs("v", assembler.assemble_vector(v_space, [load]))
    markers = markers if markers is not None else u_space.mesh.macro.markers
    system.apply_dirichlet("u", markers, u_boundary)
    system.apply_dirichlet("v", markers, v_boundary)
    return system


def biharmonic_solve(spaces, rhs, u_boundary=0.0, v_boundary=0.0, assembler=None, solver=None):
    """
    Solves the mixed biharmonic problem.

    :return: (u_h, v_h) FEFunctions.
    """
    system = biharmonic_system(spaces, rhs, u_boundary, v_boundary, assembler)
    A, b = system.assemble()
    result = solve(A, b, None, solver or SolverConfig(method="direct_lu"))
    fields = system.split(result.x)
    return fields["u"], fields["v"]


class BiharmonicProblem(Problem):
    """Stationary mixed biharmonic problem with a manufactured right-hand side."""
    name = "biharmonic"
    components = ("u", "v")
    mesh_groups = {"u": "u", "v": "v"}
    stationary = True
    PARAMETERS = {"tau": 1.0, "steps": 1, "degree": 2, "manufactured": True, "load": 1.0}
    DEFAULT_ADAPT = {
        "u": {"tol": 1e-3, "max_iterations": 6},
        "v": {"tol": 1e-1, "max_iterations": 6},
    }
    DEFAULT_SOLVER = {"method": "direct_lu"}
    DIAGNOSTICS = ("error_u", "error_v")

    def initial_condition(self, component):
        return 0.0

    def _rhs(self):
        if self.parameters["manufactured"]:
            return lambda x: manufactured_solution(x)[2]
        return float(self.parameters["load"])

    def assemble_system(self, old):
        return biharmonic_system(self.spaces, self._rhs(), assembler=self.assembler)

    def diagnostics(self, new, old):
        if not self.parameters["manufactured"]:
            return {}
        out = {}
        for index, c in enumerate(self.components):
            exact = new[c].space.interpolate(lambda x: manufactured_solution(x)[index])
            error = new[c].copy()
            error.values -= exact.values
            out[f"error_{c}"] = error.l2_norm()
        logger.info("Biharmonic errors: u %.3e, v %.3e", out["error_u"], out["error_v"])
        return out
