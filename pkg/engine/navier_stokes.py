"""
Incompressible Navier-Stokes flow in the lid-driven cavity.

Single-mesh mode uses Taylor-Hood elements (P2 velocity, P1 pressure).
Multi-mesh mode uses P1 for both, with the velocity mesh two bisection
levels finer than the pressure mesh.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .assembly import (
    FIRST, SECOND, TEST, TRIAL, ZERO, Assembler, BlockSystem, FieldCoefficient, LinearTerm,
    OperatorTerm,
)
from .lagrange_basis import get_quadrature, physical_gradients
from .linalg import SolverConfig, solve
from .timestepping import MULTI, Problem

logger = logging.getLogger(__name__)

# --- Configuration ---
WALL_MARKERS = (1, 2, 4)
LID_MARKER = 3
EDDY_THRESHOLD = 1e-10


@dataclass
class Eddy:
    x: float
    y: float
    psi: float


def divergence_norm(ux, uy):
    """||div u_h||_{L2} for velocity components on one space."""
    space = ux.space
    if uy.space.mesh is not space.mesh:
        raise ValueError("Velocity components must share a mesh")
    rule = get_quadrature(space.dim, min(2 * space.degree, 8))
    grads = physical_gradients(space.basis, space.grad_lambda, rule.points)
    div = np.einsum("ei,eqi->eq", ux.local_coefficients(), grads[..., 0]) + \
        np.einsum("ei,eqi->eq", uy.local_coefficients(), grads[..., 1])
    dx = rule.weights[None, :] * (2.0 * space.volumes)[:, None]
    return float(np.sqrt(np.sum(dx * div ** 2)))


def stream_function(ux, uy, assembler=None, solver=None):
    """
    Solves -Laplace psi = omega, omega = d(uy)/dx - d(ux)/dy, with psi = 0 on the boundary.

    :return: FEFunction psi on the space of ``ux``.
    """
    assembler = assembler or Assembler()
    space = ux.space
    system = BlockSystem({"psi": space})
    system.add_block("psi", "psi", assembler.assemble_block(space, space, [OperatorTerm(SECOND)]))
    vorticity = FieldCoefficient(lambda x, u, v: v.grad[..., 0] - u.grad[..., 1], ux, uy)
    system.add_rhs("psi", assembler.assemble_vector(space, [LinearTerm(ZERO, vorticity)]))
    system.apply_dirichlet("psi", None, 0.0)
    A, b = system.assemble()
    result = solve(A, b, None, solver or SolverConfig(method="direct_lu"))
    return system.split(result.x)["psi"]


def _dof_neighbours(space):
    n = space.basis.n
    rows = np.repeat(space.dofs, n, axis=1).ravel()
    cols = np.tile(space.dofs, (1, n)).ravel()
    keep = rows != cols
    return rows[keep], cols[keep]


def _refine_extremum(coords, values, centre):
    """Stationary point of the least-squares quadratic through a patch, or None."""
    local = coords - centre
    x, y = local[:, 0], local[:, 1]
    V = np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])
    if len(values) < 6:
        return None
    c, *_ = np.linalg.lstsq(V, values, rcond=None)
    H = np.array([[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]])
    if abs(np.linalg.det(H)) < 1e-14:
        return None
    p = np.linalg.solve(H, -c[1:3])
    if np.linalg.norm(p) > np.max(np.linalg.norm(local, axis=1)):
        return None
    value = c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[0] ** 2 + c[4] * p[0] * p[1] + c[5] * p[1] ** 2
    return centre + p, float(value)


def locate_eddies(ux, uy, assembler=None):
    """
    Eddy centres as the interior local extrema of the stream function.

    Each discrete extremum is refined by the stationary point of a quadratic
    fitted to its neighbourhood.

    :return: List of Eddy, strongest first.
    """
    psi = stream_function(ux, uy, assembler)
    space = psi.space
    rows, cols = _dof_neighbours(space)
    values = psi.values
    upper = np.full(space.num_dofs, -np.inf)
    lower = np.full(space.num_dofs, np.inf)
    np.maximum.at(upper, rows, values[cols])
    np.minimum.at(lower, rows, values[cols])
    interior = np.ones(space.num_dofs, dtype=bool)
    interior[space.boundary_dofs()] = False
    candidates = np.nonzero(interior & ((values > upper) | (values < lower)) &
                            (np.abs(values) > EDDY_THRESHOLD))[0]

    eddies = []
    for d in candidates:
        patch = np.unique(np.concatenate([[d], cols[rows == d]]))
        refined = _refine_extremum(space.dof_coords[patch], values[patch], space.dof_coords[d])
        if refined is None:
            point, value = space.dof_coords[d], float(values[d])
        else:
            point, value = refined
        eddies.append(Eddy(float(point[0]), float(point[1]), value))
    eddies.sort(key=lambda e: -abs(e.psi))
    return eddies


class NavierStokesProblem(Problem):
    """Lid-driven cavity on the unit square, run until the flow is steady."""
    name = "navier_stokes"
    components = ("ux", "uy", "p")
    mesh_groups = {"ux": "velocity", "uy": "velocity", "p": "pressure"}
    PARAMETERS = {"tau": 0.01, "steps": 5000, "Re": 50.0, "steady_tol": 1e-6, "velocity_levels": 2}
    DEFAULT_ADAPT = {}
    DEFAULT_SOLVER = {"method": "direct_lu"}
    DIAGNOSTICS = ("change", "divergence", "kinetic_energy")

    def __init__(self, macro, parameters=None, **kwargs):
        super().__init__(macro, parameters, **kwargs)
        self.change = float("inf")

    @property
    def viscosity(self):
        return 1.0 / float(self.parameters["Re"])

    def degree_of(self, component):
        if self.mode == MULTI or component == "p":
            return 1
        return 2

    def extra_levels(self, group):
        if self.mode == MULTI and group == "velocity" and not self.identical_meshes:
            return int(self.parameters["velocity_levels"])
        return 0

    def initial_condition(self, component):
        return 0.0

    def assemble_system(self, old):
        tau, nu = self.tau, self.viscosity
        V, Q = self.spaces["ux"], self.spaces["p"]
        a = self.assembler
        convection = FieldCoefficient(lambda x, u, v: np.stack([u.value, v.value], axis=-1), old["ux"], old["uy"])
        momentum = a.assemble_block(V, V, [
            OperatorTerm(ZERO, 1.0 / tau), OperatorTerm(SECOND, nu),
            OperatorTerm(FIRST, convection, derivative_on=TRIAL),
        ])
        system = BlockSystem({"ux": V, "uy": self.spaces["uy"], "p": Q})
        for index, c in enumerate(("ux", "uy")):
            direction = -np.eye(2)[index]
            system.add_block(c, c, momentum)
            system.add_block(c, "p", a.assemble_block(V, Q, [OperatorTerm(FIRST, direction, derivative_on=TEST)]))
            system.add_block("p", c, a.assemble_block(Q, V, [OperatorTerm(FIRST, direction, derivative_on=TRIAL)]))
            system.add_rhs(c, a.assemble_vector(V, [
                LinearTerm(ZERO, FieldCoefficient(lambda x, u: u.value / tau, old[c])),
            ]))

        system.apply_dirichlet("ux", LID_MARKER, 1.0)
        system.apply_dirichlet("ux", list(WALL_MARKERS), 0.0)
        system.apply_dirichlet("uy", [LID_MARKER, *WALL_MARKERS], 0.0)
        system.pin("p", 0, 0.0)
        return system

    def diagnostics(self, new, old):
        changes = []
        for c in self.components:
            norm = np.linalg.norm(new[c].values)
            delta = np.linalg.norm(new[c].values - old[c].values)
            changes.append(delta / norm if norm > 0 else delta)
        self.change = max(changes)
        energy = 0.5 * (new["ux"].l2_norm() ** 2 + new["uy"].l2_norm() ** 2)
        return {"change": self.change, "divergence": divergence_norm(new["ux"], new["uy"]),
                "kinetic_energy": energy}

    def finished(self):
        return self.change < float(self.parameters["steady_tol"])

    def eddies(self):
        return locate_eddies(self.state.fields["ux"], self.state.fields["uy"], self.assembler)
