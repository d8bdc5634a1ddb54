"""
Dendritic solidification of a pure undercooled melt (thin-interface
phase-field model with four-fold anisotropy).

The order parameter phi is +1 in the solid and -1 in the liquid; u is the
dimensionless temperature. Both fields are advanced with a linearized
backward Euler step, each on its own adaptive mesh.
"""
import logging
import math

import numpy as np

from .assembly import (
    FIRST, SECOND, ZERO, BlockSystem, FieldCoefficient, LinearTerm, OperatorTerm,
)
from .timestepping import Problem

logger = logging.getLogger(__name__)

# --- Configuration ---
COUPLING_CONSTANT = 0.6267
GRADIENT_REGULARIZATION = 1e-12
FAR_FIELD_MARKERS = (2, 3)


class TipNotFoundError(ValueError):
    """No solid/liquid transition along the requested axis."""


def anisotropy(grad, epsilon):
    """
    A(n) = (1 - 3 eps) (1 + 4 eps / (1 - 3 eps) * sum n_i^4), with the
    normal n = grad phi / |grad phi| written without the division.

    :param grad: (..., dim) gradients of phi.
    :return: A with the leading shape of ``grad``.
    """
    s = np.sum(grad ** 2, axis=-1)
    q = np.sum(grad ** 4, axis=-1)
    return (1.0 - 3.0 * epsilon) + 4.0 * epsilon * q / (s ** 2 + GRADIENT_REGULARIZATION)


def anisotropy_flux(grad, epsilon):
    """
    N_i = |grad phi|^2 A dA/d(phi_i), the vector whose divergence is the
    anisotropy term of the phi equation.
    """
    s = np.sum(grad ** 2, axis=-1)
    q = np.sum(grad ** 4, axis=-1)
    a = anisotropy(grad, epsilon)
    factor = 16.0 * epsilon * a / (s ** 2 + GRADIENT_REGULARIZATION)
    return factor[..., None] * grad * (grad ** 2 * s[..., None] - q[..., None])


def seed_profile(radius, width=1.0):
    """tanh profile of a solid disk of ``radius`` around the origin."""
    def phi(x):
        r = np.linalg.norm(x, axis=-1)
        return np.tanh((radius - r) / (math.sqrt(2.0) * width))
    return phi


def tip_position(phi, axis=0):
    """
    Position of the solid/liquid transition (phi = 0) along coordinate axis ``axis``.

    Uses the DOFs lying on the axis (all other coordinates zero) and inverse
    linear interpolation between the last solid and the first liquid node.

    :param phi: FEFunction of the order parameter.
    :return: Coordinate of the tip.
    :raises TipNotFoundError: If phi does not change sign along the axis.
    """
    coords = phi.space.dof_coords
    others = [d for d in range(coords.shape[1]) if d != axis]
    on_axis = np.all(np.abs(coords[:, others]) < 1e-12, axis=1) if others else np.ones(len(coords), bool)
    index = np.nonzero(on_axis)[0]
    order = index[np.argsort(coords[index, axis])]
    x, values = coords[order, axis], phi.values[order]
    crossings = np.nonzero((values[:-1] > 0.0) & (values[1:] <= 0.0))[0]
    if len(crossings) == 0:
        raise TipNotFoundError(f"phi does not change sign along axis {axis}")
    k = crossings[-1]
    t = values[k] / (values[k] - values[k + 1])
    return float(x[k] + t * (x[k + 1] - x[k]))


class TipTracker:
    """Tip positions over time; the velocity is the backward difference."""

    def __init__(self, axis=0):
        self.axis = axis
        self.times = []
        self.positions = []

    def update(self, phi, time):
        position = tip_position(phi, self.axis)
        self.times.append(float(time))
        self.positions.append(position)
        return self.velocity

    @property
    def position(self):
        return self.positions[-1] if self.positions else float("nan")

    @property
    def velocity(self):
        if len(self.positions) < 2:
            return float("nan")
        return (self.positions[-1] - self.positions[-2]) / (self.times[-1] - self.times[-2])


def tip_velocity(previous, current, tau, axis=0):
    """Backward-difference velocity of the tip between two phi fields one step apart."""
    return (tip_position(current, axis) - tip_position(previous, axis)) / tau


class DendriteProblem(Problem):
    """
    Growth of one quadrant of a dendrite from a quarter-disk seed at the origin.

    Left and bottom are symmetry lines (zero flux); right and top are far
    field with u fixed to the undercooling.
    """
    name = "dendrite"
    components = ("phi", "u")
    mesh_groups = {"phi": "phi", "u": "u"}
    PARAMETERS = {
        "tau": 1.0, "steps": 500, "D": 1.0, "undercooling": 0.65, "epsilon": 0.05,
        "seed_radius": 10.0, "degree": 1,
    }
    DEFAULT_ADAPT = {
        "phi": {"tol": 0.5, "theta_r": 0.8, "theta_c": 0.2},
        "u": {"tol": 0.25, "theta_r": 0.8, "theta_c": 0.2},
    }
    DIAGNOSTICS = ("tip_position", "tip_velocity", "dof_ratio")

    def __init__(self, macro, parameters=None, **kwargs):
        super().__init__(macro, parameters, **kwargs)
        self.tracker = TipTracker(axis=0)

    @property
    def coupling(self):
        """lambda = D / a2."""
        return self.parameters["D"] / COUPLING_CONSTANT

    def initial_condition(self, component):
        if component == "phi":
            return seed_profile(self.parameters["seed_radius"])
        return -float(self.parameters["undercooling"])

    def assemble_system(self, old):
        p = self.parameters
        tau, eps, lam, D = self.tau, p["epsilon"], self.coupling, p["D"]
        phi_space, u_space = self.spaces["phi"], self.spaces["u"]
        phi_n, u_n = old["phi"], old["u"]
        a = self.assembler

        def mass_coefficient(x, phi):
            return anisotropy(phi.grad, eps) ** 2 / tau + 3.0 * phi.value ** 2 - 1.0

        def stiffness_coefficient(x, phi):
            return anisotropy(phi.grad, eps) ** 2

        def coupling_coefficient(x, phi):
            return lam * (1.0 - phi.value ** 2) ** 2

        def phi_load(x, phi):
            return anisotropy(phi.grad, eps) ** 2 / tau * phi.value + 2.0 * phi.value ** 3

        def flux_load(x, phi):
            return -anisotropy_flux(phi.grad, eps)

        system = BlockSystem({"phi": phi_space, "u": u_space})
        system.add_block("phi", "phi", a.assemble_block(phi_space, phi_space, [
            OperatorTerm(ZERO, FieldCoefficient(mass_coefficient, phi_n), coefficient_degree=4),
            OperatorTerm(SECOND, FieldCoefficient(stiffness_coefficient, phi_n)),
        ]))
        system.add_block("phi", "u", a.assemble_block(phi_space, u_space, [
            OperatorTerm(ZERO, FieldCoefficient(coupling_coefficient, phi_n), coefficient_degree=4),
        ]))
        system.add_rhs("phi", a.assemble_vector(phi_space, [
            LinearTerm(ZERO, FieldCoefficient(phi_load, phi_n), coefficient_degree=3),
            LinearTerm(FIRST, FieldCoefficient(flux_load, phi_n)),
        ]))

        system.add_block("u", "u", a.assemble_block(u_space, u_space, [
            OperatorTerm(ZERO, 1.0 / tau), OperatorTerm(SECOND, D),
        ]))
        system.add_block("u", "phi", a.assemble_block(u_space, phi_space, [
            OperatorTerm(ZERO, -0.5 / tau),
        ]))
        system.add_rhs("u", a.assemble_vector(u_space, [
            LinearTerm(ZERO, FieldCoefficient(lambda x, u: u.value / tau, u_n)),
            LinearTerm(ZERO, FieldCoefficient(lambda x, phi: -0.5 * phi.value / tau, phi_n)),
        ]))
        far_field = [m for m in FAR_FIELD_MARKERS if m in u_space.mesh.macro.markers]
        if far_field:
            system.apply_dirichlet("u", far_field, -float(p["undercooling"]))
        return system

    def diagnostics(self, new, old):
        try:
            velocity = self.tracker.update(new["phi"], self.state.time + self.tau)
            position = self.tracker.position
        except TipNotFoundError as e:
            logger.warning("Step %d: %s", self.state.step + 1, e)
            position, velocity = float("nan"), float("nan")
        ratio = self.spaces["u"].num_dofs / self.spaces["phi"].num_dofs
        return {"tip_position": position, "tip_velocity": velocity, "dof_ratio": ratio}
