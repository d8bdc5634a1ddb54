"""
Cahn-Hilliard equation split into concentration phi and chemical potential mu.

    phi_t = Laplace mu
    mu    = -eps Laplace phi + G'(phi) / eps,   G(phi) = 18 phi^2 (1 - phi)^2

The double-well derivative is linearized around the previous step, which
keeps every step a single linear solve and conserves the phi integral.
"""
import logging

import numpy as np

from .assembly import SECOND, ZERO, BlockSystem, FieldCoefficient, LinearTerm, OperatorTerm
from .lagrange_basis import get_quadrature
from .timestepping import Problem

logger = logging.getLogger(__name__)

# --- Configuration ---
NOISE_LOW = 0.45
NOISE_HIGH = 0.55


def double_well(phi):
    return 18.0 * phi ** 2 * (1.0 - phi) ** 2


def double_well_prime(phi):
    return 36.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)


def double_well_second(phi):
    return 36.0 * (1.0 - 6.0 * phi + 6.0 * phi ** 2)


def free_energy(phi, epsilon):
    """int eps/2 |grad phi|^2 + G(phi) / eps."""
    space = phi.space
    gradient_part = 0.5 * epsilon * float(phi.values @ (space.stiffness_matrix() @ phi.values))
    rule = get_quadrature(space.dim, min(4 * space.degree, 8))
    values = phi.local_coefficients() @ space.basis.values(rule.points).T
    dx = rule.weights[None, :] * (space.volumes * np.prod(np.arange(1, space.dim + 1)))[:, None]
    return gradient_part + float(np.sum(dx * double_well(values))) / epsilon


class CahnHilliardProblem(Problem):
    """Spinodal decomposition from a uniformly perturbed mixture."""
    name = "cahn_hilliard"
    components = ("phi", "mu")
    mesh_groups = {"phi": "phi", "mu": "mu"}
    conserved = ("phi",)
    PARAMETERS = {"tau": 1e-4, "steps": 200, "epsilon": 0.02, "degree": 2}
    DEFAULT_ADAPT = {
        "phi": {"tol": 2.5e-2, "start_step": 10},
        "mu": {"tol": 5.0, "start_step": 10},
    }
    DIAGNOSTICS = ("mass", "energy")

    def initial_condition(self, component):
        if component == "mu":
            return 0.0
        return lambda x: self.rng.uniform(NOISE_LOW, NOISE_HIGH, size=len(x))

    def assemble_system(self, old):
        tau, eps = self.tau, self.parameters["epsilon"]
        phi_space, mu_space = self.spaces["phi"], self.spaces["mu"]
        phi_n = old["phi"]
        a = self.assembler

        system = BlockSystem({"phi": phi_space, "mu": mu_space})
        system.add_block("phi", "phi", a.assemble_block(phi_space, phi_space, [OperatorTerm(ZERO, 1.0 / tau)]))
        system.add_block("phi", "mu", a.assemble_block(phi_space, mu_space, [OperatorTerm(SECOND)]))
        system.add_rhs("phi", a.assemble_vector(phi_space, [
            LinearTerm(ZERO, FieldCoefficient(lambda x, phi: phi.value / tau, phi_n)),
        ]))

        system.add_block("mu", "mu", a.assemble_block(mu_space, mu_space, [OperatorTerm(ZERO)]))
        system.add_block("mu", "phi", a.assemble_block(mu_space, phi_space, [
            OperatorTerm(SECOND, -eps),
            OperatorTerm(ZERO, FieldCoefficient(lambda x, phi: -double_well_second(phi.value) / eps, phi_n),
                         coefficient_degree=2 * phi_space.degree),
        ]))
        system.add_rhs("mu", a.assemble_vector(mu_space, [
            LinearTerm(ZERO, FieldCoefficient(
                lambda x, phi: (double_well_prime(phi.value) - double_well_second(phi.value) * phi.value) / eps,
                phi_n), coefficient_degree=3 * phi_space.degree),
        ]))
        return system

    def diagnostics(self, new, old):
        phi = new["phi"]
        return {"mass": phi.integrate(), "energy": free_energy(phi, self.parameters["epsilon"])}
