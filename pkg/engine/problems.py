"""
Registry of the problem drivers and the step functions they expose.
"""
import logging

from .biharmonic import BiharmonicProblem, biharmonic_solve, manufactured_solution
from .cahn_hilliard import CahnHilliardProblem
from .dendrite import DendriteProblem, TipNotFoundError, TipTracker, tip_position, tip_velocity
from .navier_stokes import Eddy, NavierStokesProblem, divergence_norm, locate_eddies
from .timestepping import MODES, MULTI, SINGLE, Problem, ProblemState

logger = logging.getLogger(__name__)

PROBLEMS = {
    cls.name: cls
    for cls in (BiharmonicProblem, DendriteProblem, CahnHilliardProblem, NavierStokesProblem)
}

__all__ = [
    "MODES", "MULTI", "PROBLEMS", "SINGLE", "Eddy", "Problem", "ProblemState", "TipNotFoundError",
    "TipTracker", "biharmonic_solve", "cahn_hilliard_step", "dendrite_step", "divergence_norm",
    "get_problem_class", "locate_eddies", "manufactured_solution", "navier_stokes_step",
    "tip_position", "tip_velocity",
]


def get_problem_class(name):
    try:
        return PROBLEMS[name]
    except KeyError:
        raise ValueError(f"Unknown problem {name!r}; expected one of {sorted(PROBLEMS)}") from None


def _step(problem, expected):
    if not isinstance(problem, expected):
        raise TypeError(f"Expected a {expected.__name__}, got {type(problem).__name__}")
    problem.advance()
    return problem.state


def dendrite_step(problem):
    """Advances a DendriteProblem by one timestep; returns the new ProblemState."""
    return _step(problem, DendriteProblem)


def cahn_hilliard_step(problem):
    return _step(problem, CahnHilliardProblem)


def navier_stokes_step(problem):
    return _step(problem, NavierStokesProblem)
