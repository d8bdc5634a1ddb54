import numpy as np
import pytest
from scipy import io, sparse

from engine.assembly import FIRST, SECOND, BlockSystem, FESpace, OperatorTerm, assemble_block
from engine.linalg import (
    DiagonalPreconditioner, SolverBreakdown, SolverConfig, SolverError, ZeroPivotWarning,
    apply_precond, bicgstab_ell, build_ilu0, direct_lu, export_matrix, make_preconditioner, solve,
)


def poisson_system(mesh, convection=None):
    space = FESpace(mesh, 1)
    system = BlockSystem({"u": space})
    terms = [OperatorTerm(SECOND)]
    if convection is not None:
        terms.append(OperatorTerm(FIRST, np.asarray(convection)))
    system.add_block("u", "u", assemble_block(space, space, terms))
    system.add_rhs("u", space.lumped_mass())
    system.apply_dirichlet("u", None, 0.0)
    return system.assemble()


@pytest.fixture
def poisson(square_mesh):
    return poisson_system(square_mesh.refine_uniform(6))


def test_identity_takes_one_iteration(rng):
    b = rng.normal(size=20)
    result = bicgstab_ell(sparse.identity(20, format="csr"), b)
    assert result.converged
    assert result.iterations == 1
    assert np.allclose(result.x, b)


def test_zero_rhs_returns_zero():
    result = solve(sparse.identity(5, format="csr"), np.zeros(5))
    assert result.iterations == 0
    assert np.array_equal(result.x, np.zeros(5))


@pytest.mark.parametrize("preconditioner", ["none", "diagonal", "ilu0"])
@pytest.mark.parametrize("ell", [1, 2, 4])
def test_bicgstab_matches_direct(poisson, preconditioner, ell):
    A, b = poisson
    reference = direct_lu(A, b).x
    result = solve(A, b, config=SolverConfig(ell=ell, tol=1e-10, preconditioner=preconditioner))
    assert result.converged
    assert result.residual < 1e-8
    assert np.allclose(result.x, reference, rtol=1e-6, atol=1e-10)


def test_nonsymmetric_system(square_mesh):
    A, b = poisson_system(square_mesh.refine_uniform(5), convection=[20.0, -10.0])
    result = solve(A, b, config=SolverConfig(preconditioner="ilu0", tol=1e-10))
    assert result.converged
    assert np.allclose(result.x, direct_lu(A, b).x, rtol=1e-6, atol=1e-10)


def test_ilu0_reduces_iterations(poisson):
    A, b = poisson
    plain = solve(A, b, config=SolverConfig(preconditioner="none"))
    ilu = solve(A, b, config=SolverConfig(preconditioner="ilu0"))
    assert ilu.iterations < plain.iterations


def test_ilu0_is_exact_for_tridiagonal():
    A = sparse.diags([[-1.0] * 9, [2.5] * 10, [-1.0] * 9], [-1, 0, 1], format="csr")
    P = build_ilu0(A)
    r = np.linspace(0.0, 1.0, 10)
    assert np.allclose(A @ apply_precond(P, r), r)


def test_ilu0_zero_pivot_warns():
    A = sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.warns(ZeroPivotWarning):
        P = build_ilu0(A)
    assert P.shifted == 1


def test_diagonal_preconditioner_rejects_zero_diagonal():
    A = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]]))
    with pytest.raises(SolverError, match="zero diagonal"):
        DiagonalPreconditioner(A)
    with pytest.raises(SolverError):
        make_preconditioner(A, "diagonal")


def test_breakdown_reports_history():
    A = sparse.csr_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    with pytest.raises(SolverBreakdown) as info:
        solve(A, np.array([1.0, 0.0]), config=SolverConfig(preconditioner="none"))
    assert info.value.history == [1.0]


def test_iteration_cap_reports_not_converged(poisson):
    A, b = poisson
    result = solve(A, b, config=SolverConfig(max_iter=2, preconditioner="none"))
    assert not result.converged
    assert result.iterations == 2


def test_shape_mismatch():
    with pytest.raises(SolverError, match="Shape mismatch"):
        solve(sparse.identity(3, format="csr"), np.ones(4))


@pytest.mark.parametrize("kwargs", [{"method": "cg"}, {"preconditioner": "amg"}, {"ell": 0}, {"tol": -1.0}])
def test_solver_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_export_matrix(tmp_path, poisson):
    A, _ = poisson
    path = tmp_path / "system.mtx"
    export_matrix(A, path)
    assert abs(sparse.csr_matrix(io.mmread(str(path))) - A).max() == pytest.approx(0.0)
