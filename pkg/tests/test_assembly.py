import numpy as np
import pytest

from engine.adapt import transfer_matrix
from engine.assembly import (
    FIRST, SECOND, TEST, TRIAL, ZERO, Assembler, AssemblyError, BlockSystem, FEFunction, FESpace,
    FieldCoefficient, LinearTerm, OperatorTerm, assemble_block, assemble_vector, element_matrix,
    transform_element_matrix,
)
from engine.lagrange_basis import get_basis
from engine.multimesh_traverse import union_mesh
from engine.simplicial_mesh import Mesh


def dense(matrix):
    return matrix.toarray()


@pytest.fixture
def two_meshes(square_macro, rng, refine_randomly):
    mesh_a = refine_randomly(Mesh(square_macro), rng, 60)
    mesh_b = refine_randomly(Mesh(square_macro), rng, 60)
    return mesh_a, mesh_b


def test_interval_coupling_mass(unit_interval):
    coarse, fine = Mesh(unit_interval), Mesh(unit_interval)
    fine.bisect(fine.leaf_nodes()[0])
    space_a, space_b = FESpace(coarse, 1), FESpace(fine, 1)
    block = dense(assemble_block(space_a, space_b, [OperatorTerm(ZERO)]))
    rows = np.argsort(space_a.dof_coords[:, 0])
    cols = np.argsort(space_b.dof_coords[:, 0])
    expected = np.array([[5 / 24, 1 / 4, 1 / 24], [1 / 24, 1 / 4, 5 / 24]])
    assert np.allclose(block[np.ix_(rows, cols)], expected, atol=1e-14)


COUPLING_DEGREES = [(1, 1), (2, 2), (3, 3), (4, 4), (1, 2), (2, 3), (1, 4), (3, 1)]
COUPLING_MACROS = {1: ("interval_macro", 12), 2: ("square_macro", 30)}


def coupling_terms(dim):
    return [
        OperatorTerm(ZERO, lambda x: 2.0 + x[..., 0]),
        OperatorTerm(SECOND, 0.5),
        OperatorTerm(FIRST, np.array([1.0, -0.5])[:dim]),
        OperatorTerm(FIRST, np.full(dim, 0.25), derivative_on=TEST),
    ]


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("degree_a, degree_b", COUPLING_DEGREES)
def test_coupling_matches_union_mesh(request, rng, refine_randomly, dim, degree_a, degree_b):
    macro_fixture, max_leaves = COUPLING_MACROS[dim]
    macro = request.getfixturevalue(macro_fixture)
    terms = coupling_terms(dim)
    for _ in range(50):
        mesh_a = refine_randomly(Mesh(macro), rng, max_leaves)
        mesh_b = refine_randomly(Mesh(macro), rng, max_leaves)
        union = union_mesh(mesh_a, mesh_b)
        union_a, union_b = FESpace(union, degree_a), FESpace(union, degree_b)
        space_a, space_b = FESpace(mesh_a, degree_a), FESpace(mesh_b, degree_b)
        coupled = dense(assemble_block(space_a, space_b, terms))
        oracle = dense(transfer_matrix(space_a, union_a).T @ assemble_block(union_a, union_b, terms)
                       @ transfer_matrix(space_b, union_b))
        assert np.abs(coupled - oracle).max() <= 1e-12 * max(1.0, np.abs(oracle).max())


def test_load_vector_matches_union_mesh(two_meshes):
    mesh_a, mesh_b = two_meshes
    space_a, space_b = FESpace(mesh_a, 2), FESpace(mesh_b, 2)
    space_u = FESpace(union_mesh(mesh_a, mesh_b), 2)
    data = space_b.interpolate(lambda x: np.sin(3 * x[:, 0]) * x[:, 1])
    on_union = transfer_matrix(space_b, space_u) @ data.values
    data_u = FEFunction(space_u, on_union)
    coupled = assemble_vector(space_a, [LinearTerm(ZERO, data)])
    oracle = transfer_matrix(space_a, space_u).T @ assemble_vector(space_u, [LinearTerm(ZERO, data_u)])
    assert np.allclose(coupled, oracle, atol=1e-12)


def test_identical_meshes_match_single_mesh(square_mesh, rng, refine_randomly):
    refine_randomly(square_mesh, rng, 50)
    space = FESpace(square_mesh, 2)
    twin = FESpace(square_mesh.copy(), 2)
    terms = [OperatorTerm(ZERO), OperatorTerm(SECOND)]
    assert np.allclose(dense(assemble_block(space, twin, terms)), dense(assemble_block(space, space, terms)),
                       atol=1e-14)


def test_coupling_is_symmetric(two_meshes):
    mesh_a, mesh_b = two_meshes
    space_a, space_b = FESpace(mesh_a, 1), FESpace(mesh_b, 2)
    terms = [OperatorTerm(ZERO), OperatorTerm(SECOND)]
    ab = dense(assemble_block(space_a, space_b, terms))
    ba = dense(assemble_block(space_b, space_a, terms))
    assert np.allclose(ab, ba.T, atol=1e-13)


def test_mass_and_stiffness_invariants(two_meshes):
    mesh_a, mesh_b = two_meshes
    space_a, space_b = FESpace(mesh_a, 2), FESpace(mesh_b, 1)
    ones_a, ones_b = np.ones(space_a.num_dofs), np.ones(space_b.num_dofs)
    mass = assemble_block(space_a, space_b, [OperatorTerm(ZERO)])
    stiffness = assemble_block(space_a, space_b, [OperatorTerm(SECOND)])
    assert ones_a @ mass @ ones_b == pytest.approx(1.0)
    assert np.allclose(stiffness @ ones_b, 0.0, atol=1e-12)


def test_transform_element_matrix_sides(rng):
    M = rng.normal(size=(3, 3))
    C = rng.normal(size=(3, 3))
    assert np.allclose(transform_element_matrix(M, C, TEST), C @ M)
    assert np.allclose(transform_element_matrix(M, C, TRIAL), M @ C.T)
    with pytest.raises(AssemblyError):
        transform_element_matrix(M, C, "both")


def test_element_mass_matrix(square_mesh):
    info = square_mesh.element_info(square_mesh.roots[0])
    basis = get_basis(2, 1)
    local = element_matrix(OperatorTerm(ZERO), info, basis, basis)
    expected = info.volume / 12.0 * (np.ones((3, 3)) + np.eye(3))
    assert np.allclose(local, expected)


def test_field_coefficient_on_other_mesh(two_meshes):
    mesh_a, mesh_b = two_meshes
    space_a, space_b = FESpace(mesh_a, 1), FESpace(mesh_b, 1)
    linear = space_b.interpolate(lambda x: 1.0 + 2.0 * x[:, 0] - x[:, 1])
    coefficient = FieldCoefficient(lambda x, u: 3.0 * u.value + u.grad[..., 0], linear)
    from_field = assemble_vector(space_a, [LinearTerm(ZERO, coefficient, coefficient_degree=1)])
    analytic = assemble_vector(space_a, [LinearTerm(ZERO, lambda x: 3.0 * (1.0 + 2.0 * x[..., 0] - x[..., 1]) + 2.0)])
    assert np.allclose(from_field, analytic, atol=1e-12)


def test_third_mesh_coefficient_rejected(two_meshes, square_macro):
    mesh_a, mesh_b = two_meshes
    third = FESpace(Mesh(square_macro), 1).interpolate(1.0)
    with pytest.raises(AssemblyError, match="third mesh"):
        assemble_block(FESpace(mesh_a, 1), FESpace(mesh_b, 1), [OperatorTerm(ZERO, third)])


def test_stale_space_rejected(square_mesh):
    space = FESpace(square_mesh, 1)
    square_mesh.bisect(square_mesh.leaf_nodes()[0])
    assert not space.is_current
    with pytest.raises(AssemblyError, match="stale"):
        Assembler().assemble_block(space, space, [OperatorTerm(ZERO)])


def test_cache_shared_across_blocks(two_meshes):
    mesh_a, mesh_b = two_meshes
    assembler = Assembler()
    space_a, space_b = FESpace(mesh_a, 1), FESpace(mesh_b, 1)
    assembler.assemble_block(space_a, space_b, [OperatorTerm(ZERO)])
    misses = assembler.cache.misses
    assembler.assemble_block(space_b, space_a, [OperatorTerm(ZERO)])
    assert assembler.cache.misses == misses


# --- Spaces and functions ---

def test_space_dof_counts(square_mesh):
    square_mesh.refine_uniform(2)
    assert FESpace(square_mesh, 1).num_dofs == 13
    assert FESpace(square_mesh, 2).num_dofs == 41


def test_interpolation_and_evaluation(square_mesh):
    square_mesh.refine_uniform(3)
    space = FESpace(square_mesh, 2)
    u = space.interpolate(lambda x: x[:, 0] ** 2 - x[:, 0] * x[:, 1])
    points = np.array([[0.3, 0.2], [0.77, 0.5], [2.0, 2.0]])
    values = u.evaluate(points)
    assert np.allclose(values[:2], points[:2, 0] ** 2 - points[:2, 0] * points[:2, 1])
    assert np.isnan(values[2])
    assert np.allclose(u.gradient(points[:1]), [[0.6 - 0.2, -0.3]])
    assert u.integrate() == pytest.approx(1 / 3 - 1 / 4)


def test_boundary_dofs_by_marker(square_mesh):
    square_mesh.refine_uniform(2)
    space = FESpace(square_mesh, 1)
    bottom = space.boundary_dofs(1)
    assert np.allclose(space.dof_coords[bottom, 1], 0.0)
    assert len(bottom) == 3
    assert len(space.boundary_dofs()) == 8
    with pytest.raises(AssemblyError, match="Unknown boundary marker"):
        space.boundary_dofs(7)


# --- Block systems ---

def test_dirichlet_later_call_wins(square_mesh):
    square_mesh.refine_uniform(2)
    space = FESpace(square_mesh, 1)
    system = BlockSystem({"u": space})
    system.add_block("u", "u", space.stiffness_matrix())
    system.apply_dirichlet("u", [1], 0.0)
    system.apply_dirichlet("u", [2], 5.0)
    A, b = system.assemble()
    corner = int(np.argmin(np.linalg.norm(space.dof_coords - [1.0, 0.0], axis=1)))
    assert b[corner] == pytest.approx(5.0)
    assert A[corner, corner] == pytest.approx(1.0)
    assert A.getrow(corner).nnz == 1


def test_dirichlet_keeps_symmetry(square_mesh):
    square_mesh.refine_uniform(2)
    space = FESpace(square_mesh, 2)
    system = BlockSystem({"u": space})
    system.add_block("u", "u", space.stiffness_matrix())
    system.add_rhs("u", space.lumped_mass())
    system.apply_dirichlet("u", None, lambda x: x[:, 0])
    A, _ = system.assemble()
    assert abs(A - A.T).max() < 1e-14


def test_block_shape_checked(square_mesh):
    p1, p2 = FESpace(square_mesh, 1), FESpace(square_mesh, 2)
    system = BlockSystem({"u": p1, "v": p2})
    with pytest.raises(AssemblyError, match="shape"):
        system.add_block("u", "v", p1.mass_matrix())


def test_split_and_initial_guess(square_mesh):
    p1, p2 = FESpace(square_mesh, 1), FESpace(square_mesh, 2)
    system = BlockSystem({"u": p1, "v": p2})
    x = np.arange(p1.num_dofs + p2.num_dofs, dtype=float)
    parts = system.split(x)
    assert np.array_equal(parts["u"].values, x[:p1.num_dofs])
    assert np.array_equal(system.initial_guess(parts), x)
