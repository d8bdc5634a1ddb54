import math

import numpy as np
import pytest

from engine.lagrange_basis import (
    QuadratureError, barycentric_gradients, default_quadrature_order, eval_basis, eval_grad_basis,
    facet_points, get_basis, get_quadrature, physical_laplacians, sub_simplices,
)

REFERENCE_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
ALL_BASES = [(dim, degree) for dim in (1, 2) for degree in (1, 2, 3, 4)]


def random_bary(rng, dim, count):
    return rng.dirichlet(np.ones(dim + 1), size=count)


def test_p1_triangle_midpoint():
    values = eval_basis(get_basis(2, 1), [1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(values, 1 / 3)


@pytest.mark.parametrize("dim,degree", ALL_BASES)
def test_nodal_property(dim, degree):
    basis = get_basis(dim, degree)
    assert basis.n == math.comb(degree + dim, dim)
    assert np.allclose(basis.values(basis.nodes), np.eye(basis.n), atol=1e-12)


@pytest.mark.parametrize("dim,degree", ALL_BASES)
def test_partition_of_unity(dim, degree, rng):
    basis = get_basis(dim, degree)
    points = random_bary(rng, dim, 25)
    assert np.allclose(basis.values(points).sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("dim,degree", ALL_BASES)
def test_gradients_sum_to_zero(dim, degree, rng):
    basis = get_basis(dim, degree)
    coords = REFERENCE_TRIANGLE if dim == 2 else np.array([[0.2], [0.7]])
    for point in random_bary(rng, dim, 5):
        grads = eval_grad_basis(basis, coords, point)
        assert grads.shape == (basis.n, dim)
        assert np.allclose(grads.sum(axis=0), 0.0, atol=1e-10)


def test_p2_interval_values():
    basis = get_basis(1, 2)
    values = eval_basis(basis, [0.75, 0.25])
    assert values[basis.node_index((2, 0))] == pytest.approx(0.375)
    assert values[basis.node_index((0, 2))] == pytest.approx(-0.125)
    assert values[basis.node_index((1, 1))] == pytest.approx(0.75)


def test_node_order_vertices_first():
    basis = get_basis(2, 2)
    assert basis.multi_indices[:3] == [(2, 0, 0), (0, 2, 0), (0, 0, 2)]
    assert basis.multi_indices[3:] == [(1, 1, 0), (0, 1, 1), (1, 0, 1)]


def test_p1_gradients_on_half_interval():
    grads = eval_grad_basis(get_basis(1, 1), np.array([[0.0], [0.5]]), [0.5, 0.5])
    assert np.allclose(grads[:, 0], [-2.0, 2.0])


def test_reference_triangle_gradients():
    grads = barycentric_gradients(REFERENCE_TRIANGLE)
    assert np.allclose(grads, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def test_degenerate_element_rejected():
    with pytest.raises(ValueError, match="Degenerate"):
        barycentric_gradients(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))


def test_p2_second_derivatives_on_unit_interval():
    basis = get_basis(1, 2)
    grad_lambda = barycentric_gradients(np.array([[0.0], [1.0]]))[None]
    lap = physical_laplacians(basis, grad_lambda, np.array([[0.3, 0.7]]))[0, 0]
    expected = np.zeros(3)
    expected[basis.node_index((2, 0))] = 4.0
    expected[basis.node_index((0, 2))] = 4.0
    expected[basis.node_index((1, 1))] = -8.0
    assert np.allclose(lap, expected)


# --- Quadrature ---

@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("order", range(9))
def test_weights_sum_to_reference_measure(dim, order):
    rule = get_quadrature(dim, order)
    assert rule.weights.sum() == pytest.approx(1.0 / math.factorial(dim))
    assert np.allclose(rule.points.sum(axis=1), 1.0)


@pytest.mark.parametrize("order", range(9))
def test_interval_monomials_exact(order):
    rule = get_quadrature(1, order)
    x = rule.points[:, 1]
    for a in range(order + 1):
        assert rule.weights @ x ** a == pytest.approx(1.0 / (a + 1), abs=1e-13)


@pytest.mark.parametrize("order", range(9))
def test_triangle_monomials_exact(order):
    rule = get_quadrature(2, order)
    x, y = rule.points[:, 1], rule.points[:, 2]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert rule.weights @ (x ** a * y ** b) == pytest.approx(exact, abs=1e-13)


def test_order_nine_unavailable():
    with pytest.raises(QuadratureError):
        get_quadrature(2, 9)


def test_default_order_is_capped():
    assert default_quadrature_order(1, 1) == 3
    assert default_quadrature_order(4, 4, 2) == 8


@pytest.mark.parametrize("k", range(3))
def test_facet_points_lie_on_facet(k):
    points, weights = facet_points(2, 3, k)
    assert np.allclose(points[:, k], 0.0)
    assert weights.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("dim,degree", ALL_BASES)
def test_sub_simplices_tile_the_reference_element(dim, degree):
    basis = get_basis(dim, degree)
    cells = sub_simplices(dim, degree)
    assert len(cells) == degree ** dim
    total = 0.0
    for cell in cells:
        nodes = basis.nodes[list(cell)][:, 1:]
        jac = (nodes[1:] - nodes[0]).T
        volume = np.linalg.det(jac) / math.factorial(dim)
        assert volume > 0
        total += volume
    assert total == pytest.approx(1.0 / math.factorial(dim))
