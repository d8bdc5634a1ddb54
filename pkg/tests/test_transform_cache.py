import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from engine.lagrange_basis import get_basis
from engine.multimesh_traverse import tra
from engine.refinement_sequence import EMPTY_SEQUENCE, RefinementSequence
from engine.simplicial_mesh import Mesh
from engine.transform_cache import MatrixCache, cache_stats, child_matrix, compose, gradient_matrix

DIM_DEGREES = [(dim, degree) for dim in (1, 2) for degree in (1, 2, 3, 4)]


def random_sequence(rng, max_length=12):
    length = int(rng.integers(0, max_length + 1))
    return RefinementSequence.from_steps(rng.integers(0, 2, size=length).tolist())


def test_empty_sequence_is_identity():
    assert np.array_equal(compose(MatrixCache(), 2, 3, EMPTY_SEQUENCE), np.eye(10))


def test_p1_interval_left():
    assert np.allclose(child_matrix(1, 1, "L"), [[1.0, 0.5], [0.0, 0.5]])


def test_p1_triangle_left():
    # child nodes (v2, v0, m) of the parent (v0, v1, v2)
    expected = [[0.0, 1.0, 0.5], [0.0, 0.0, 0.5], [1.0, 0.0, 0.0]]
    assert np.allclose(child_matrix(2, 1, "L"), expected)


def test_matrices_are_read_only():
    matrix = compose(MatrixCache(), 2, 2, RefinementSequence.from_steps("LR"))
    with pytest.raises(ValueError):
        matrix[0, 0] = 1.0


@pytest.mark.parametrize("dim,degree", DIM_DEGREES)
def test_composition_law(dim, degree, rng):
    cache = MatrixCache()
    for _ in range(200 // len(DIM_DEGREES)):
        s1, s2 = random_sequence(rng), random_sequence(rng)
        joined = compose(cache, dim, degree, s1.concat(s2))
        split = compose(cache, dim, degree, s1) @ compose(cache, dim, degree, s2)
        assert np.allclose(joined, split, atol=1e-10)


@pytest.mark.parametrize("dim,degree", DIM_DEGREES)
def test_columns_sum_to_one(dim, degree, rng):
    cache = MatrixCache()
    for _ in range(10):
        matrix = compose(cache, dim, degree, random_sequence(rng))
        assert np.allclose(matrix.sum(axis=0), 1.0, atol=1e-10)


@pytest.mark.parametrize("degree", [1, 2, 3, 4])
def test_polynomial_reproduction(degree, square_mesh, rng):
    basis = get_basis(2, degree)
    element = square_mesh.element_info(square_mesh.roots[2])

    def poly(points):
        x, y = points[:, 0], points[:, 1]
        return (1.0 + x - 2.0 * y) ** degree + x * y ** (degree - 1)

    coarse_values = poly(basis.nodes @ element.vertex_coords)
    cache = MatrixCache()
    for _ in range(10):
        sequence = random_sequence(rng, 8)
        fine = tra(element, sequence)
        fine_values = poly(basis.nodes @ fine.vertex_coords)
        matrix = compose(cache, 2, degree, sequence)
        assert np.allclose(matrix.T @ coarse_values, fine_values, atol=1e-9)


def test_gradient_matrix_matches_value_matrix():
    cache = MatrixCache()
    sequence = RefinementSequence.from_steps("RLL")
    assert gradient_matrix(cache, 2, 2, sequence) is compose(cache, 2, 2, sequence)


def test_interval_reproduction(unit_interval):
    mesh = Mesh(unit_interval)
    element = mesh.element_info(mesh.roots[0])
    basis = get_basis(1, 3)
    sequence = RefinementSequence.from_steps("RRL")
    fine = tra(element, sequence)
    cubic = lambda x: x ** 3 - 2 * x + 1
    coarse_values = cubic(basis.nodes @ element.vertex_coords[:, 0])
    fine_values = cubic(basis.nodes @ fine.vertex_coords[:, 0])
    assert np.allclose(compose(MatrixCache(), 1, 3, sequence).T @ coarse_values, fine_values)


def test_cache_memoizes_prefixes():
    cache = MatrixCache()
    sequence = RefinementSequence.from_steps("LRLR")
    first = compose(cache, 2, 2, sequence)
    assert cache_stats(cache) == (4, 0, 4)
    again = compose(cache, 2, 2, sequence)
    assert again is first
    entries, hits, misses = cache_stats(cache)
    assert (entries, hits, misses) == (4, 1, 4)
    compose(cache, 2, 2, sequence.prefix(2))
    assert cache.hits == 2
    cache.clear()
    assert cache_stats(cache) == (0, 0, 0)


def test_keys_separate_degrees():
    cache = MatrixCache()
    sequence = RefinementSequence.from_steps("RR")
    assert compose(cache, 2, 1, sequence).shape == (3, 3)
    assert compose(cache, 2, 2, sequence).shape == (6, 6)
    assert len(cache) == 4


def test_counters_exact_under_threads():
    cache = MatrixCache()
    sequences = [RefinementSequence.from_steps(s) for s in ("L", "R", "LR", "RLL", "LRLR")]
    for sequence in sequences:
        compose(cache, 2, 2, sequence)
    entries, hits, misses = cache_stats(cache)
    rounds = 2000

    def lookup(sequence):
        for _ in range(rounds):
            compose(cache, 2, 2, sequence)

    interval = sys.getswitchinterval()
    sys.setswitchinterval(1e-6)
    try:
        with ThreadPoolExecutor(max_workers=len(sequences)) as pool:
            list(pool.map(lookup, sequences))
    finally:
        sys.setswitchinterval(interval)
    assert cache_stats(cache) == (entries, hits + rounds * len(sequences), misses)
