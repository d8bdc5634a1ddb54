import io
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from engine.simplicial_mesh import (
    MAX_LEVEL, DepthLimitError, MacroMesh, MacroParseError, Mesh, MeshError, _edge_key, bisect,
    child_coordinates, coarsen, load_macro_mesh, traverse,
)

MACRO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "macro")


def read_square_text():
    with open(os.path.join(MACRO_DIR, "square4.macro"), encoding="utf-8") as f:
        return f.read()


def hanging_nodes(mesh):
    """Brute force: leaf vertices lying strictly inside an edge of another leaf."""
    infos = list(mesh.iter_elements())
    points = np.unique(np.vstack([info.vertex_coords for info in infos]).round(14), axis=0)
    found = 0
    for info in infos:
        c = info.vertex_coords
        for i, j in ((0, 1), (1, 2), (2, 0)):
            a, d = c[i], c[j] - c[i]
            rel = points - a
            t = rel @ d / (d @ d)
            cross = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0])
            found += int(np.sum((cross < 1e-12) & (t > 1e-9) & (t < 1.0 - 1e-9)))
    return found


# --- Macro meshes ---

def test_load_square_macro(square_macro):
    assert square_macro.num_elements == 4
    assert square_macro.num_vertices == 5
    assert square_macro.markers == [1, 2, 3, 4]
    assert square_macro.total_volume() == pytest.approx(1.0, abs=1e-14)


def test_load_interval_macro(interval_macro):
    assert interval_macro.dim == 1
    assert interval_macro.num_vertices == 3
    assert interval_macro.num_elements == 2
    assert interval_macro.markers == [1, 2]


def test_refinement_edge_is_first_edge(square_macro):
    # T0 and T1 share the refinement edge between vertices 1 and 4
    edges = [tuple(sorted(e)) for e in square_macro.refinement_edge.tolist()]
    assert edges == [(1, 4), (1, 4), (3, 4), (3, 4)]


def test_non_reciprocal_neighbours_rejected():
    text = read_square_text().replace("NEIGHBOURS\n1 3 -1\n2 0 -1", "NEIGHBOURS\n1 3 -1\n2 -1 -1")
    with pytest.raises(MeshError, match="Non-reciprocal"):
        load_macro_mesh(io.StringIO(text))


def test_parse_error_reports_line():
    with pytest.raises(MacroParseError) as info:
        load_macro_mesh(io.StringIO("DIM\n2\nVERTICES\n0.0 zero\n"))
    assert info.value.line == 4


def test_negative_volume_rejected():
    with pytest.raises(MeshError, match="non-positive volume"):
        MacroMesh.from_arrays(2, [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 2, 1]])


def test_missing_optional_sections_are_derived():
    macro = load_macro_mesh(io.StringIO("DIM\n1\nVERTICES\n0\n1\nELEMENTS\n0 1\n"))
    assert macro.markers == [1]
    assert macro.neighbours.tolist() == [[-1, -1]]


def test_scaled_macro_keeps_topology(square_macro):
    big = square_macro.scaled(200.0)
    assert big.total_volume() == pytest.approx(40000.0)
    assert np.array_equal(big.elements, square_macro.elements)


# --- Bisection ---

def test_bisect_propagates_to_refinement_edge_neighbour(square_mesh):
    created = bisect(square_mesh, square_mesh.leaf_nodes()[0])
    assert square_mesh.num_leaves == 6
    assert len(created) == 4
    assert square_mesh.is_conforming()


def test_bisect_1d_never_propagates(interval_macro):
    mesh = Mesh(interval_macro)
    created = mesh.bisect(mesh.leaf_nodes()[0])
    assert len(created) == 2
    assert mesh.num_leaves == 3


def test_bisect_rejects_non_leaf(square_mesh):
    root = square_mesh.roots[0]
    square_mesh.bisect(root)
    with pytest.raises(MeshError):
        square_mesh.bisect(root)


def test_repeated_refinement_stays_conforming(square_mesh):
    for _ in range(12):
        leaf = next(n for n in square_mesh.leaf_nodes() if n.macro_index == 0)
        square_mesh.bisect(leaf)
        assert hanging_nodes(square_mesh) == 0
        assert square_mesh.is_conforming()


def test_uniform_refinement_counts(square_mesh):
    square_mesh.refine_uniform(2)
    assert square_mesh.num_leaves == 16
    assert square_mesh.max_leaf_level() == 2


def test_depth_cap(unit_interval):
    mesh = Mesh(unit_interval)
    for _ in range(64):
        mesh.bisect(mesh.leaf_nodes()[0])
    assert mesh.max_leaf_level() == 64
    with pytest.raises(DepthLimitError):
        mesh.bisect(mesh.leaf_nodes()[0])


def test_depth_cap_on_neighbour_leaves_mesh_untouched(square_mesh):
    mesh = square_mesh
    for node in mesh.roots:
        neighbour = mesh._neighbour(node, _edge_key(*node.vertices[:2]))
        if neighbour is not None:
            break
    assert neighbour is not None
    before, revision = mesh.signature(), mesh.revision
    neighbour.level = MAX_LEVEL
    try:
        with pytest.raises(DepthLimitError):
            mesh.bisect(node)
    finally:
        neighbour.level = 0
    assert node.is_leaf and neighbour.is_leaf
    assert mesh.revision == revision
    assert mesh.signature() == before
    assert mesh.is_conforming()


# --- Coarsening ---

def test_coarsen_restores_macro_mesh(square_mesh):
    original = square_mesh.signature()
    square_mesh.bisect(square_mesh.leaf_nodes()[0])
    assert coarsen(square_mesh, square_mesh.leaf_nodes()[0]) is True
    assert square_mesh.num_leaves == 4
    assert square_mesh.signature() == original


def test_coarsen_refused_when_sibling_refined(square_mesh):
    square_mesh.bisect(square_mesh.leaf_nodes()[0])
    square_mesh.bisect(square_mesh.leaf_nodes()[0])
    before = square_mesh.num_leaves
    candidate = next(n for n in square_mesh.leaf_nodes()
                     if n.parent is not None and any(not c.is_leaf for c in n.parent.children))
    assert square_mesh.coarsen(candidate) is False
    assert square_mesh.num_leaves == before


def test_coarsen_refused_on_macro_element(square_mesh):
    assert square_mesh.coarsen(square_mesh.leaf_nodes()[0]) is False


def test_refine_then_coarsen_1d_is_identity(interval_macro):
    mesh = Mesh(interval_macro)
    original = mesh.signature()
    mesh.bisect(mesh.leaf_nodes()[1])
    assert mesh.coarsen(mesh.leaf_nodes()[1])
    assert mesh.signature() == original


def random_operations(mesh, rng, count):
    for _ in range(count):
        leaves = mesh.leaf_nodes()
        node = leaves[int(rng.integers(len(leaves)))]
        if mesh.num_leaves < 300 and rng.random() < 0.6:
            mesh.bisect(node)
        else:
            mesh.coarsen(node)


def test_random_refine_coarsen_keeps_conformity(square_mesh, rng):
    for _ in range(20):
        random_operations(square_mesh, rng, 100)
        assert square_mesh.is_conforming()
        assert square_mesh.total_volume() == pytest.approx(1.0, rel=1e-12)
    assert hanging_nodes(square_mesh) == 0


@pytest.mark.slow
def test_ten_thousand_random_operations(square_mesh, rng):
    for _ in range(100):
        random_operations(square_mesh, rng, 100)
        assert square_mesh.is_conforming()
    assert hanging_nodes(square_mesh) == 0
    assert square_mesh.total_volume() == pytest.approx(1.0, rel=1e-12)


# --- Traverse ---

def test_traverse_unrefined(square_macro, square_mesh):
    seen = []
    traverse(square_mesh, "leaf", seen.append)
    assert len(seen) == 4
    for i, info in enumerate(seen):
        assert info.macro_index == i
        assert np.array_equal(info.vertex_coords, square_macro.element_coordinates(i))


def test_traverse_fixed_level(square_mesh):
    square_mesh.refine_uniform(2)
    seen = []
    traverse(square_mesh, 1, seen.append)
    assert len(seen) == 8
    assert all(info.level == 1 for info in seen)


def test_leaf_volumes_sum_to_domain(square_mesh, rng, refine_randomly):
    refine_randomly(square_mesh, rng, 150)
    total = sum(info.volume for info in square_mesh.iter_elements())
    assert total == pytest.approx(1.0, abs=1e-12)


def test_traverse_is_deterministic(square_mesh, rng, refine_randomly):
    refine_randomly(square_mesh, rng, 80)
    assert square_mesh.signature() == square_mesh.signature()


def test_geometry_replay(square_macro, square_mesh, rng, refine_randomly):
    refine_randomly(square_mesh, rng, 120)
    for info in square_mesh.iter_elements():
        coords = square_macro.element_coordinates(info.macro_index)
        for step in info.sequence.steps():
            coords = child_coordinates(coords, step)
        assert np.allclose(coords, info.vertex_coords, atol=1e-14)
        assert info.volume == pytest.approx(square_macro.element_volume(info.macro_index) / 2 ** info.level)


def test_traverse_concurrent_macro_ranges(square_mesh, rng, refine_randomly):
    refine_randomly(square_mesh, rng, 100)
    expected = [info.path for info in square_mesh.iter_elements()]

    def paths(indices):
        return [info.path for info in square_mesh.iter_elements(macro_range=indices)]

    with ThreadPoolExecutor(max_workers=2) as pool:
        parts = list(pool.map(paths, [[0, 1], [2, 3]]))
    assert parts[0] + parts[1] == expected


def test_copy_is_independent(square_mesh):
    clone = square_mesh.copy()
    clone.bisect(clone.leaf_nodes()[0])
    assert square_mesh.num_leaves == 4
    assert clone.num_leaves == 6
    assert clone.macro is square_mesh.macro


def test_refine_to_path(square_mesh):
    target = Mesh(square_mesh.macro)
    target.refine_uniform(3)
    path = target.leaf_nodes()[5].path
    node = square_mesh.refine_to(path)
    assert node.path == path
    assert node.is_leaf
    assert square_mesh.is_conforming()


def test_revision_counts_mutations(square_mesh):
    assert square_mesh.revision == 0
    square_mesh.bisect(square_mesh.leaf_nodes()[0])
    assert square_mesh.revision == 2
