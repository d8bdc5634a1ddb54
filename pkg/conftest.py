import os

import numpy as np
import pytest

from engine.simplicial_mesh import MacroMesh, Mesh, load_macro_mesh

ROOT_PATH = os.path.dirname(os.path.abspath(__file__))
MACRO_PATH = os.path.join(ROOT_PATH, "macro")


@pytest.fixture
def square_macro():
    """Unit square, four triangles around the centre; markers 1 bottom, 2 right, 3 top, 4 left."""
    return load_macro_mesh(os.path.join(MACRO_PATH, "square4.macro"))


@pytest.fixture
def interval_macro():
    return load_macro_mesh(os.path.join(MACRO_PATH, "interval2.macro"))


@pytest.fixture
def unit_interval():
    return MacroMesh.from_arrays(1, [[0.0], [1.0]], [[0, 1]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def refine_randomly():
    """Returns f(mesh, rng, max_leaves) bisecting random leaves up to about max_leaves."""
    def refine(mesh, rng, max_leaves):
        target = int(rng.integers(min(mesh.num_leaves + 1, max_leaves), max_leaves + 1))
        while mesh.num_leaves < target:
            leaves = mesh.leaf_nodes()
            mesh.bisect(leaves[int(rng.integers(len(leaves)))])
        return mesh
    return refine


@pytest.fixture
def square_mesh(square_macro):
    return Mesh(square_macro)
