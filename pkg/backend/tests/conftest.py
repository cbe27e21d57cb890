import os

import numpy as np
import pytest

from app.dynamics.graph_core import Edge, Graph, structure_analysis
from app.dynamics.utils import load_code_file, load_graph_file
from app.dynamics.shift_space import periodic_point

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def random_irreducible_graph(rng: np.random.Generator, max_vertices: int = 4, max_edges: int = 8) -> Graph:
    """A Hamiltonian cycle plus random extra edges, so the graph is strongly connected."""
    size = int(rng.integers(1, max_vertices + 1))
    vertices = [f"v{i}" for i in range(size)]
    pairs = [(vertices[i], vertices[(i + 1) % size]) for i in range(size)]
    extra = int(rng.integers(1, max_edges - size + 1))
    for _ in range(extra):
        pairs.append((vertices[int(rng.integers(size))], vertices[int(rng.integers(size))]))
    edges = [Edge(f"e{index}", s, t) for index, (s, t) in enumerate(pairs)]
    g = Graph(tuple(vertices), tuple(edges))
    assert structure_analysis(g).irreducible
    return g


@pytest.fixture
def golden():
    return load_graph_file(data_path("golden_mean.json"))


@pytest.fixture
def full2():
    return load_graph_file(data_path("full_2_shift.json"))


@pytest.fixture
def period2():
    return load_graph_file(data_path("period_2.json"))


@pytest.fixture
def gm_a(golden):
    return periodic_point(golden, ["a"])


@pytest.fixture
def gm_bc(golden):
    """(bc)^inf with z_0 = b."""
    return periodic_point(golden, ["b", "c"])


@pytest.fixture
def gm_cb(golden):
    """(bc)^inf with z_0 = c."""
    return periodic_point(golden, ["b", "c"], 1)


@pytest.fixture
def code_2block():
    return load_code_file(data_path("code_2block.json"))


@pytest.fixture
def code_doubling():
    return load_code_file(data_path("code_doubling.json"))
