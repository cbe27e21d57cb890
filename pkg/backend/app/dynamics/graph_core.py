import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import gcd
from typing import Any, Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.errors import InputValidationError, PeriodMismatchError
from app.dynamics.schemas import GraphSpec

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class Edge(NamedTuple):
    id: str
    source: str
    target: str


def path_id(path: Sequence[str]) -> str:
    """Edge id of a recoded path, e.g. ("p", "r") -> "(p,r)"."""
    return "(" + ",".join(path) + ")"


@dataclass(frozen=True, eq=False)
class IntMatrix:
    """
    Square matrix of arbitrary-precision nonnegative integers indexed by vertex ids.

    Entries are plain Python ints stored in a numpy object array, so products
    never overflow.
    """
    vertices: Tuple[str, ...]
    data: np.ndarray
    _index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=object, copy=True)
        if data.shape != (len(self.vertices), len(self.vertices)):
            raise InputValidationError(
                f"Matrix shape {data.shape} does not match {len(self.vertices)} vertices"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})

    @classmethod
    def identity(cls, vertices: Sequence[str]) -> "IntMatrix":
        size = len(vertices)
        data = np.zeros((size, size), dtype=object)
        for i in range(size):
            data[i, i] = 1
        return cls(tuple(vertices), data)

    def entry(self, i: str, j: str) -> int:
        return int(self.data[self._index[i], self._index[j]])

    def submatrix(self, rows: Sequence[str], cols: Sequence[str]) -> np.ndarray:
        r = [self._index[v] for v in rows]
        c = [self._index[v] for v in cols]
        return self.data[np.ix_(r, c)]

    def trace(self) -> int:
        return sum(int(self.data[i, i]) for i in range(len(self.vertices)))

    def total(self) -> int:
        return sum(int(x) for x in self.data.flat)

    def rows(self) -> List[List[int]]:
        return [[int(x) for x in row] for row in self.data]

    def to_float(self) -> np.ndarray:
        return np.array(self.data, dtype=np.float64)

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.vertices != other.vertices:
            raise InputValidationError("Cannot multiply matrices over different vertex sets")
        return IntMatrix(self.vertices, self.data.dot(other.data))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntMatrix):
            return NotImplemented
        return self.vertices == other.vertices and self.rows() == other.rows()

    def __hash__(self) -> int:
        return hash((self.vertices, tuple(map(tuple, self.rows()))))


@dataclass(frozen=True)
class Graph:
    """
    Directed multigraph with labeled edges; its edge shift is the SFT.

    Vertices and edges are kept in canonical (lexicographic) order. Every vertex
    must have in-degree and out-degree at least one.
    """
    vertices: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    _edges_by_id: Dict[str, Edge] = field(init=False, repr=False, compare=False)
    _out: Dict[str, Tuple[Edge, ...]] = field(init=False, repr=False, compare=False)
    _in: Dict[str, Tuple[Edge, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vertices = tuple(sorted(self.vertices))
        edges = tuple(sorted((Edge(*e) for e in self.edges), key=lambda e: e.id))

        if not vertices:
            raise InputValidationError("Graph has no vertices")
        if len(set(vertices)) != len(vertices):
            raise InputValidationError("Duplicate vertex id")

        by_id: Dict[str, Edge] = {}
        out: Dict[str, List[Edge]] = {v: [] for v in vertices}
        inc: Dict[str, List[Edge]] = {v: [] for v in vertices}
        for e in edges:
            if e.id in by_id:
                raise InputValidationError(f"Duplicate edge id: {e.id}")
            if e.source not in out or e.target not in inc:
                raise InputValidationError(f"Edge {e.id} has a dangling endpoint ({e.source} -> {e.target})")
            by_id[e.id] = e
            out[e.source].append(e)
            inc[e.target].append(e)

        for v in vertices:
            if not out[v]:
                raise InputValidationError(f"Vertex {v} has out-degree 0")
            if not inc[v]:
                raise InputValidationError(f"Vertex {v} has in-degree 0")

        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_edges_by_id", by_id)
        object.__setattr__(self, "_out", {v: tuple(es) for v, es in out.items()})
        object.__setattr__(self, "_in", {v: tuple(es) for v, es in inc.items()})

    def edge(self, edge_id: str) -> Edge:
        try:
            return self._edges_by_id[edge_id]
        except KeyError:
            raise InputValidationError(f"Unknown edge id: {edge_id}")

    def has_edge(self, edge_id: str) -> bool:
        return edge_id in self._edges_by_id

    def source(self, edge_id: str) -> str:
        return self.edge(edge_id).source

    def target(self, edge_id: str) -> str:
        return self.edge(edge_id).target

    def out_edges(self, vertex: str) -> Tuple[Edge, ...]:
        return self._out[vertex]

    def in_edges(self, vertex: str) -> Tuple[Edge, ...]:
        return self._in[vertex]

    def is_path(self, word: Sequence[str]) -> bool:
        """True when consecutive edges of word meet head to tail."""
        for a, b in zip(word, word[1:]):
            if self.target(a) != self.source(b):
                return False
        return all(self.has_edge(e) for e in word)

    @cached_property
    def adjacency(self) -> IntMatrix:
        data = np.zeros((len(self.vertices), len(self.vertices)), dtype=object)
        index = {v: i for i, v in enumerate(self.vertices)}
        for e in self.edges:
            data[index[e.source], index[e.target]] += 1
        return IntMatrix(self.vertices, data)

    def to_spec(self) -> Dict[str, Any]:
        return {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "from": e.source, "to": e.target} for e in self.edges],
        }


@dataclass(frozen=True)
class SpectralDecomposition:
    irreducible: bool
    period: Optional[int]
    cyclic_classes: Tuple[Tuple[str, ...], ...]

    def class_of(self, vertex: str) -> int:
        if not self.irreducible:
            raise InputValidationError("Cyclic classes are undefined for a reducible graph")
        for index, cls in enumerate(self.cyclic_classes):
            if vertex in cls:
                return index
        raise InputValidationError(f"Unknown vertex: {vertex}")


def load_graph(spec: Union[GraphSpec, Mapping[str, Any]]) -> Graph:
    """
    Build a validated Graph from a graph document.

    Parameters:
    - spec: GraphSpec or the raw JSON mapping

    Returns:
    - Graph in canonical order
    """
    if not isinstance(spec, GraphSpec):
        try:
            spec = GraphSpec.model_validate(spec)
        except ValidationError as e:
            raise InputValidationError(f"Malformed graph document: {e}")
    graph = Graph(tuple(spec.vertices), tuple(Edge(e.id, e.source, e.target) for e in spec.edges))
    logger.info(f"Loaded graph with {len(graph.vertices)} vertices and {len(graph.edges)} edges")
    return graph


@lru_cache(maxsize=4096)
def adjacency_power(g: Graph, n: int) -> IntMatrix:
    """
    Exact A^n by repeated squaring; entry (i, j) counts length-n paths i -> j.
    """
    if n < 0:
        raise InputValidationError(f"Matrix power must be nonnegative, got {n}")
    result = IntMatrix.identity(g.vertices)
    base = g.adjacency
    while n:
        if n & 1:
            result = result @ base
        n >>= 1
        if n:
            base = base @ base
    return result


def _reachable(g: Graph, root: str, forward: bool = True) -> set:
    seen = {root}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        edges = g.out_edges(v) if forward else g.in_edges(v)
        for e in edges:
            w = e.target if forward else e.source
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


@lru_cache(maxsize=256)
def structure_analysis(g: Graph) -> SpectralDecomposition:
    """
    Irreducibility, period and cyclic classes of the graph.

    Irreducibility is strong connectivity (a forward and a backward traversal
    from one root). The period is the gcd of level[u] + 1 - level[v] over all
    edges u -> v of a BFS layering; class t holds the vertices with level = t mod I.
    """
    root = g.vertices[0]
    if len(_reachable(g, root)) < len(g.vertices) or len(_reachable(g, root, forward=False)) < len(g.vertices):
        logger.info("Graph is reducible")
        return SpectralDecomposition(irreducible=False, period=None, cyclic_classes=())

    level = {root: 0}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for e in g.out_edges(v):
            if e.target not in level:
                level[e.target] = level[v] + 1
                queue.append(e.target)

    period = 0
    for e in g.edges:
        period = gcd(period, level[e.source] + 1 - level[e.target])

    classes: List[List[str]] = [[] for _ in range(period)]
    for v in g.vertices:
        classes[level[v] % period].append(v)

    logger.info(f"Graph is irreducible with period {period}")
    return SpectralDecomposition(
        irreducible=True,
        period=period,
        cyclic_classes=tuple(tuple(cls) for cls in classes),
    )


def enumerate_paths(g: Graph, start: str, end: Optional[str], length: int) -> Iterator[Tuple[str, ...]]:
    """
    Yield every edge path of the given length from start (to end, if given),
    in lexicographic order of edge ids. Dead branches are pruned with A^r.
    """
    if length < 0:
        return
    if end is not None and adjacency_power(g, length).entry(start, end) == 0:
        return

    path: List[str] = []

    def extend(vertex: str, remaining: int) -> Iterator[Tuple[str, ...]]:
        if remaining == 0:
            if end is None or vertex == end:
                yield tuple(path)
            return
        reach = adjacency_power(g, remaining - 1) if end is not None else None
        for e in g.out_edges(vertex):
            if reach is not None and reach.entry(e.target, end) == 0:
                continue
            path.append(e.id)
            yield from extend(e.target, remaining - 1)
            path.pop()

    yield from extend(start, length)


def power_recode(g: Graph, period: int, class_index: int) -> Graph:
    """
    Graph whose edge shift is the component system (D_c, sigma^I).

    Vertices are the class D_c, edges are the length-I paths of g starting in
    D_c (they end in D_c as well).
    """
    decomp = structure_analysis(g)
    if not decomp.irreducible or decomp.period != period:
        raise PeriodMismatchError(
            f"Cannot recode with period {period}: graph period is {decomp.period}"
        )
    if not 0 <= class_index < period:
        raise InputValidationError(f"Class index {class_index} out of range 0..{period - 1}")

    cls = decomp.cyclic_classes[class_index]
    edges = []
    for v in cls:
        for path in enumerate_paths(g, v, None, period):
            edges.append(Edge(path_id(path), v, g.target(path[-1])))
    logger.info(f"Recoded class {class_index} into {len(cls)} vertices and {len(edges)} edges")
    return Graph(cls, tuple(edges))


def higher_block_graph(g: Graph, block: int = 2) -> Graph:
    """
    N-block presentation: vertices are paths of length N-1, edges are paths of
    length N. For N = 2 the vertices keep the original edge ids.
    """
    if block < 2:
        raise InputValidationError("Block length must be at least 2")

    def word_id(word: Sequence[str]) -> str:
        return word[0] if len(word) == 1 else path_id(word)

    vertices = set()
    edges = []
    for v in g.vertices:
        for path in enumerate_paths(g, v, None, block):
            vertices.add(word_id(path[:-1]))
            vertices.add(word_id(path[1:]))
            edges.append(Edge(path_id(path), word_id(path[:-1]), word_id(path[1:])))
    return Graph(tuple(vertices), tuple(edges))
