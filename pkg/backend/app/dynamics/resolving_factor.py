import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Literal, Mapping, Optional, Sequence, Set, Tuple

from app.core.config import settings
from app.core.errors import InputValidationError
from app.dynamics.graph_core import Edge, Graph, higher_block_graph
from app.dynamics.heteroclinic import HeteroSpec, hetero_count
from app.dynamics.parry_measure import CheckReport, centered_cylinder_mass, ray_cylinder_mass
from app.dynamics.perron import PerronData, compute_perron
from app.dynamics.periodic_baseline import enumerate_periodic
from app.dynamics.shift_space import (
    CenteredCylinder,
    RayCylinder,
    ShiftPoint,
    assemble,
    centered_cylinders,
    make_point,
    make_ray_cylinder,
    point_through,
    rays_disjoint,
    shift_point,
)

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Unstable sets are left-tail classes, so injectivity on them is right-resolving
# and injectivity on stable sets is left-resolving.

PROBE_LIMITATION = "evidence over periodic points of bounded period only; not a proof of degree one"


@dataclass(frozen=True, eq=False)
class OneBlockCode:
    domain: Graph
    codomain: Graph
    edge_map: Mapping[str, str]
    vertex_map: Mapping[str, str]
    name: Optional[str] = None

    def image(self, edge_id: str) -> str:
        return self.edge_map[edge_id]

    def word_image(self, word: Sequence[str]) -> Tuple[str, ...]:
        return tuple(self.edge_map[e] for e in word)

    def lift_out(self, vertex: str, edge_id: str) -> List[Edge]:
        """Domain out-edges of vertex that map to the codomain edge."""
        return [e for e in self.domain.out_edges(vertex) if self.edge_map[e.id] == edge_id]

    def lift_in(self, vertex: str, edge_id: str) -> List[Edge]:
        return [e for e in self.domain.in_edges(vertex) if self.edge_map[e.id] == edge_id]

    def vertex_fiber(self, vertex: str) -> Tuple[str, ...]:
        return tuple(u for u in self.domain.vertices if self.vertex_map[u] == vertex)

    def to_spec(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "domain": self.domain.to_spec(),
            "codomain": self.codomain.to_spec(),
            "edge_map": dict(self.edge_map),
        }


def validate_code(
    domain: Graph,
    codomain: Graph,
    edge_map: Mapping[str, str],
    name: Optional[str] = None,
) -> OneBlockCode:
    """
    Check that edge_map is a graph homomorphism onto the codomain edges.

    Raises InputValidationError for a non-total map, unknown edges, endpoint
    incompatibility or a non-surjective map.
    """
    missing = [e.id for e in domain.edges if e.id not in edge_map]
    if missing:
        raise InputValidationError(f"Edge map is not total: missing {', '.join(missing)}")
    extra = [e for e in edge_map if not domain.has_edge(e)]
    if extra:
        raise InputValidationError(f"Edge map names unknown domain edges: {', '.join(sorted(extra))}")
    for e, f in edge_map.items():
        if not codomain.has_edge(f):
            raise InputValidationError(f"Edge {e} maps to unknown codomain edge {f}")

    vertex_map: Dict[str, str] = {}
    for e in domain.edges:
        f = codomain.edge(edge_map[e.id])
        for u, v in ((e.source, f.source), (e.target, f.target)):
            if vertex_map.setdefault(u, v) != v:
                raise InputValidationError(
                    f"Edge {e.id} -> {f.id} is incompatible: vertex {u} maps to both {vertex_map[u]} and {v}"
                )

    unused = sorted(set(e.id for e in codomain.edges) - set(edge_map.values()))
    if unused:
        raise InputValidationError(f"Edge map is not surjective: nothing maps to {', '.join(unused)}")
    return OneBlockCode(domain, codomain, dict(edge_map), vertex_map, name)


def higher_block_code(g: Graph, keep: Literal["last", "first"] = "last") -> OneBlockCode:
    """The 2-block recoding (e,f) -> f, or (e,f) -> e with keep="first"."""
    if keep not in ("last", "first"):
        raise InputValidationError(f"keep must be 'last' or 'first', got {keep}")
    domain = higher_block_graph(g, 2)
    # the 2-block edge (e,f) runs from vertex e to vertex f
    edge_map = {e.id: e.target if keep == "last" else e.source for e in domain.edges}
    return validate_code(domain, g, edge_map, name=f"2-block ({keep})")


def resolving_type(code: OneBlockCode) -> Dict[str, bool]:
    def injective(groups) -> bool:
        for edges in groups:
            images = [code.image(e.id) for e in edges]
            if len(images) != len(set(images)):
                return False
        return True

    vertices = code.domain.vertices
    return {
        "right_resolving": injective(code.domain.out_edges(v) for v in vertices),
        "left_resolving": injective(code.domain.in_edges(v) for v in vertices),
    }


def _require_right_resolving(code: OneBlockCode):
    if not resolving_type(code)["right_resolving"]:
        raise InputValidationError("This operation needs a right-resolving code")


def cylinder_preimage(code: OneBlockCode, cylinder: CenteredCylinder) -> List[CenteredCylinder]:
    """All domain cylinders whose words map letterwise onto the cylinder's word."""
    found = []
    word: List[str] = []

    def extend(position: int, vertex: Optional[str]):
        if position == len(cylinder.word):
            found.append(CenteredCylinder(
                tuple(word),
                cylinder.halfwidth,
                code.domain.source(word[0]),
                code.domain.target(word[-1]),
            ))
            return
        letter = cylinder.word[position]
        candidates = code.domain.edges if vertex is None else code.domain.out_edges(vertex)
        for e in candidates:
            if code.image(e.id) == letter:
                word.append(e.id)
                extend(position + 1, e.target)
                word.pop()

    extend(0, None)
    return found


# Fiber graphs: a lift of a cycle word is an infinite walk through states
# (domain vertex, phase) whose edges are domain edges over the letter at that phase.

State = Tuple[str, int]
StateGraph = Dict[State, List[Tuple[str, State]]]


def _forward_fiber_graph(code: OneBlockCode, cycle: Sequence[str]) -> StateGraph:
    p = len(cycle)
    graph: StateGraph = {}
    for u in code.domain.vertices:
        for phase in range(p):
            graph[(u, phase)] = [
                (e.id, (e.target, (phase + 1) % p)) for e in code.lift_out(u, cycle[phase])
            ]
    return graph


def _backward_fiber_graph(code: OneBlockCode, cycle: Sequence[str]) -> StateGraph:
    # phase q: q edges already walked back; the next letter is cycle[-q-1]
    p = len(cycle)
    graph: StateGraph = {}
    for u in code.domain.vertices:
        for q in range(p):
            graph[(u, q)] = [
                (e.id, (e.source, (q + 1) % p)) for e in code.lift_in(u, cycle[(-q - 1) % p])
            ]
    return graph


def _infinite_walk_states(graph: StateGraph) -> Set[State]:
    """States from which an infinite walk exists."""
    alive = set(graph)
    changed = True
    while changed:
        changed = False
        for state in list(alive):
            if not any(nxt in alive for _, nxt in graph[state]):
                alive.discard(state)
                changed = True
    return alive


def _walk_states(graph: StateGraph, alive: Set[State], state: State) -> Tuple[List[str], List[str]]:
    # first-choice walk inside alive until a state repeats: (prefix edges, cycle edges)
    seen: Dict[Hashable, int] = {state: 0}
    edges: List[str] = []
    while True:
        edge_id, state = next((e, nxt) for e, nxt in graph[state] if nxt in alive)
        edges.append(edge_id)
        if state in seen:
            start = seen[state]
            return edges[:start], edges[start:]
        seen[state] = len(edges)


def lift_point(code: OneBlockCode, z: ShiftPoint) -> Optional[ShiftPoint]:
    """
    An eventually periodic domain point mapping onto z, or None when z has no
    preimage.
    """
    back_graph = _backward_fiber_graph(code, z.left_cycle)
    back_alive = _infinite_walk_states(back_graph)
    fwd_graph = _forward_fiber_graph(code, z.right_cycle)
    fwd_alive = _infinite_walk_states(fwd_graph)

    layer = sorted(u for u in code.domain.vertices if (u, 0) in back_alive)
    parents: List[Dict[str, Tuple[str, str]]] = []
    for letter in z.core:
        step: Dict[str, Tuple[str, str]] = {}
        for u in layer:
            for e in code.lift_out(u, letter):
                step.setdefault(e.target, (u, e.id))
        parents.append(step)
        layer = sorted(step)

    ends = [u for u in layer if (u, 0) in fwd_alive]
    if not ends:
        return None

    end = ends[0]
    core: List[str] = []
    vertex = end
    for step in reversed(parents):
        vertex, edge_id = step[vertex]
        core.append(edge_id)
    core.reverse()
    start = vertex

    back_prefix, back_cycle = _walk_states(back_graph, back_alive, (start, 0))
    fwd_prefix, fwd_cycle = _walk_states(fwd_graph, fwd_alive, (end, 0))
    return make_point(
        code.domain,
        tuple(reversed(back_cycle)),
        list(reversed(back_prefix)) + core + fwd_prefix,
        fwd_cycle,
        z.core_start - len(back_prefix),
    )


def fiber_size(code: OneBlockCode, cycle: Sequence[str]) -> Optional[int]:
    """
    Exact number of preimages of a periodic point with the given cycle word;
    None when the fiber is infinite.

    Preimages are the bi-infinite walks of the fiber graph. They are finitely
    many exactly when every state on such a walk has one way in and one way out.
    """
    graph = _forward_fiber_graph(code, cycle)
    forward_alive = _infinite_walk_states(graph)
    reverse: StateGraph = {state: [] for state in graph}
    for state, moves in graph.items():
        for edge_id, nxt in moves:
            reverse[nxt].append((edge_id, state))
    core = forward_alive & _infinite_walk_states(reverse)

    for state in core:
        outs = sum(1 for _, nxt in graph[state] if nxt in core)
        ins = sum(1 for _, prev in reverse[state] if prev in core)
        if outs != 1 or ins != 1:
            return None
    return sum(1 for _, phase in core if phase == 0)


@dataclass(frozen=True)
class ProbeReport:
    period_bound: int
    min_fiber: float
    histogram: Dict[str, int]
    points: int
    almost_one_to_one: bool
    limitation: str = PROBE_LIMITATION

    def as_dict(self) -> Dict[str, Any]:
        return {
            "period_bound": self.period_bound,
            "min_fiber": self.min_fiber,
            "histogram": self.histogram,
            "points": self.points,
            "almost_one_to_one": self.almost_one_to_one,
            "limitation": self.limitation,
        }


def almost_one_to_one_probe(code: OneBlockCode, period_bound: Optional[int] = None, cap: Optional[int] = None) -> ProbeReport:
    """
    Fiber cardinalities over every codomain point of least period <= P.

    Parameters:
    - code: validated code
    - period_bound: P (defaults to PROBE_PERIOD)
    - cap: enumeration cap for the codomain periodic points

    Returns:
    - ProbeReport; a minimum fiber of 1 is evidence of degree one
    """
    period_bound = settings.PROBE_PERIOD if period_bound is None else period_bound
    ens = enumerate_periodic(code.codomain, period_bound, cap)
    histogram: Counter = Counter()
    for cycle in ens.orbits:
        size = fiber_size(code, cycle)
        histogram["inf" if size is None else str(size)] += len(cycle)
    sizes = [float(key) for key in histogram]
    min_fiber = min(sizes) if sizes else float("inf")
    logger.info(f"Probed {ens.total} periodic points up to period {period_bound}: min fiber {min_fiber}")
    return ProbeReport(
        period_bound=period_bound,
        min_fiber=min_fiber,
        histogram=dict(sorted(histogram.items())),
        points=ens.total,
        almost_one_to_one=min_fiber == 1,
    )


def pushforward_check(
    code: OneBlockCode,
    cylinder: CenteredCylinder,
    evidence: Optional[ProbeReport] = None,
) -> CheckReport:
    """
    mu_codomain(E) against the Parry mass of its preimage cylinders.

    Without an evidence report the probe runs with the default period bound.
    """
    evidence = evidence if evidence is not None else almost_one_to_one_probe(code)
    if not evidence.almost_one_to_one:
        raise InputValidationError(
            f"Pushforward needs degree-one evidence; minimum fiber is {evidence.min_fiber}"
        )
    pd_domain = compute_perron(code.domain)
    pd_codomain = compute_perron(code.codomain)
    preimages = cylinder_preimage(code, cylinder)
    lhs = centered_cylinder_mass(code.codomain, pd_codomain, cylinder).value
    rhs = sum(centered_cylinder_mass(code.domain, pd_domain, cyl).value for cyl in preimages)
    return CheckReport(
        lhs=lhs,
        rhs=rhs,
        abs_err=abs(lhs - rhs),
        config={"cylinder": cylinder.label(), "preimages": len(preimages)},
    )


def pushforward_family(code: OneBlockCode, l_max: int, evidence: Optional[ProbeReport] = None) -> List[CheckReport]:
    """pushforward_check over every codomain centered cylinder of halfwidth 1..l_max."""
    evidence = evidence if evidence is not None else almost_one_to_one_probe(code)
    return [
        pushforward_check(code, cyl, evidence)
        for halfwidth in range(1, l_max + 1)
        for cyl in centered_cylinders(code.codomain, halfwidth)
    ]


@dataclass(frozen=True)
class FiberDecomposition:
    """Stable ray C downstairs, its preimage as disjoint stable rays, and the bound M."""
    ray: RayCylinder
    components: Tuple[RayCylinder, ...]
    bound: int

    def pairwise_disjoint(self) -> bool:
        return all(
            rays_disjoint(a, b)
            for index, a in enumerate(self.components)
            for b in self.components[index + 1:]
        )


def _lift_future(code: OneBlockCode, vertex: str, z: ShiftPoint, start: int) -> Optional[Tuple[List[str], List[str]]]:
    # lifts z_start, z_start+1, ... from vertex; unique for right-resolving codes
    seen: Dict[Tuple[str, int], int] = {}
    edges: List[str] = []
    t = start
    current = vertex
    while True:
        if t >= z.core_end:
            key = (current, (t - z.core_end) % len(z.right_cycle))
            if key in seen:
                first = seen[key]
                return edges[:first], edges[first:]
            seen[key] = len(edges)
        lifts = code.lift_out(current, z.at(t))
        if not lifts:
            return None
        edges.append(lifts[0].id)
        current = lifts[0].target
        t += 1


def fiber_decomposition(code: OneBlockCode, ray: RayCylinder) -> FiberDecomposition:
    """
    Split the preimage of a stable ray C = Sigma^s_m(y) into stable rays of the
    domain, one per domain vertex over C's anchor from which y's future lifts.
    """
    if ray.side != "stable":
        raise InputValidationError("Fiber decomposition is defined for stable rays")
    _require_right_resolving(code)
    m = ray.parameter
    over = code.vertex_fiber(ray.anchor)

    components = []
    for u in over:
        lifted = _lift_future(code, u, ray.base, -m + 1)
        if lifted is None:
            continue
        prefix, cycle = lifted
        # any past ending at u will do; the ray only fixes t >= -m + 1
        past = shift_point(point_through(code.domain, u), m)
        future = ShiftPoint(tuple(cycle), (), tuple(cycle), -m + 1 + len(prefix))
        base = assemble(code.domain, past, -m, prefix, future)
        components.append(make_ray_cylinder(code.domain, "stable", base, m))

    logger.info(f"Stable ray at {ray.anchor} splits into {len(components)} of at most {len(over)} components")
    return FiberDecomposition(ray=ray, components=tuple(components), bound=len(over))


def gauge(code: OneBlockCode, pd_domain: PerronData, pd_codomain: PerronData) -> Tuple[float, float]:
    """
    The factor c with u_r^codomain(vertex_map(u)) = c u_r^domain(u), read at the
    first domain vertex, and its relative spread over all vertices.
    """
    ratios = [pd_codomain.right(code.vertex_map[u]) / pd_domain.right(u) for u in code.domain.vertices]
    c = ratios[0]
    return c, (max(ratios) - min(ratios)) / c


@dataclass(frozen=True)
class SUReport:
    side: str
    codomain_mass: float
    domain_mass: float
    abs_err: float
    raw_domain_mass: float
    gauge: float
    gauge_spread: float
    components: int
    meta: Dict[str, Any] = field(default_factory=dict)

    def as_row(self) -> Dict[str, Any]:
        return {
            "side": self.side,
            "codomain_mass": self.codomain_mass,
            "domain_mass": self.domain_mass,
            "abs_err": self.abs_err,
            "raw_domain_mass": self.raw_domain_mass,
            "gauge": self.gauge,
            "components": self.components,
        }


def pushforward_su_measures(code: OneBlockCode, ray: RayCylinder) -> SUReport:
    """
    Push stable and unstable ray measures through a right-resolving code.

    Stable: mu^s(C) against the sum over fiber components. Unstable: mu^u(B)
    against the mass of the lift Sigma^u_n(x~) for a lift x~ of x. Domain masses
    are taken in the codomain's eigenvector gauge; raw values are kept.
    """
    _require_right_resolving(code)
    pd_domain = compute_perron(code.domain)
    pd_codomain = compute_perron(code.codomain)
    c, spread = gauge(code, pd_domain, pd_codomain)
    if spread > 1e-9:
        logger.warning(f"Eigenvector gauge is not constant across the domain (spread {spread:.3e})")
    aligned = pd_domain.rescaled(c)
    codomain_mass = ray_cylinder_mass(code.codomain, pd_codomain, ray).value

    if ray.side == "stable":
        decomposition = fiber_decomposition(code, ray)
        pieces = decomposition.components
        meta = {"bound": decomposition.bound}
    else:
        lifted = lift_point(code, ray.base)
        if lifted is None:
            logger.error("Unstable ray has no lift")
            raise InputValidationError("No lift of the unstable ray's base point exists")
        pieces = (make_ray_cylinder(code.domain, "unstable", lifted, ray.parameter),)
        meta = {"lift": lifted.to_spec()}

    domain_mass = sum(ray_cylinder_mass(code.domain, aligned, piece).value for piece in pieces)
    raw = sum(ray_cylinder_mass(code.domain, pd_domain, piece).value for piece in pieces)
    return SUReport(
        side=ray.side,
        codomain_mass=codomain_mass,
        domain_mass=domain_mass,
        abs_err=abs(codomain_mass - domain_mass),
        raw_domain_mass=raw,
        gauge=c,
        gauge_spread=spread,
        components=len(pieces),
        meta=meta,
    )


def lifted_hetero_counts(code: OneBlockCode, spec: HeteroSpec, k: int) -> Tuple[int, int]:
    """
    (#h^k downstairs, sum of #h^k upstairs over the fiber components of C with
    B lifted to Sigma^u_n(x~)). A right-resolving code is one-to-one on h^k, so
    the two agree.
    """
    _require_right_resolving(code)
    lifted = lift_point(code, spec.x)
    if lifted is None:
        raise InputValidationError("No lift of x exists")
    unstable = make_ray_cylinder(code.domain, "unstable", lifted, spec.n)
    decomposition = fiber_decomposition(code, spec.stable)
    upstairs = sum(hetero_count(HeteroSpec(code.domain, unstable, c), k) for c in decomposition.components)
    return hetero_count(spec, k), upstairs
