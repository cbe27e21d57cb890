import logging
from dataclasses import dataclass
from math import lcm
from typing import Iterator, List, Literal, Optional, Sequence, Tuple

from app.core.errors import InputValidationError
from app.dynamics.graph_core import Graph, enumerate_paths

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

Side = Literal["unstable", "stable"]


@dataclass(frozen=True)
class ShiftPoint:
    """
    Eventually periodic point of the edge shift.

    Coordinate t holds core[t - core_start] on the core, the left cycle
    repeated before it (coordinate core_start - 1 is left_cycle[-1]) and the
    right cycle repeated after it.
    """
    left_cycle: Tuple[str, ...]
    core: Tuple[str, ...]
    right_cycle: Tuple[str, ...]
    core_start: int = 0

    @property
    def core_end(self) -> int:
        return self.core_start + len(self.core)

    def at(self, t: int) -> str:
        if t < self.core_start:
            return self.left_cycle[(t - self.core_start) % len(self.left_cycle)]
        if t < self.core_end:
            return self.core[t - self.core_start]
        return self.right_cycle[(t - self.core_end) % len(self.right_cycle)]

    def window(self, first: int, last: int) -> Tuple[str, ...]:
        """Coordinates first..last inclusive."""
        return tuple(self.at(t) for t in range(first, last + 1))

    def to_spec(self) -> dict:
        return {
            "left_cycle": list(self.left_cycle),
            "core": list(self.core),
            "right_cycle": list(self.right_cycle),
            "core_start": self.core_start,
        }


def _rotate(word: Sequence[str], d: int) -> Tuple[str, ...]:
    d %= len(word)
    return tuple(word[d:]) + tuple(word[:d])


def make_point(
    g: Graph,
    left_cycle: Sequence[str],
    core: Sequence[str],
    right_cycle: Sequence[str],
    core_start: int = 0,
) -> ShiftPoint:
    """
    Validate and build a ShiftPoint.

    Checks every edge id, both cycle closures and every junction
    (left cycle -> core -> right cycle).
    """
    left_cycle, core, right_cycle = tuple(left_cycle), tuple(core), tuple(right_cycle)
    if not left_cycle or not right_cycle:
        raise InputValidationError("Point cycles must be nonempty")
    for e in left_cycle + core + right_cycle:
        if not g.has_edge(e):
            raise InputValidationError(f"Unknown edge id in point: {e}")

    def check(a: str, b: str, where: str):
        if g.target(a) != g.source(b):
            raise InputValidationError(f"Path inconsistency at {where}: {a} -> {b}")

    for name, cycle in (("left cycle", left_cycle), ("right cycle", right_cycle)):
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            check(a, b, name)
    for a, b in zip(core, core[1:]):
        check(a, b, "core")
    middle = core if core else right_cycle
    check(left_cycle[-1], middle[0], "left junction")
    if core:
        check(core[-1], right_cycle[0], "right junction")
    return ShiftPoint(left_cycle, core, right_cycle, core_start)


def coordinate(z: ShiftPoint, t: int) -> str:
    return z.at(t)


def shift_point(z: ShiftPoint, s: int) -> ShiftPoint:
    """sigma^s z: coordinate t of the result is coordinate t + s of z."""
    return ShiftPoint(z.left_cycle, z.core, z.right_cycle, z.core_start - s)


def periodic_point(g: Graph, cycle: Sequence[str], phase: int = 0) -> ShiftPoint:
    """The point with z_t = cycle[(t + phase) mod p]."""
    word = _rotate(cycle, phase)
    return make_point(g, word, (), word, 0)


def agree_below(x: ShiftPoint, y: ShiftPoint, upto: int) -> bool:
    """True when x_t = y_t for every t <= upto."""
    lo = min(x.core_start, y.core_start, upto + 1) - lcm(len(x.left_cycle), len(y.left_cycle))
    return all(x.at(t) == y.at(t) for t in range(lo, upto + 1))


def agree_above(x: ShiftPoint, y: ShiftPoint, start: int) -> bool:
    """True when x_t = y_t for every t >= start."""
    hi = max(x.core_end, y.core_end, start) + lcm(len(x.right_cycle), len(y.right_cycle))
    return all(x.at(t) == y.at(t) for t in range(start, hi))


def same_point(x: ShiftPoint, y: ShiftPoint) -> bool:
    """Coordinatewise equality, independent of the representation."""
    return agree_below(x, y, 0) and agree_above(x, y, 1)


def assemble(
    g: Graph,
    left: ShiftPoint,
    left_end: int,
    middle: Sequence[str],
    right: ShiftPoint,
) -> ShiftPoint:
    """
    Splice a point: coordinates t <= left_end come from left, the middle word
    occupies left_end + 1 .. left_end + len(middle), the rest comes from right.
    """
    last = left_end + len(middle)
    lo = min(left.core_start, left_end + 1)
    hi = max(right.core_end, last + 1)
    core = (
        [left.at(t) for t in range(lo, left_end + 1)]
        + list(middle)
        + [right.at(t) for t in range(last + 1, hi)]
    )
    return make_point(
        g,
        _rotate(left.left_cycle, lo - left.core_start),
        core,
        _rotate(right.right_cycle, hi - right.core_end),
        lo,
    )


def bracket(g: Graph, x: ShiftPoint, y: ShiftPoint) -> Optional[ShiftPoint]:
    """
    [x, y]: the past of y (t <= 0) joined to the future of x (t >= 1).

    Returns None when target(y_0) != source(x_1).
    """
    if g.target(y.at(0)) != g.source(x.at(1)):
        return None
    return assemble(g, y, 0, (), x)


def junction_vertex(g: Graph, z: ShiftPoint, t: int = 0) -> str:
    """Vertex between coordinates t and t + 1."""
    return g.target(z.at(t))


def _walk(g: Graph, vertex: str, forward: bool) -> Tuple[List[str], List[str]]:
    # first-edge walk until a vertex repeats: (prefix edges, cycle edges)
    seen = {vertex: 0}
    edges: List[str] = []
    current = vertex
    while True:
        e = g.out_edges(current)[0] if forward else g.in_edges(current)[0]
        edges.append(e.id)
        current = e.target if forward else e.source
        if current in seen:
            start = seen[current]
            return edges[:start], edges[start:]
        seen[current] = len(edges)


def point_through(g: Graph, vertex: str) -> ShiftPoint:
    """A canonical eventually periodic point whose 0/1 junction is the vertex."""
    back_prefix, back_cycle = _walk(g, vertex, forward=False)
    fwd_prefix, fwd_cycle = _walk(g, vertex, forward=True)
    core = list(reversed(back_prefix)) + fwd_prefix
    return make_point(g, tuple(reversed(back_cycle)), core, fwd_cycle, 1 - len(back_prefix))


def enumerate_words(g: Graph, length: int) -> Iterator[Tuple[str, ...]]:
    """All path-consistent edge words of the given length."""
    for v in g.vertices:
        yield from enumerate_paths(g, v, None, length)


@dataclass(frozen=True)
class CenteredCylinder:
    """Cylinder fixing word[t + l - 1] at coordinates -l+1..l."""
    word: Tuple[str, ...]
    halfwidth: int
    left_anchor: str
    right_anchor: str

    def label(self) -> str:
        return ",".join(self.word)

    def matches(self, z: ShiftPoint) -> bool:
        return z.window(-self.halfwidth + 1, self.halfwidth) == self.word


def make_centered_cylinder(g: Graph, word: Sequence[str], halfwidth: Optional[int] = None) -> CenteredCylinder:
    word = tuple(word)
    if halfwidth is None:
        if len(word) % 2:
            raise InputValidationError(f"Centered cylinder needs an even-length word, got {len(word)}")
        halfwidth = len(word) // 2
    if halfwidth < 1 or len(word) != 2 * halfwidth:
        raise InputValidationError(f"Word of length {len(word)} does not fit halfwidth {halfwidth}")
    for e in word:
        if not g.has_edge(e):
            raise InputValidationError(f"Unknown edge id in cylinder: {e}")
    if not g.is_path(word):
        raise InputValidationError(f"Cylinder word is not a path: {','.join(word)}")
    return CenteredCylinder(word, halfwidth, g.source(word[0]), g.target(word[-1]))


def centered_cylinders(g: Graph, halfwidth: int) -> List[CenteredCylinder]:
    return [
        CenteredCylinder(word, halfwidth, g.source(word[0]), g.target(word[-1]))
        for word in enumerate_words(g, 2 * halfwidth)
    ]


@dataclass(frozen=True)
class RayCylinder:
    """
    Unstable ray {z : z_t = x_t for t <= n} or stable ray
    {z : z_t = y_t for t >= -m + 1}.
    """
    side: Side
    base: ShiftPoint
    parameter: int
    anchor: str

    def contains(self, z: ShiftPoint) -> bool:
        if self.side == "unstable":
            return agree_below(z, self.base, self.parameter)
        return agree_above(z, self.base, -self.parameter + 1)


def make_ray_cylinder(g: Graph, side: Side, base: ShiftPoint, parameter: int) -> RayCylinder:
    if side == "unstable":
        anchor = g.target(base.at(parameter))
    elif side == "stable":
        anchor = g.source(base.at(-parameter + 1))
    else:
        raise InputValidationError(f"Unknown ray side: {side}")
    return RayCylinder(side, base, parameter, anchor)


def rays_disjoint(first: RayCylinder, second: RayCylinder) -> bool:
    """Two rays of the same side are disjoint iff their bases differ on the common fixed range."""
    if first.side != second.side:
        raise InputValidationError("Disjointness is only decided for rays of the same side")
    if first.side == "unstable":
        return not agree_below(first.base, second.base, min(first.parameter, second.parameter))
    return not agree_above(first.base, second.base, -min(first.parameter, second.parameter) + 1)


@dataclass(frozen=True)
class ProductSet:
    """
    [B, C] for local rays B = Sigma^u_n(x), C = Sigma^s_m(y).

    Nonempty sets are the cylinder on window -m+1..n carrying y_{-m+1..0}
    followed by x_{1..n}, through the common 0/1 junction vertex.
    """
    unstable: RayCylinder
    stable: RayCylinder
    window_start: int
    word: Tuple[str, ...]
    junction: Optional[str]
    empty: bool

    def cylinders(self, g: Graph) -> List[CenteredCylinder]:
        """Finite decomposition into centered cylinders of halfwidth max(1, n, m)."""
        if self.empty:
            return []
        halfwidth = max(1, self.unstable.parameter, self.stable.parameter)
        offset = self.window_start + halfwidth - 1
        found = []
        for cyl in centered_cylinders(g, halfwidth):
            if cyl.word[offset:offset + len(self.word)] != self.word:
                continue
            # position 0 sits at index halfwidth - 1 of the centered word
            if g.target(cyl.word[halfwidth - 1]) != self.junction:
                continue
            found.append(cyl)
        return found


def product_set(g: Graph, unstable: RayCylinder, stable: RayCylinder) -> ProductSet:
    if unstable.side != "unstable" or stable.side != "stable":
        raise InputValidationError("Product set needs an unstable ray and a stable ray")
    n, m = unstable.parameter, stable.parameter
    if n < 0 or m < 0:
        raise InputValidationError(f"Product set needs local rays (n >= 0, m >= 0), got n={n}, m={m}")

    left_junction = junction_vertex(g, stable.base, 0)
    right_junction = junction_vertex(g, unstable.base, 0)
    if left_junction != right_junction:
        logger.info(f"Product set is empty: junction {left_junction} != {right_junction}")
        return ProductSet(unstable, stable, -m + 1, (), None, True)

    word = stable.base.window(-m + 1, 0) + unstable.base.window(1, n)
    return ProductSet(unstable, stable, -m + 1, word, left_junction, False)
