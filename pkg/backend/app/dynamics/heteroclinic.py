import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.errors import CapExceededError, InputValidationError, UndefinedMeasureError
from app.dynamics.graph_core import (
    Graph,
    SpectralDecomposition,
    adjacency_power,
    enumerate_paths,
    power_recode,
    structure_analysis,
)
from app.dynamics.parry_measure import centered_cylinder_mass, ray_cylinder_mass
from app.dynamics.perron import PerronData, compute_perron
from app.dynamics.shift_space import (
    CenteredCylinder,
    RayCylinder,
    ShiftPoint,
    assemble,
    centered_cylinders,
    junction_vertex,
    make_ray_cylinder,
    rays_disjoint,
    shift_point,
)

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Splice:
    """
    Points equal to `left` on t < start and to `right` on t >= start + length,
    with a free middle path of `length` edges from `source` to `target`.
    """
    graph: Graph
    left: ShiftPoint
    right: ShiftPoint
    start: int
    length: int
    source: str
    target: str

    @property
    def end(self) -> int:
        return self.start + self.length - 1

    def size(self) -> int:
        return adjacency_power(self.graph, self.length).entry(self.source, self.target)

    def window_count(self, first: int, word: Sequence[str]) -> int:
        """Number of points whose coordinates first..first+len(word)-1 spell word."""
        g = self.graph
        if not g.is_path(word):
            return 0
        last = first + len(word) - 1
        for t, e in zip(range(first, last + 1), word):
            if t < self.start and self.left.at(t) != e:
                return 0
            if t > self.end and self.right.at(t) != e:
                return 0

        lo, hi = max(first, self.start), min(last, self.end)
        if lo > hi:
            return self.size()
        inner = word[lo - first:hi - first + 1]
        before = adjacency_power(g, lo - self.start).entry(self.source, g.source(inner[0]))
        after = adjacency_power(g, self.end - hi).entry(g.target(inner[-1]), self.target)
        return before * after


@dataclass(frozen=True)
class HeteroSpec:
    """
    A pair of rays B = Sigma^u_n(x), C = Sigma^s_m(y).

    h^k = sigma^k(B) & sigma^-k(C) is the set of points equal to sigma^k x on
    t <= n - k and to sigma^-k y on t >= k - m + 1; the middle coordinates
    n - k + 1 .. k - m form a path from i = target(x_n) to j = source(y_{-m+1}).
    """
    graph: Graph
    unstable: RayCylinder
    stable: RayCylinder

    @property
    def x(self) -> ShiftPoint:
        return self.unstable.base

    @property
    def y(self) -> ShiftPoint:
        return self.stable.base

    @property
    def n(self) -> int:
        return self.unstable.parameter

    @property
    def m(self) -> int:
        return self.stable.parameter

    @property
    def i(self) -> str:
        return self.unstable.anchor

    @property
    def j(self) -> str:
        return self.stable.anchor

    def middle_length(self, k: int) -> int:
        return 2 * k - (self.n + self.m)

    def first_k(self) -> int:
        return max(1, -(-(self.n + self.m) // 2))

    def splice(self, k: int) -> Splice:
        length = self.middle_length(k)
        if length < 0:
            raise InputValidationError(
                f"Negative middle path length 2k-(n+m) = {length} for k={k}, n={self.n}, m={self.m}"
            )
        return Splice(
            graph=self.graph,
            left=shift_point(self.x, k),
            right=shift_point(self.y, -k),
            start=self.n - k + 1,
            length=length,
            source=self.i,
            target=self.j,
        )

    def as_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x.to_spec(),
            "y": self.y.to_spec(),
            "n": self.n,
            "m": self.m,
            "i": self.i,
            "j": self.j,
        }


@dataclass(frozen=True)
class HeteroFamily:
    """Finite disjoint unions B = B_1 | ... | B_p and C = C_1 | ... | C_q."""
    graph: Graph
    unstable: Tuple[RayCylinder, ...]
    stable: Tuple[RayCylinder, ...]

    @property
    def pieces(self) -> Tuple[HeteroSpec, ...]:
        return tuple(HeteroSpec(self.graph, b, c) for b, c in product(self.unstable, self.stable))

    def as_dict(self) -> Dict[str, Any]:
        return {"pieces": [spec.as_dict() for spec in self.pieces]}


HeteroInput = Union[HeteroSpec, HeteroFamily]


@dataclass(frozen=True)
class HeteroEnumeration:
    k: int
    count: int
    middle_paths: Optional[Tuple[Tuple[str, ...], ...]] = None


@dataclass(frozen=True)
class SeriesRow:
    k: int
    count: int
    scaled: float
    target: float
    abs_err: float
    entropy_est: Optional[float]

    def as_row(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "count": str(self.count),
            "scaled": self.scaled,
            "target": self.target,
            "abs_err": self.abs_err,
            "entropy_est": self.entropy_est,
        }


@dataclass(frozen=True)
class ConvergenceSeries:
    rows: List[SeriesRow]
    meta: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class WeakStarRow:
    cylinder: str
    empirical: Fraction
    parry: float
    abs_err: float

    def as_row(self) -> Dict[str, Any]:
        return {
            "cylinder": self.cylinder,
            "empirical": float(self.empirical),
            "parry": self.parry,
            "abs_err": self.abs_err,
        }


@dataclass(frozen=True)
class WeakStarReport:
    k: int
    total_count: int
    rows: List[WeakStarRow]
    sup_deviation: float
    piece_weights: Optional[List[Fraction]] = None
    meta: Dict[str, Any] = field(default_factory=dict)


def hetero_pieces(spec: HeteroInput) -> Tuple[HeteroSpec, ...]:
    return spec.pieces if isinstance(spec, HeteroFamily) else (spec,)


def _scaled(count: int, lam: float, power: int) -> float:
    """count * lam^-power without overflowing on big counts."""
    if count == 0:
        return 0.0
    try:
        return count / lam ** power
    except OverflowError:
        return math.exp(math.log(count) - power * math.log(lam))


def make_hetero_spec(g: Graph, x: ShiftPoint, y: ShiftPoint, n: int, m: int) -> HeteroSpec:
    return HeteroSpec(g, make_ray_cylinder(g, "unstable", x, n), make_ray_cylinder(g, "stable", y, m))


def make_hetero_family(
    g: Graph,
    unstable: Sequence[Tuple[ShiftPoint, int]],
    stable: Sequence[Tuple[ShiftPoint, int]],
) -> HeteroInput:
    """
    Build B and C from (point, parameter) pairs. A single pair on each side
    gives a plain HeteroSpec.

    Raises InputValidationError when two pieces on the same side overlap.
    """
    if not unstable or not stable:
        raise InputValidationError("Need at least one unstable and one stable ray")
    rays_u = tuple(make_ray_cylinder(g, "unstable", x, n) for x, n in unstable)
    rays_s = tuple(make_ray_cylinder(g, "stable", y, m) for y, m in stable)
    for rays in (rays_u, rays_s):
        for a in range(len(rays)):
            for b in range(a + 1, len(rays)):
                if not rays_disjoint(rays[a], rays[b]):
                    raise InputValidationError(
                        f"{rays[a].side.capitalize()} pieces {a} and {b} are not disjoint"
                    )
    if len(rays_u) == 1 and len(rays_s) == 1:
        return HeteroSpec(g, rays_u[0], rays_s[0])
    return HeteroFamily(g, rays_u, rays_s)


def hetero_count(spec: HeteroInput, k: int) -> int:
    """#h^k = A^{2k-(n+m)}_{ij}, summed over the pieces of a family."""
    return sum(piece.splice(k).size() for piece in hetero_pieces(spec))


def hetero_enumerate(spec: HeteroSpec, k: int, cap: Optional[int] = None) -> HeteroEnumeration:
    """
    List the middle paths of h^k explicitly.

    Parameters:
    - spec: the ray pair
    - k: time parameter
    - cap: largest count that may be listed (defaults to ENUMERATION_CAP)

    Returns:
    - HeteroEnumeration with paths in lexicographic order
    """
    cap = settings.ENUMERATION_CAP if cap is None else cap
    sp = spec.splice(k)
    count = sp.size()
    if count > cap:
        logger.error(f"Enumeration of h^{k} has {count} points, above cap {cap}")
        raise CapExceededError(f"h^{k} has {count} points, cap is {cap}", count)
    paths = tuple(enumerate_paths(spec.graph, sp.source, sp.target, sp.length))
    return HeteroEnumeration(k=k, count=count, middle_paths=paths)


def heteroclinic_point(spec: HeteroSpec, k: int, middle: Sequence[str]) -> ShiftPoint:
    """The point of h^k carrying the given middle path."""
    sp = spec.splice(k)
    if len(middle) != sp.length:
        raise InputValidationError(f"Middle path must have {sp.length} edges, got {len(middle)}")
    return assemble(spec.graph, sp.left, sp.start - 1, middle, sp.right)


def _check_window(spec: HeteroSpec, k: int, halfwidth: int):
    need = max(spec.n, spec.m) + halfwidth
    if k < need:
        raise InputValidationError(f"Window of halfwidth {halfwidth} needs k >= {need}, got k={k}")


def empirical_cylinder_mass(spec: HeteroInput, k: int, cylinder: CenteredCylinder) -> Fraction:
    """
    mu^k_{B,C}(E) = A^{k-(n+l)}_{i,i'} A^{k-(m+l)}_{j',j} / A^{2k-(n+m)}_{i,j}, exactly.

    Raises UndefinedMeasureError when h^k is empty.
    """
    hits = 0
    total = 0
    for piece in hetero_pieces(spec):
        _check_window(piece, k, cylinder.halfwidth)
        sp = piece.splice(k)
        hits += sp.window_count(-cylinder.halfwidth + 1, cylinder.word)
        total += sp.size()
    if total == 0:
        raise UndefinedMeasureError(f"h^{k} is empty; the empirical measure is undefined")
    return Fraction(hits, total)


def ray_mass_product(spec: HeteroInput, pd: Optional[PerronData] = None) -> float:
    """Sum over pieces of mu^u(B_p) mu^s(C_q)."""
    total = 0.0
    for piece in hetero_pieces(spec):
        data = pd if pd is not None else compute_perron(piece.graph)
        total += ray_cylinder_mass(piece.graph, data, piece.unstable).value * \
            ray_cylinder_mass(piece.graph, data, piece.stable).value
    return total


def ratio_and_entropy_series(spec: HeteroInput, k_max: int) -> ConvergenceSeries:
    """
    lambda^{-2k} #h^k against mu^u(B) mu^s(C), and log(#h^k) / 2k against
    log(lambda), for every k up to k_max at which h^k is defined.
    """
    if k_max < 1:
        raise InputValidationError(f"k_max must be at least 1, got {k_max}")
    pieces = hetero_pieces(spec)
    g = pieces[0].graph
    pd = compute_perron(g)
    target = ray_mass_product(spec, pd)
    first = max(piece.first_k() for piece in pieces)
    logger.info(f"Growth series for k = {first}..{k_max}, target {target:.15g}")

    rows = []
    for k in range(first, k_max + 1):
        count = hetero_count(spec, k)
        scaled = _scaled(count, pd.lam, 2 * k)
        rows.append(SeriesRow(
            k=k,
            count=count,
            scaled=scaled,
            target=target,
            abs_err=abs(scaled - target),
            entropy_est=math.log(count) / (2 * k) if count > 0 else None,
        ))
    if all(row.count == 0 for row in rows):
        logger.error("Every h^k in the series is empty")
        raise UndefinedMeasureError("h^k is empty for every k in the series; anchors never connect")
    return ConvergenceSeries(rows=rows, meta={"lambda": pd.lam, "entropy": pd.entropy, "target": target})


def weak_star_report(spec: HeteroInput, k: int, l_max: int, pd: Optional[PerronData] = None) -> WeakStarReport:
    """
    mu^k_{B,C}(E) against mu(E) for every centered cylinder of halfwidth 1..l_max.
    """
    pieces = hetero_pieces(spec)
    g = pieces[0].graph
    for piece in pieces:
        _check_window(piece, k, l_max)
    total = hetero_count(spec, k)
    if total == 0:
        logger.error(f"h^{k} is empty")
        raise UndefinedMeasureError(f"h^{k} is empty; the empirical measure is undefined")
    pd = pd if pd is not None else compute_perron(g)

    splices = [piece.splice(k) for piece in pieces]
    rows = []
    for halfwidth in range(1, l_max + 1):
        for cyl in centered_cylinders(g, halfwidth):
            hits = sum(sp.window_count(-halfwidth + 1, cyl.word) for sp in splices)
            empirical = Fraction(hits, total)
            parry = centered_cylinder_mass(g, pd, cyl).value
            rows.append(WeakStarRow(cyl.label(), empirical, parry, abs(float(empirical) - parry)))
    sup = max((row.abs_err for row in rows), default=0.0)
    logger.info(f"Weak-* report at k={k}: {len(rows)} cylinders, sup deviation {sup:.3e}")
    return WeakStarReport(k=k, total_count=total, rows=rows, sup_deviation=sup)


# Irreducible (period I) case: h^k is the union over 0 <= p < I of
# sigma^{kI+p}(B) & sigma^{-kI+p}(C), and piece p is sigma^p of piece 0.


def _check_component(spec: HeteroInput, decomp: SpectralDecomposition) -> int:
    if not decomp.irreducible:
        raise InputValidationError("The irreducible construction needs an irreducible graph")
    classes = set()
    for piece in hetero_pieces(spec):
        cx = decomp.class_of(junction_vertex(piece.graph, piece.x, 0))
        cy = decomp.class_of(junction_vertex(piece.graph, piece.y, 0))
        if cx != cy:
            raise InputValidationError(f"x and y lie in different cyclic classes ({cx} != {cy})")
        classes.add(cx)
    if len(classes) > 1:
        raise InputValidationError("All pieces must lie in the same cyclic class")
    return classes.pop()


def component_perron(g: Graph, class_index: int) -> PerronData:
    """
    Perron data of the component system (D_c, sigma^I), carried to every vertex:
    u_r(w) = lambda^-r (A^r u_r^c)(w) with w reaching D_c in r steps, and
    u_l(w) = lambda^-r (u_l^c A^r)(w) with D_c reaching w in r steps.
    """
    decomp = structure_analysis(g)
    period = decomp.period
    base = decomp.cyclic_classes[class_index]
    recoded = compute_perron(power_recode(g, period, class_index))
    lam = recoded.lam ** (1.0 / period)
    right_base = np.array([recoded.right(v) for v in base])
    left_base = np.array([recoded.left(v) for v in base])

    u_r = []
    u_l = []
    for w in g.vertices:
        c = decomp.class_of(w)
        r = (class_index - c) % period
        forward = np.array(adjacency_power(g, r).submatrix([w], base), dtype=np.float64)[0]
        u_r.append(float(forward @ right_base) / lam ** r)
        r = (c - class_index) % period
        backward = np.array(adjacency_power(g, r).submatrix(base, [w]), dtype=np.float64)[:, 0]
        u_l.append(float(left_base @ backward) / lam ** r)
    return PerronData(vertices=g.vertices, lam=lam, u_r=np.array(u_r), u_l=np.array(u_l), period=period)


def irreducible_hetero_count(
    spec: HeteroInput,
    k: int,
    decomp: Optional[SpectralDecomposition] = None,
) -> Tuple[int, List[int]]:
    """
    Returns (total, per-piece counts). Every piece has A^{2kI-(n+m)}_{ij}
    points; for I = 1 this is hetero_count.
    """
    pieces = hetero_pieces(spec)
    decomp = decomp if decomp is not None else structure_analysis(pieces[0].graph)
    _check_component(spec, decomp)
    period = decomp.period
    piece_count = hetero_count(spec, k * period)
    counts = [piece_count] * period
    return sum(counts), counts


def _irreducible_targets(spec: HeteroInput, decomp: SpectralDecomposition, class_index: int) -> Dict[str, float]:
    g = hetero_pieces(spec)[0].graph
    period = decomp.period
    component = ray_mass_product(spec, component_perron(g, class_index))
    x_level = ray_mass_product(spec, compute_perron(g))
    return {
        "component_product": component,
        "x_level_product": x_level,
        "target_component": period * component,
        "target_x_level": period * x_level,
        "target_x_level_rescaled": period * period * x_level,
    }


def irreducible_series(
    spec: HeteroInput,
    k_max: int,
    decomp: Optional[SpectralDecomposition] = None,
) -> ConvergenceSeries:
    """
    lambda^{-2kI} #h^k and log(#h^k) / 2kI for the union of I pieces.

    The target column is I times the component-level ray-mass product; meta
    also records I times the X-level product and I^2 times it.
    """
    if k_max < 1:
        raise InputValidationError(f"k_max must be at least 1, got {k_max}")
    pieces = hetero_pieces(spec)
    g = pieces[0].graph
    decomp = decomp if decomp is not None else structure_analysis(g)
    class_index = _check_component(spec, decomp)
    period = decomp.period
    pd = compute_perron(g)
    targets = _irreducible_targets(spec, decomp, class_index)
    target = targets["target_component"]
    if abs(targets["target_x_level"] - target) > 1e-12:
        logger.warning(
            f"Normalization conventions disagree: I*component={target:.15g}, "
            f"I*X-level={targets['target_x_level']:.15g}"
        )

    first = max(-(-piece.first_k() // period) for piece in pieces)
    rows = []
    for k in range(first, k_max + 1):
        total, _ = irreducible_hetero_count(spec, k, decomp)
        scaled = _scaled(total, pd.lam, 2 * k * period)
        rows.append(SeriesRow(
            k=k,
            count=total,
            scaled=scaled,
            target=target,
            abs_err=abs(scaled - target),
            entropy_est=math.log(total) / (2 * k * period) if total > 0 else None,
        ))
    if all(row.count == 0 for row in rows):
        logger.error("Every h^k in the series is empty")
        raise UndefinedMeasureError("h^k is empty for every k in the series; anchors never connect")
    meta = {"lambda": pd.lam, "entropy": pd.entropy, "period": period, "class": class_index}
    meta.update(targets)
    return ConvergenceSeries(rows=rows, meta=meta)


def irreducible_weak_star_report(
    spec: HeteroInput,
    k: int,
    l_max: int,
    decomp: Optional[SpectralDecomposition] = None,
) -> WeakStarReport:
    """
    Empirical measure over the union of the I pieces against mu_X on centered
    cylinders of halfwidth 1..l_max. Piece weights are reported.
    """
    pieces = hetero_pieces(spec)
    g = pieces[0].graph
    decomp = decomp if decomp is not None else structure_analysis(g)
    class_index = _check_component(spec, decomp)
    period = decomp.period
    big_k = k * period
    for piece in pieces:
        _check_window(piece, big_k - period + 1, l_max)

    total, counts = irreducible_hetero_count(spec, k, decomp)
    if total == 0:
        logger.error(f"Every piece of h^{k} is empty")
        raise UndefinedMeasureError(f"h^{k} is empty; the empirical measure is undefined")
    pd = compute_perron(g)
    splices = [piece.splice(big_k) for piece in pieces]

    rows = []
    for halfwidth in range(1, l_max + 1):
        for cyl in centered_cylinders(g, halfwidth):
            # a point of piece p is sigma^p of a point of piece 0
            hits = sum(
                sp.window_count(-halfwidth + 1 + p, cyl.word)
                for sp in splices
                for p in range(period)
            )
            empirical = Fraction(hits, total)
            parry = centered_cylinder_mass(g, pd, cyl).value
            rows.append(WeakStarRow(cyl.label(), empirical, parry, abs(float(empirical) - parry)))
    sup = max((row.abs_err for row in rows), default=0.0)
    weights = [Fraction(c, total) for c in counts]
    logger.info(f"Irreducible weak-* report at k={k} (I={period}): sup deviation {sup:.3e}")
    return WeakStarReport(
        k=k,
        total_count=total,
        rows=rows,
        sup_deviation=sup,
        piece_weights=weights,
        meta={"period": period, "class": class_index},
    )
