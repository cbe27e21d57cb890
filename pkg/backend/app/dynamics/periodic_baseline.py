import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Tuple

from app.core.config import settings
from app.core.errors import CapExceededError, InputValidationError
from app.dynamics.graph_core import Graph, adjacency_power
from app.dynamics.heteroclinic import HeteroInput, empirical_cylinder_mass, hetero_pieces
from app.dynamics.parry_measure import centered_cylinder_mass
from app.dynamics.perron import compute_perron
from app.dynamics.shift_space import CenteredCylinder, ShiftPoint, centered_cylinders, periodic_point

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def _mobius(n: int) -> int:
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


def least_period_count(g: Graph, p: int) -> int:
    """Number of points of least period p: sum over d | p of mobius(d) tr(A^{p/d})."""
    return sum(_mobius(d) * adjacency_power(g, p // d).trace() for d in range(1, p + 1) if p % d == 0)


def periodic_total(g: Graph, n: int) -> int:
    """#S_n, the number of points fixed by sigma^j for some j <= n."""
    return sum(least_period_count(g, p) for p in range(1, n + 1))


@dataclass(frozen=True)
class PeriodicEnsemble:
    """
    S_n stored as primitive cycles (Lyndon words in edge-id order). Each cycle
    of length p stands for its p phases.
    """
    graph: Graph
    n: int
    orbits: Tuple[Tuple[str, ...], ...]
    total: int
    _histograms: Dict[int, Counter] = field(default_factory=dict, init=False, repr=False, compare=False)

    def points(self) -> Iterator[ShiftPoint]:
        for cycle in self.orbits:
            for phase in range(len(cycle)):
                yield periodic_point(self.graph, cycle, phase)

    def window_histogram(self, halfwidth: int) -> Counter:
        """Counts of the words seen on coordinates -l+1..l over all points."""
        if halfwidth not in self._histograms:
            hist: Counter = Counter()
            for cycle in self.orbits:
                p = len(cycle)
                for phase in range(p):
                    # z_t = cycle[(t + phase) mod p]
                    hist[tuple(cycle[(t + phase) % p] for t in range(-halfwidth + 1, halfwidth + 1))] += 1
            self._histograms[halfwidth] = hist
        return self._histograms[halfwidth]


def _lyndon_cycles(g: Graph, n: int) -> Iterator[Tuple[str, ...]]:
    """
    Closed paths of length <= n that are Lyndon words, in lexicographic order.

    This is the prenecklace recursion with branches cut as soon as the prefix
    stops being a path; prefixes of closed paths are paths, so nothing is lost.
    """
    edges = g.edges
    word: List[int] = []

    def extend(period: int) -> Iterator[Tuple[str, ...]]:
        t = len(word)
        first, last = edges[word[0]], edges[word[-1]]
        if period == t and last.target == first.source:
            yield tuple(edges[w].id for w in word)
        if t == n:
            return
        for j in range(word[t - period], len(edges)):
            if edges[j].source != last.target:
                continue
            word.append(j)
            yield from extend(period if j == word[t - period] else t + 1)
            word.pop()

    for start in range(len(edges)):
        word.append(start)
        yield from extend(1)
        word.pop()


def enumerate_periodic(g: Graph, n: int, cap: Optional[int] = None) -> PeriodicEnsemble:
    """
    Enumerate S_n orbit by orbit.

    Parameters:
    - g: graph
    - n: period bound
    - cap: largest #S_n that may be enumerated (defaults to ENUMERATION_CAP)

    Returns:
    - PeriodicEnsemble whose size agrees with the trace formula
    """
    if n < 1:
        raise InputValidationError(f"Period bound must be positive, got {n}")
    cap = settings.ENUMERATION_CAP if cap is None else cap
    expected = periodic_total(g, n)
    if expected > cap:
        logger.error(f"S_{n} has {expected} points, above cap {cap}")
        raise CapExceededError(f"S_{n} has {expected} points, cap is {cap}", expected)

    logger.info(f"Enumerating {expected} periodic points of least period <= {n}")
    orbits = tuple(_lyndon_cycles(g, n))
    total = sum(len(cycle) for cycle in orbits)
    if total != expected:
        raise InputValidationError(f"Orbit enumeration found {total} points, trace formula gives {expected}")
    return PeriodicEnsemble(graph=g, n=n, orbits=orbits, total=total)


def periodic_measure_mass(ens: PeriodicEnsemble, cylinder: CenteredCylinder) -> Fraction:
    """mu_n(E): the fraction of S_n whose centered window spells E's word."""
    hits = ens.window_histogram(cylinder.halfwidth).get(tuple(cylinder.word), 0)
    return Fraction(hits, ens.total)


@dataclass(frozen=True)
class ComparisonRow:
    cylinder: str
    periodic: Fraction
    heteroclinic: Fraction
    parry: float

    def as_row(self) -> Dict[str, Any]:
        return {
            "cylinder": self.cylinder,
            "periodic": float(self.periodic),
            "heteroclinic": float(self.heteroclinic),
            "parry": self.parry,
        }


@dataclass(frozen=True)
class ComparisonReport:
    rows: List[ComparisonRow]
    sup_periodic_vs_parry: float
    sup_heteroclinic_vs_parry: float
    sup_periodic_vs_heteroclinic: float
    meta: Dict[str, Any] = field(default_factory=dict)


def compare_constructions(
    g: Graph,
    spec: HeteroInput,
    k: int,
    n: int,
    l_max: int,
    cap: Optional[int] = None,
) -> ComparisonReport:
    """mu_n, mu^k_{B,C} and the Parry measure side by side on cylinders of halfwidth <= l_max."""
    for piece in hetero_pieces(spec):
        need = max(piece.n, piece.m) + l_max
        if k < need:
            raise InputValidationError(f"Cylinders of halfwidth {l_max} need k >= {need}, got k={k}")
    ens = enumerate_periodic(g, n, cap)
    pd = compute_perron(g)

    rows = []
    for halfwidth in range(1, l_max + 1):
        for cyl in centered_cylinders(g, halfwidth):
            rows.append(ComparisonRow(
                cylinder=cyl.label(),
                periodic=periodic_measure_mass(ens, cyl),
                heteroclinic=empirical_cylinder_mass(spec, k, cyl),
                parry=centered_cylinder_mass(g, pd, cyl).value,
            ))
    report = ComparisonReport(
        rows=rows,
        sup_periodic_vs_parry=max(abs(float(r.periodic) - r.parry) for r in rows),
        sup_heteroclinic_vs_parry=max(abs(float(r.heteroclinic) - r.parry) for r in rows),
        sup_periodic_vs_heteroclinic=max(abs(float(r.periodic - r.heteroclinic)) for r in rows),
        meta={"n": n, "k": k, "l_max": l_max, "periodic_total": ens.total},
    )
    logger.info(
        f"Compared constructions on {len(rows)} cylinders: "
        f"periodic {report.sup_periodic_vs_parry:.3e}, heteroclinic {report.sup_heteroclinic_vs_parry:.3e}"
    )
    return report
