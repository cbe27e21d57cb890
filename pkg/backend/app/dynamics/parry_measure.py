import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from app.core.errors import InputValidationError
from app.dynamics.graph_core import Graph
from app.dynamics.perron import PerronData
from app.dynamics.shift_space import (
    CenteredCylinder,
    ProductSet,
    RayCylinder,
    bracket,
    junction_vertex,
    make_ray_cylinder,
    point_through,
    product_set,
    shift_point,
)

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MeasureValue:
    """
    A Parry (or ray) mass together with its exact shape
    lambda^{-lambda_power} * u_l(left_vertex) * u_r(right_vertex); a missing
    vertex means the factor is absent.
    """
    value: float
    lambda_power: Optional[int] = None
    left_vertex: Optional[str] = None
    right_vertex: Optional[str] = None


@dataclass(frozen=True)
class CheckReport:
    lhs: float
    rhs: float
    abs_err: float
    config: Dict[str, Any] = field(default_factory=dict)

    def as_row(self) -> Dict[str, Any]:
        return {"lhs": self.lhs, "rhs": self.rhs, "abs_err": self.abs_err, "config": self.config}


@dataclass(frozen=True)
class ConformalityReport:
    side: str
    mass: float
    shifted_mass: float
    expected_shifted_mass: float
    conformality_err: float
    transport_base: Optional[Dict[str, Any]]
    transported_mass: Optional[float]
    transport_err: Optional[float]


def centered_cylinder_mass(g: Graph, pd: PerronData, cylinder: CenteredCylinder) -> MeasureValue:
    """mu(E) = lambda^{-2l} u_l(i') u_r(j')."""
    power = 2 * cylinder.halfwidth
    value = pd.lam ** (-power) * pd.left(cylinder.left_anchor) * pd.right(cylinder.right_anchor)
    return MeasureValue(value, power, cylinder.left_anchor, cylinder.right_anchor)


def word_mass(pd: PerronData, g: Graph, word) -> float:
    """Parry mass of the cylinder fixing word on any window of its length."""
    return pd.lam ** (-len(word)) * pd.left(g.source(word[0])) * pd.right(g.target(word[-1]))


def ray_cylinder_mass(g: Graph, pd: PerronData, ray: RayCylinder) -> MeasureValue:
    """
    Unstable ray: lambda^{-n} u_r(anchor). Stable ray: lambda^{-m} u_l(anchor).

    These are densities of infinite measures and may exceed 1.
    """
    if ray.side == "unstable":
        return MeasureValue(pd.lam ** (-ray.parameter) * pd.right(ray.anchor), ray.parameter, None, ray.anchor)
    return MeasureValue(pd.lam ** (-ray.parameter) * pd.left(ray.anchor), ray.parameter, ray.anchor, None)


def refinements(g: Graph, cylinder: CenteredCylinder) -> List[CenteredCylinder]:
    """Halfwidth l + 1 cylinders obtained by adding one edge on each side."""
    found = []
    for before in g.in_edges(cylinder.left_anchor):
        for after in g.out_edges(cylinder.right_anchor):
            word = (before.id,) + cylinder.word + (after.id,)
            found.append(CenteredCylinder(word, cylinder.halfwidth + 1, before.source, after.target))
    return found


def shift_preimage(g: Graph, cylinder: CenteredCylinder) -> List[CenteredCylinder]:
    """
    sigma^{-1}(E) as halfwidth l + 1 cylinders: the word moves one place to the
    right, so two free edges are prepended.
    """
    found = []
    for second in g.in_edges(cylinder.left_anchor):
        for first in g.in_edges(second.source):
            word = (first.id, second.id) + cylinder.word
            found.append(CenteredCylinder(word, cylinder.halfwidth + 1, first.source, cylinder.right_anchor))
    return found


def product_mass_check(g: Graph, pd: PerronData, product: ProductSet) -> CheckReport:
    """
    Compare mu([B, C]) summed over its cylinder decomposition with
    mu^u(B) * mu^s(C).
    """
    if product.empty:
        raise InputValidationError("Product set is empty: ray anchors do not meet")
    pieces = product.cylinders(g)
    lhs = sum(centered_cylinder_mass(g, pd, cyl).value for cyl in pieces)
    rhs = ray_cylinder_mass(g, pd, product.unstable).value * ray_cylinder_mass(g, pd, product.stable).value
    return CheckReport(
        lhs=lhs,
        rhs=rhs,
        abs_err=abs(lhs - rhs),
        config={
            "n": product.unstable.parameter,
            "m": product.stable.parameter,
            "junction": product.junction,
            "cylinders": len(pieces),
        },
    )


def transported_ray_mass(g: Graph, pd: PerronData, ray: RayCylinder) -> float:
    """
    Mass of a local ray read off Parry cylinder masses: mu([B, C]) / mu^s(C) for
    an unstable B, mu([B, C]) / mu^u(B) for a stable C, with the opposite ray
    taken through the same base at parameter 0.
    """
    if ray.side == "unstable":
        opposite = make_ray_cylinder(g, "stable", ray.base, 0)
        product = product_set(g, ray, opposite)
    else:
        opposite = make_ray_cylinder(g, "unstable", ray.base, 0)
        product = product_set(g, opposite, ray)
    total = sum(centered_cylinder_mass(g, pd, cyl).value for cyl in product.cylinders(g))
    return total / ray_cylinder_mass(g, pd, opposite).value


def conformality_report(g: Graph, pd: PerronData, ray: RayCylinder, transport_to=None) -> ConformalityReport:
    """
    Check mu^u(sigma B) = lambda mu^u(B) / mu^s(sigma C) = lambda^{-1} mu^s(C)
    and invariance under bracket transport to a nearby base point. The
    transported mass is measured through product-set cylinders, not through
    the ray formula.

    Parameters:
    - ray: the ray cylinder to test
    - transport_to: base point for the bracket transport; defaults to the
      canonical point through the ray's 0/1 junction vertex

    Returns:
    - ConformalityReport (transport fields are None for non-local rays)
    """
    mass = ray_cylinder_mass(g, pd, ray).value
    if ray.side == "unstable":
        shifted = make_ray_cylinder(g, "unstable", shift_point(ray.base, 1), ray.parameter - 1)
        expected = pd.lam * mass
    else:
        shifted = make_ray_cylinder(g, "stable", shift_point(ray.base, 1), ray.parameter + 1)
        expected = mass / pd.lam
    shifted_mass = ray_cylinder_mass(g, pd, shifted).value

    transport_base = None
    transported_mass = None
    transport_err = None
    if ray.parameter >= 0:
        other = transport_to if transport_to is not None else point_through(g, junction_vertex(g, ray.base, 0))
        # [B, x'] keeps the future of B; [y', C] keeps the past of C
        moved = bracket(g, ray.base, other) if ray.side == "unstable" else bracket(g, other, ray.base)
        if moved is not None:
            transported = make_ray_cylinder(g, ray.side, moved, ray.parameter)
            transported_mass = transported_ray_mass(g, pd, transported)
            transport_err = abs(transported_mass - mass)
            transport_base = other.to_spec()
        else:
            logger.warning("Bracket transport undefined: junction vertices differ")

    return ConformalityReport(
        side=ray.side,
        mass=mass,
        shifted_mass=shifted_mass,
        expected_shifted_mass=expected,
        conformality_err=abs(shifted_mass - expected),
        transport_base=transport_base,
        transported_mass=transported_mass,
        transport_err=transport_err,
    )
