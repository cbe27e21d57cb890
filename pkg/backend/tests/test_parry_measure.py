import math

import numpy as np
import pytest

from app.core.errors import InputValidationError
from app.dynamics.parry_measure import (
    centered_cylinder_mass,
    conformality_report,
    product_mass_check,
    ray_cylinder_mass,
    refinements,
    shift_preimage,
    transported_ray_mass,
    word_mass,
)
from app.dynamics.periodic_baseline import enumerate_periodic
from app.dynamics.perron import PerronData, compute_perron
from app.dynamics.shift_space import (
    centered_cylinders,
    junction_vertex,
    make_centered_cylinder,
    make_ray_cylinder,
    periodic_point,
    product_set,
)


def test_cylinder_masses(golden, full2, period2):
    pd = compute_perron(full2)
    assert centered_cylinder_mass(full2, pd, make_centered_cylinder(full2, ["0", "1"])).value == pytest.approx(0.25)

    pd = compute_perron(golden)
    value = centered_cylinder_mass(golden, pd, make_centered_cylinder(golden, ["a", "a"]))
    assert value.value == pytest.approx(0.2763932, abs=1e-7)
    assert (value.lambda_power, value.left_vertex, value.right_vertex) == (2, "1", "1")
    assert word_mass(pd, golden, ["a", "a"]) == pytest.approx(value.value)

    pd = compute_perron(period2)
    assert centered_cylinder_mass(period2, pd, make_centered_cylinder(period2, ["p", "r"])).value == pytest.approx(0.125)


def test_ray_masses(golden, gm_a):
    pd = compute_perron(golden)
    unstable = ray_cylinder_mass(golden, pd, make_ray_cylinder(golden, "unstable", gm_a, 2))
    assert unstable.value == pytest.approx(0.6180340 / (1.6180340 ** 2), abs=1e-7)
    stable = ray_cylinder_mass(golden, pd, make_ray_cylinder(golden, "stable", gm_a, 0))
    assert stable.value == pytest.approx(1.1708204, abs=1e-7)
    # stable ray densities may exceed 1
    assert stable.value > 1


def test_normalization(golden, full2, period2):
    for g in (golden, full2, period2):
        pd = compute_perron(g)
        for halfwidth in range(1, 5):
            total = sum(centered_cylinder_mass(g, pd, cyl).value for cyl in centered_cylinders(g, halfwidth))
            assert total == pytest.approx(1.0, abs=1e-12)


def test_additivity_and_invariance(golden, period2):
    for g in (golden, period2):
        pd = compute_perron(g)
        for halfwidth in (1, 2):
            for cyl in centered_cylinders(g, halfwidth):
                mass = centered_cylinder_mass(g, pd, cyl).value
                finer = sum(centered_cylinder_mass(g, pd, c).value for c in refinements(g, cyl))
                preimage = sum(centered_cylinder_mass(g, pd, c).value for c in shift_preimage(g, cyl))
                assert finer == pytest.approx(mass, abs=1e-12)
                assert preimage == pytest.approx(mass, abs=1e-12)


def test_product_mass_examples(golden, full2, period2, gm_a):
    pd = compute_perron(full2)
    x = periodic_point(full2, ["0"])
    report = product_mass_check(full2, pd, product_set(
        full2, make_ray_cylinder(full2, "unstable", x, 0), make_ray_cylinder(full2, "stable", x, 0)))
    assert report.lhs == pytest.approx(1.0) and report.abs_err < 1e-12

    pd = compute_perron(period2)
    x = periodic_point(period2, ["p", "r"])
    report = product_mass_check(period2, pd, product_set(
        period2, make_ray_cylinder(period2, "unstable", x, 0), make_ray_cylinder(period2, "stable", x, 0)))
    assert report.lhs == pytest.approx(0.5) and report.abs_err < 1e-12
    assert report.config["cylinders"] == 4

    pd = compute_perron(golden)
    report = product_mass_check(golden, pd, product_set(
        golden, make_ray_cylinder(golden, "unstable", gm_a, 0), make_ray_cylinder(golden, "stable", gm_a, 0)))
    assert report.lhs == pytest.approx(0.7236068, abs=1e-7)


def test_product_mass_rejects_empty(golden, gm_a, gm_bc):
    pd = compute_perron(golden)
    product = product_set(
        golden, make_ray_cylinder(golden, "unstable", gm_a, 0), make_ray_cylinder(golden, "stable", gm_bc, 0))
    with pytest.raises(InputValidationError):
        product_mass_check(golden, pd, product)


def test_conformality_examples(golden, full2, gm_a, gm_cb):
    pd = compute_perron(golden)
    report = conformality_report(golden, pd, make_ray_cylinder(golden, "unstable", gm_a, 2))
    assert report.shifted_mass == pytest.approx(pd.lam * report.mass, abs=1e-12)
    assert report.conformality_err < 1e-12
    assert report.transport_err < 1e-10

    report = conformality_report(golden, pd, make_ray_cylinder(golden, "unstable", gm_a, 0), transport_to=gm_cb)
    assert report.transport_base == gm_cb.to_spec()
    assert report.transport_err < 1e-10

    pd = compute_perron(full2)
    x = periodic_point(full2, ["0"])
    report = conformality_report(full2, pd, make_ray_cylinder(full2, "stable", x, 3))
    assert report.shifted_mass == pytest.approx(2.0 ** -4)


def _points_by_junction(g, bound=4):
    """Every periodic point of period <= bound, grouped by its 0/1 junction vertex."""
    groups = {}
    for cycle in enumerate_periodic(g, bound).orbits:
        for phase in range(len(cycle)):
            z = periodic_point(g, cycle, phase)
            groups.setdefault(junction_vertex(g, z, 0), []).append(z)
    return groups


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


@pytest.mark.parametrize("name", ["golden", "full2", "period2"])
def test_product_and_conformality_randomized(name, request):
    g = request.getfixturevalue(name)
    pd = compute_perron(g)
    groups = _points_by_junction(g)
    assert set(groups) == set(g.vertices)
    rng = np.random.default_rng(20240611)
    for _ in range(1000):
        junction = _pick(rng, g.vertices)
        x, y, other = (_pick(rng, groups[junction]) for _ in range(3))
        n, m = int(rng.integers(0, 4)), int(rng.integers(0, 4))
        unstable = make_ray_cylinder(g, "unstable", x, n)
        stable = make_ray_cylinder(g, "stable", y, m)

        check = product_mass_check(g, pd, product_set(g, unstable, stable))
        assert math.isclose(check.lhs, check.rhs, rel_tol=1e-10, abs_tol=1e-14)

        for ray in (unstable, stable):
            report = conformality_report(g, pd, ray, transport_to=other)
            assert report.conformality_err <= 1e-12 * max(1.0, report.expected_shifted_mass)
            assert report.transport_err is not None
            assert report.transport_err <= 1e-10 * max(1.0, report.mass)


def test_transport_detects_inconsistent_eigendata(golden, gm_a, gm_cb):
    pd = compute_perron(golden)
    broken = PerronData(vertices=pd.vertices, lam=pd.lam, u_r=[0.7, 0.3], u_l=pd.u_l)
    report = conformality_report(golden, broken, make_ray_cylinder(golden, "unstable", gm_a, 0), transport_to=gm_cb)
    assert report.mass == pytest.approx(0.7)
    assert report.transported_mass == pytest.approx(1 / pd.lam)
    assert report.transport_err > 0.05


def test_transported_ray_mass_matches_formula(golden, gm_a, gm_bc):
    pd = compute_perron(golden)
    for base in (gm_a, gm_bc):
        for side in ("unstable", "stable"):
            for parameter in range(4):
                ray = make_ray_cylinder(golden, side, base, parameter)
                assert transported_ray_mass(golden, pd, ray) == pytest.approx(
                    ray_cylinder_mass(golden, pd, ray).value, rel=1e-10)
