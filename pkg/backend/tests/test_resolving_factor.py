import numpy as np
import pytest

from app.core.errors import InputValidationError
from app.dynamics.graph_core import Edge, Graph
from app.dynamics.heteroclinic import make_hetero_spec
from app.dynamics.perron import compute_perron
from app.dynamics.resolving_factor import (
    almost_one_to_one_probe,
    cylinder_preimage,
    fiber_decomposition,
    fiber_size,
    gauge,
    higher_block_code,
    lift_point,
    lifted_hetero_counts,
    pushforward_check,
    pushforward_family,
    pushforward_su_measures,
    resolving_type,
    validate_code,
)
from app.dynamics.shift_space import make_centered_cylinder, make_point, make_ray_cylinder, periodic_point


def _identity(g):
    return validate_code(g, g, {e.id: e.id for e in g.edges}, name="identity")


def test_validate_code(golden, full2, code_2block):
    assert code_2block.vertex_map == {"a": "1", "b": "2", "c": "1"}
    single = Graph(("v",), (Edge("x", "v", "v"),))
    collapse = validate_code(golden, single, {"a": "x", "b": "x", "c": "x"})
    assert collapse.vertex_map == {"1": "v", "2": "v"}

    with pytest.raises(InputValidationError):
        validate_code(golden, full2, {"a": "0", "b": "0", "c": "0"})
    with pytest.raises(InputValidationError):
        validate_code(golden, golden, {"a": "b", "b": "b", "c": "c"})
    with pytest.raises(InputValidationError):
        validate_code(golden, golden, {"a": "a", "b": "b"})
    with pytest.raises(InputValidationError):
        validate_code(golden, golden, {"a": "a", "b": "b", "c": "c", "z": "a"})
    with pytest.raises(InputValidationError):
        validate_code(golden, golden, {"a": "a", "b": "b", "c": "q"})


def test_higher_block_code_matches_file(golden, code_2block):
    code = higher_block_code(golden)
    assert dict(code.edge_map) == dict(code_2block.edge_map)
    assert code.domain == code_2block.domain
    with pytest.raises(InputValidationError):
        higher_block_code(golden, keep="middle")


def test_resolving_type(golden):
    assert resolving_type(higher_block_code(golden, "last")) == {"right_resolving": True, "left_resolving": False}
    assert resolving_type(higher_block_code(golden, "first")) == {"right_resolving": False, "left_resolving": True}
    assert resolving_type(_identity(golden)) == {"right_resolving": True, "left_resolving": True}


def test_cylinder_preimage(golden, code_2block):
    cyl = make_centered_cylinder(golden, ["a", "a"])
    assert cylinder_preimage(_identity(golden), cyl) == [cyl]
    words = [c.word for c in cylinder_preimage(code_2block, cyl)]
    assert words == [("(a,a)", "(a,a)"), ("(c,a)", "(a,a)")]


def test_fiber_sizes(golden, code_2block, code_doubling):
    for cycle in (("a",), ("b", "c"), ("a", "b", "c")):
        assert fiber_size(_identity(golden), cycle) == 1
        assert fiber_size(code_2block, cycle) == 1
        assert fiber_size(code_doubling, cycle) == 2
    single = Graph(("v",), (Edge("x", "v", "v"),))
    collapse = validate_code(golden, single, {"a": "x", "b": "x", "c": "x"})
    assert fiber_size(collapse, ("x",)) is None


def test_probe(golden, code_2block, code_doubling):
    report = almost_one_to_one_probe(_identity(golden), 4)
    assert report.histogram == {"1": 10}
    assert report.almost_one_to_one

    report = almost_one_to_one_probe(code_2block, 6)
    assert report.min_fiber == 1 and report.almost_one_to_one

    report = almost_one_to_one_probe(code_doubling, 6)
    assert report.min_fiber == 2
    assert not report.almost_one_to_one
    assert "not a proof" in report.as_dict()["limitation"]


def test_lift_point(golden, code_2block, gm_bc):
    for z in (gm_bc, make_point(golden, ["a"], ["b", "c"], ["a"]), make_point(golden, ["b", "c"], ["a", "a"], ["a"], 2)):
        lifted = lift_point(code_2block, z)
        assert lifted is not None
        assert code_2block.word_image(lifted.window(-8, 8)) == z.window(-8, 8)


def test_lift_point_doubling(code_doubling, golden):
    z = periodic_point(golden, ["a"])
    lifted = lift_point(code_doubling, z)
    assert code_doubling.word_image(lifted.window(-3, 3)) == z.window(-3, 3)


def test_pushforward(golden, code_2block):
    report = pushforward_check(code_2block, make_centered_cylinder(golden, ["a", "a"]))
    assert report.lhs == pytest.approx(0.2763932, abs=1e-7)
    assert report.abs_err < 1e-10
    assert report.config["preimages"] == 2

    checks = pushforward_family(code_2block, 3)
    assert max(check.abs_err for check in checks) < 1e-10

    checks = pushforward_family(_identity(golden), 2)
    assert all(check.abs_err == 0.0 for check in checks)


def test_pushforward_needs_degree_one(golden, code_doubling):
    with pytest.raises(InputValidationError):
        pushforward_check(code_doubling, make_centered_cylinder(golden, ["a", "a"]))


def test_fiber_decomposition(golden, code_2block, gm_a, gm_bc):
    decomposition = fiber_decomposition(code_2block, make_ray_cylinder(golden, "stable", gm_a, 2))
    assert [c.anchor for c in decomposition.components] == ["a", "c"]
    assert decomposition.bound == 2
    assert decomposition.pairwise_disjoint()
    for component in decomposition.components:
        assert component.parameter == 2
        assert code_2block.word_image(component.base.window(-1, 6)) == gm_a.window(-1, 6)

    decomposition = fiber_decomposition(code_2block, make_ray_cylinder(golden, "stable", gm_bc, 0))
    assert [c.anchor for c in decomposition.components] == ["b"]

    with pytest.raises(InputValidationError):
        fiber_decomposition(code_2block, make_ray_cylinder(golden, "unstable", gm_a, 0))
    with pytest.raises(InputValidationError):
        fiber_decomposition(higher_block_code(golden, "first"), make_ray_cylinder(golden, "stable", gm_a, 0))


def test_gauge(golden, code_2block):
    pd_domain = compute_perron(code_2block.domain)
    pd_codomain = compute_perron(golden)
    c, spread = gauge(code_2block, pd_domain, pd_codomain)
    assert c == pytest.approx(pd_codomain.lam, abs=1e-10)
    assert spread < 1e-10


def test_su_measures(golden, code_2block, gm_a):
    report = pushforward_su_measures(code_2block, make_ray_cylinder(golden, "stable", gm_a, 0))
    assert report.codomain_mass == pytest.approx(1.1708204, abs=1e-7)
    assert report.abs_err < 1e-10
    assert report.components == 2

    report = pushforward_su_measures(code_2block, make_ray_cylinder(golden, "unstable", gm_a, 0))
    assert report.codomain_mass == pytest.approx(0.6180340, abs=1e-7)
    assert report.abs_err < 1e-10

    identity = _identity(golden)
    report = pushforward_su_measures(identity, make_ray_cylinder(golden, "stable", gm_a, 3))
    assert report.gauge == pytest.approx(1.0)
    assert report.abs_err < 1e-12


def test_lifted_counts(golden, code_2block, gm_a, gm_bc):
    for y in (gm_a, gm_bc):
        spec = make_hetero_spec(golden, gm_a, y, 0, 0)
        for k in range(1, 9):
            down, up = lifted_hetero_counts(code_2block, spec, k)
            assert down == up


def test_lifted_counts_randomized(golden, code_2block):
    rng = np.random.default_rng(11)
    cycles = (("a",), ("b", "c"), ("a", "b", "c"), ("a", "a", "b", "c"))
    for _ in range(20):
        x_cycle, y_cycle = (cycles[int(rng.integers(len(cycles)))] for _ in range(2))
        x = periodic_point(golden, x_cycle, int(rng.integers(len(x_cycle))))
        y = periodic_point(golden, y_cycle, int(rng.integers(len(y_cycle))))
        n, m = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        spec = make_hetero_spec(golden, x, y, n, m)
        decomposition = fiber_decomposition(code_2block, spec.stable)
        assert len(decomposition.components) <= decomposition.bound
        for k in range(spec.first_k(), 7):
            down, up = lifted_hetero_counts(code_2block, spec, k)
            assert down == up
