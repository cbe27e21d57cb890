import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel, Field

from app.core.config import settings
from app.core.errors import InputValidationError
from app.dynamics.graph_core import Graph, structure_analysis
from app.dynamics.heteroclinic import (
    HeteroInput,
    hetero_count,
    hetero_enumerate,
    hetero_pieces,
    irreducible_series,
    irreducible_weak_star_report,
    make_hetero_family,
    ratio_and_entropy_series,
    weak_star_report,
)
from app.dynamics.parry_measure import (
    centered_cylinder_mass,
    conformality_report,
    product_mass_check,
)
from app.dynamics.periodic_baseline import compare_constructions, enumerate_periodic, periodic_measure_mass
from app.dynamics.perron import compute_perron
from app.dynamics.resolving_factor import (
    OneBlockCode,
    almost_one_to_one_probe,
    lifted_hetero_counts,
    pushforward_family,
    pushforward_su_measures,
    resolving_type,
)
from app.dynamics.shift_space import (
    ShiftPoint,
    centered_cylinders,
    make_centered_cylinder,
    make_ray_cylinder,
    product_set,
)

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class ExperimentParams(BaseModel):
    """Numeric parameters shared by every experiment."""
    n: List[int] = Field(default_factory=lambda: [0])
    m: List[int] = Field(default_factory=lambda: [0])
    k: Optional[int] = Field(default=None, ge=1)
    k_max: int = Field(default=30, ge=1)
    l_max: int = Field(default=2, ge=1, le=8)
    period_bound: Optional[int] = Field(default=None, ge=1)
    cap: Optional[int] = Field(default=None, ge=0)
    word: Optional[List[str]] = None
    list_paths: bool = False


@dataclass
class ExperimentInputs:
    graph: Optional[Graph] = None
    xs: List[ShiftPoint] = field(default_factory=list)
    ys: List[ShiftPoint] = field(default_factory=list)
    code: Optional[OneBlockCode] = None


@dataclass
class ExperimentReport:
    command: str
    columns: List[str]
    rows: List[Dict[str, Any]]
    meta: Dict[str, Any] = field(default_factory=dict)


def _broadcast(values: List[int], count: int, name: str) -> List[int]:
    if len(values) == count:
        return values
    if len(values) == 1:
        return values * count
    raise InputValidationError(f"Got {len(values)} values for -{name} but {count} points")


class ExperimentManager:
    def __init__(self):
        self.experiments: Dict[str, Callable[[ExperimentInputs, ExperimentParams], ExperimentReport]] = {
            "analyze": self._analyze,
            "perron": self._perron,
            "parry": self._parry,
            "hetero-count": self._hetero_count,
            "hetero-series": self._hetero_series,
            "weak-star": self._weak_star,
            "irreducible-series": self._irreducible_series,
            "periodic": self._periodic,
            "compare": self._compare,
            "code-check": self._code_check,
            "pushforward": self._pushforward,
        }

    def run(self, command: str, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        """
        Run one experiment.

        Parameters:
        - command: experiment name
        - inputs: resolved graph, points and code
        - params: numeric parameters

        Returns:
        - ExperimentReport with column order fixed per command
        """
        if command not in self.experiments:
            logger.warning(f"Unknown experiment: {command}")
            raise InputValidationError(f"Unknown experiment: {command}")
        logger.info(f"Running experiment: {command}")
        report = self.experiments[command](inputs, params)
        logger.info(f"Experiment {command} produced {len(report.rows)} rows")
        return report

    # input helpers

    def _graph(self, inputs: ExperimentInputs) -> Graph:
        if inputs.graph is not None:
            return inputs.graph
        if inputs.code is not None:
            return inputs.code.codomain
        raise InputValidationError("A graph is required")

    def _code(self, inputs: ExperimentInputs) -> OneBlockCode:
        if inputs.code is None:
            raise InputValidationError("A code is required")
        return inputs.code

    def _k(self, params: ExperimentParams) -> int:
        if params.k is None:
            raise InputValidationError("This experiment needs -k")
        return params.k

    def _hetero(self, inputs: ExperimentInputs, params: ExperimentParams) -> HeteroInput:
        if not inputs.xs or not inputs.ys:
            raise InputValidationError("Heteroclinic experiments need --x and --y points")
        g = self._graph(inputs)
        ns = _broadcast(params.n, len(inputs.xs), "n")
        ms = _broadcast(params.m, len(inputs.ys), "m")
        return make_hetero_family(g, list(zip(inputs.xs, ns)), list(zip(inputs.ys, ms)))

    # experiments

    def _analyze(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        g = self._graph(inputs)
        decomp = structure_analysis(g)
        meta: Dict[str, Any] = {
            "vertices": len(g.vertices),
            "edges": len(g.edges),
            "irreducible": decomp.irreducible,
            "period": decomp.period,
            "cyclic_classes": [list(cls) for cls in decomp.cyclic_classes],
        }
        rows = []
        for v in g.vertices:
            row: Dict[str, Any] = {
                "vertex": v,
                "out_degree": len(g.out_edges(v)),
                "in_degree": len(g.in_edges(v)),
                "class": decomp.class_of(v) if decomp.irreducible else None,
            }
            rows.append(row)
        if decomp.irreducible:
            pd = compute_perron(g)
            meta["lambda"] = pd.lam
            meta["entropy"] = pd.entropy
        return ExperimentReport("analyze", ["vertex", "out_degree", "in_degree", "class"], rows, meta)

    def _perron(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        pd = compute_perron(self._graph(inputs))
        rows = [{"vertex": v, "u_r": pd.right(v), "u_l": pd.left(v)} for v in pd.vertices]
        data = pd.as_dict()
        meta = {key: data[key] for key in ("lambda", "entropy", "period", "iterations",
                                            "right_residual", "left_residual", "dense_lambda")}
        return ExperimentReport("perron", ["vertex", "u_r", "u_l"], rows, meta)

    def _parry(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        g = self._graph(inputs)
        pd = compute_perron(g)
        if params.word:
            cylinders = [make_centered_cylinder(g, params.word)]
        else:
            cylinders = [cyl for l in range(1, params.l_max + 1) for cyl in centered_cylinders(g, l)]

        rows = []
        for cyl in cylinders:
            value = centered_cylinder_mass(g, pd, cyl)
            rows.append({
                "cylinder": cyl.label(),
                "mass": value.value,
                "lambda_power": value.lambda_power,
                "left_vertex": value.left_vertex,
                "right_vertex": value.right_vertex,
            })
        meta: Dict[str, Any] = {"lambda": pd.lam}
        if inputs.xs and inputs.ys:
            unstable = make_ray_cylinder(g, "unstable", inputs.xs[0], params.n[0])
            stable = make_ray_cylinder(g, "stable", inputs.ys[0], params.m[0])
            product = product_set(g, unstable, stable)
            if not product.empty:
                meta["product_check"] = product_mass_check(g, pd, product).as_row()
            meta["conformality"] = [vars(conformality_report(g, pd, ray)) for ray in (unstable, stable)]
        return ExperimentReport(
            "parry", ["cylinder", "mass", "lambda_power", "left_vertex", "right_vertex"], rows, meta
        )

    def _hetero_count(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        spec = self._hetero(inputs, params)
        k = self._k(params)
        if not params.list_paths:
            return ExperimentReport("hetero-count", ["k", "count"], [{"k": k, "count": hetero_count(spec, k)}])
        rows = []
        for index, piece in enumerate(hetero_pieces(spec)):
            enumeration = hetero_enumerate(piece, k, params.cap)
            rows.extend({"piece": index, "k": k, "middle_path": ",".join(path)} for path in enumeration.middle_paths)
        return ExperimentReport(
            "hetero-count", ["piece", "k", "middle_path"], rows, {"count": hetero_count(spec, k)}
        )

    def _series_report(self, command: str, series) -> ExperimentReport:
        return ExperimentReport(
            command,
            ["k", "count", "scaled", "target", "abs_err", "entropy_est"],
            [row.as_row() for row in series.rows],
            series.meta,
        )

    def _hetero_series(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        return self._series_report("hetero-series", ratio_and_entropy_series(self._hetero(inputs, params), params.k_max))

    def _irreducible_series(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        return self._series_report("irreducible-series", irreducible_series(self._hetero(inputs, params), params.k_max))

    def _weak_star(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        spec = self._hetero(inputs, params)
        k = self._k(params)
        decomp = structure_analysis(self._graph(inputs))
        if decomp.irreducible and decomp.period > 1:
            report = irreducible_weak_star_report(spec, k, params.l_max, decomp)
        else:
            report = weak_star_report(spec, k, params.l_max)
        meta: Dict[str, Any] = {"k": report.k, "total_count": report.total_count, "sup_deviation": report.sup_deviation}
        if report.piece_weights is not None:
            meta["piece_weights"] = [str(w) for w in report.piece_weights]
        meta.update(report.meta)
        return ExperimentReport(
            "weak-star", ["cylinder", "empirical", "parry", "abs_err"], [row.as_row() for row in report.rows], meta
        )

    def _periodic(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        g = self._graph(inputs)
        n = params.period_bound or settings.PROBE_PERIOD
        ens = enumerate_periodic(g, n, params.cap)
        pd = compute_perron(g)
        rows = []
        for l in range(1, params.l_max + 1):
            for cyl in centered_cylinders(g, l):
                periodic = periodic_measure_mass(ens, cyl)
                parry = centered_cylinder_mass(g, pd, cyl).value
                rows.append({
                    "cylinder": cyl.label(),
                    "periodic": float(periodic),
                    "parry": parry,
                    "abs_err": abs(float(periodic) - parry),
                })
        meta = {"n": n, "total": ens.total, "orbits": len(ens.orbits)}
        return ExperimentReport("periodic", ["cylinder", "periodic", "parry", "abs_err"], rows, meta)

    def _compare(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        g = self._graph(inputs)
        n = params.period_bound or settings.PROBE_PERIOD
        report = compare_constructions(g, self._hetero(inputs, params), self._k(params), n, params.l_max, params.cap)
        meta = dict(report.meta)
        meta.update({
            "sup_periodic_vs_parry": report.sup_periodic_vs_parry,
            "sup_heteroclinic_vs_parry": report.sup_heteroclinic_vs_parry,
            "sup_periodic_vs_heteroclinic": report.sup_periodic_vs_heteroclinic,
        })
        return ExperimentReport(
            "compare", ["cylinder", "periodic", "heteroclinic", "parry"], [row.as_row() for row in report.rows], meta
        )

    def _code_check(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        code = self._code(inputs)
        probe = almost_one_to_one_probe(code, params.period_bound, params.cap)
        rows = [{"fiber_size": size, "points": count} for size, count in probe.histogram.items()]
        meta: Dict[str, Any] = {"name": code.name}
        meta.update(resolving_type(code))
        meta.update(probe.as_dict())
        return ExperimentReport("code-check", ["fiber_size", "points"], rows, meta)

    def _pushforward(self, inputs: ExperimentInputs, params: ExperimentParams) -> ExperimentReport:
        code = self._code(inputs)
        probe = almost_one_to_one_probe(code, params.period_bound, params.cap)
        checks = pushforward_family(code, params.l_max, probe)
        rows = [
            {
                "cylinder": check.config["cylinder"],
                "codomain": check.lhs,
                "preimage_sum": check.rhs,
                "abs_err": check.abs_err,
            }
            for check in checks
        ]
        meta: Dict[str, Any] = {"sup_deviation": max(check.abs_err for check in checks), "probe": probe.as_dict()}
        g = code.codomain
        if inputs.xs:
            meta["unstable"] = vars(pushforward_su_measures(code, make_ray_cylinder(g, "unstable", inputs.xs[0], params.n[0])))
        if inputs.ys:
            meta["stable"] = vars(pushforward_su_measures(code, make_ray_cylinder(g, "stable", inputs.ys[0], params.m[0])))
        if inputs.xs and inputs.ys and params.k is not None:
            spec = hetero_pieces(self._hetero(inputs, params))[0]
            meta["count_identity"] = []
            for k in range(spec.first_k(), params.k + 1):
                down, up = lifted_hetero_counts(code, spec, k)
                meta["count_identity"].append({"k": k, "downstairs": down, "upstairs": up})
        return ExperimentReport("pushforward", ["cylinder", "codomain", "preimage_sum", "abs_err"], rows, meta)
