import logging
from typing import List, Optional

from fastapi import APIRouter, HTTPException
from pydantic import Field

from app.core.errors import InputValidationError, SmaleError
from app.dynamics.graph_core import load_graph
from app.dynamics.schemas import CodeSpec, GraphSpec, PointSpec
from app.dynamics.utils import code_from_spec, point_from_spec
from app.experiments.experiment_manager import ExperimentInputs, ExperimentManager, ExperimentParams
from app.experiments.reports import report_envelope

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

router = APIRouter()
experiment_manager = ExperimentManager()


class ExperimentRequest(ExperimentParams):
    """Inline inputs plus parameters; codes must carry inline graphs."""
    graph: Optional[GraphSpec] = None
    x: List[PointSpec] = Field(default_factory=list)
    y: List[PointSpec] = Field(default_factory=list)
    code: Optional[CodeSpec] = None


@router.get("")
async def list_experiments():
    return {"experiments": sorted(experiment_manager.experiments)}


@router.post("/{command}")
async def run_experiment(command: str, request: ExperimentRequest):
    """
    Run an experiment on inline inputs and return the JSON report envelope.
    """
    if command not in experiment_manager.experiments:
        raise HTTPException(status_code=404, detail=f"Unknown experiment: {command}")

    try:
        code = None
        if request.code is not None:
            if isinstance(request.code.domain, str) or isinstance(request.code.codomain, str):
                raise InputValidationError("Codes sent over HTTP must embed their graphs")
            code = code_from_spec(request.code)
        graph = load_graph(request.graph) if request.graph is not None else None
        base = graph if graph is not None else (code.codomain if code is not None else None)
        if base is None and (request.x or request.y):
            raise InputValidationError("Points need a graph or a code")
        inputs = ExperimentInputs(
            graph=graph,
            xs=[point_from_spec(base, point) for point in request.x],
            ys=[point_from_spec(base, point) for point in request.y],
            code=code,
        )
        report = experiment_manager.run(command, inputs, request)
    except SmaleError as e:
        logger.error(f"Experiment {command} failed: {e.message}")
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return report_envelope(report, {"command": command, **request.model_dump(mode="json", by_alias=True)})
