import json
import logging
import os
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from app.core.errors import InputValidationError
from app.dynamics.graph_core import Graph, load_graph
from app.dynamics.resolving_factor import OneBlockCode, validate_code
from app.dynamics.schemas import CodeSpec, GraphSpec, PointSpec
from app.dynamics.shift_space import ShiftPoint, make_point

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def read_json(path: str) -> Any:
    """
    Read a JSON document from disk.

    Parameters:
    - path: file path

    Returns:
    - The decoded document
    """
    if not os.path.exists(path):
        raise InputValidationError(f"File not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        logger.error(f"Invalid JSON in {path}: {str(e)}")
        raise InputValidationError(f"Invalid JSON in {path}: {e}")
    except OSError as e:
        logger.error(f"Cannot read {path}: {str(e)}")
        raise InputValidationError(f"Cannot read {path}: {e}")


def load_graph_file(path: str) -> Graph:
    logger.info(f"Loading graph from {path}")
    return load_graph(read_json(path))


def point_from_spec(g: Graph, spec: Union[PointSpec, Dict[str, Any]]) -> ShiftPoint:
    if not isinstance(spec, PointSpec):
        try:
            spec = PointSpec.model_validate(spec)
        except ValidationError as e:
            raise InputValidationError(f"Malformed point document: {e}")
    return make_point(g, spec.left_cycle, spec.core, spec.right_cycle, spec.core_start)


def load_point_file(g: Graph, path: str) -> ShiftPoint:
    return point_from_spec(g, read_json(path))


def code_from_spec(spec: Union[CodeSpec, Dict[str, Any]], base_dir: Optional[str] = None) -> OneBlockCode:
    """
    Build a validated one-block code. Graph paths inside the document are
    resolved relative to base_dir.
    """
    if not isinstance(spec, CodeSpec):
        try:
            spec = CodeSpec.model_validate(spec)
        except ValidationError as e:
            raise InputValidationError(f"Malformed code document: {e}")

    def resolve(graph: Union[str, GraphSpec]) -> Graph:
        if isinstance(graph, GraphSpec):
            return load_graph(graph)
        path = graph if base_dir is None or os.path.isabs(graph) else os.path.join(base_dir, graph)
        return load_graph_file(path)

    return validate_code(resolve(spec.domain), resolve(spec.codomain), spec.edge_map, spec.name)


def load_code_file(path: str) -> OneBlockCode:
    logger.info(f"Loading code from {path}")
    return code_from_spec(read_json(path), os.path.dirname(os.path.abspath(path)))
