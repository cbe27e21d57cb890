from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class EdgeSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    id: str
    source: str = Field(alias="from")
    target: str = Field(alias="to")


class GraphSpec(BaseModel):
    """
    Graph document: {"vertices": [...], "edges": [{"id", "from", "to"}, ...]}.
    """
    model_config = ConfigDict(frozen=True)

    vertices: List[str]
    edges: List[EdgeSpec]


class PointSpec(BaseModel):
    """
    Eventually periodic point: left cycle repeated before core_start,
    core from core_start on, right cycle repeated after the core.
    """
    model_config = ConfigDict(frozen=True)

    left_cycle: List[str] = Field(min_length=1)
    core: List[str] = Field(default_factory=list)
    right_cycle: List[str] = Field(min_length=1)
    core_start: int = 0


class CodeSpec(BaseModel):
    """
    One-block code document. Domain and codomain are either graph file paths
    (resolved relative to the code file) or inline graph documents.
    """
    model_config = ConfigDict(frozen=True)

    domain: Union[str, GraphSpec]
    codomain: Union[str, GraphSpec]
    edge_map: Dict[str, str]
    name: Optional[str] = None
