import logging

from fastapi import APIRouter, HTTPException

from app.core.errors import SmaleError
from app.dynamics.graph_core import load_graph, structure_analysis
from app.dynamics.perron import compute_perron
from app.dynamics.schemas import GraphSpec

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("")
async def analyze_graph(spec: GraphSpec):
    """
    Structure of a graph: irreducibility, period, cyclic classes and, for
    irreducible graphs, the Perron data.
    """
    try:
        g = load_graph(spec)
        decomp = structure_analysis(g)
        info = {
            "vertices": list(g.vertices),
            "edges": len(g.edges),
            "irreducible": decomp.irreducible,
            "period": decomp.period,
            "cyclic_classes": [list(cls) for cls in decomp.cyclic_classes],
        }
        if decomp.irreducible:
            info["perron"] = compute_perron(g).as_dict()
    except SmaleError as e:
        logger.error(f"Graph analysis failed: {e.message}")
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return info
