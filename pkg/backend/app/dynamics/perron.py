import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.errors import PerronConvergenceError
from app.dynamics.graph_core import Graph, adjacency_power, structure_analysis

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PerronData:
    """
    Perron-Frobenius data of an irreducible adjacency matrix.

    u_r is sum-normalized, u_l is scaled so that u_l . u_r = 1. Arrays are
    read-only and follow the graph's canonical vertex order.
    """
    vertices: Tuple[str, ...]
    lam: float
    u_r: np.ndarray
    u_l: np.ndarray
    period: int = 1
    iterations: int = 0
    right_residual: float = 0.0
    left_residual: float = 0.0
    dense_lambda: Optional[float] = None
    _index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("u_r", "u_l"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})

    def right(self, vertex: str) -> float:
        return float(self.u_r[self._index[vertex]])

    def left(self, vertex: str) -> float:
        return float(self.u_l[self._index[vertex]])

    @property
    def projection(self) -> np.ndarray:
        """The limit matrix u_r u_l of lambda^{-n} A^n (primitive case)."""
        return np.outer(self.u_r, self.u_l)

    @property
    def entropy(self) -> float:
        return math.log(self.lam)

    def rescaled(self, c: float) -> "PerronData":
        """Same eigendata with u_r scaled by c and u_l by 1/c."""
        return PerronData(
            vertices=self.vertices,
            lam=self.lam,
            u_r=self.u_r * c,
            u_l=self.u_l / c,
            period=self.period,
            iterations=self.iterations,
            right_residual=self.right_residual,
            left_residual=self.left_residual,
            dense_lambda=self.dense_lambda,
        )

    def as_dict(self) -> Dict[str, object]:
        return {
            "lambda": self.lam,
            "entropy": self.entropy,
            "period": self.period,
            "iterations": self.iterations,
            "right_residual": self.right_residual,
            "left_residual": self.left_residual,
            "dense_lambda": self.dense_lambda,
            "u_r": {v: self.right(v) for v in self.vertices},
            "u_l": {v: self.left(v) for v in self.vertices},
        }


def _power_iteration(matrix: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Positive eigenvector of a primitive nonnegative matrix, sum-normalized.

    Stops when successive iterates differ by less than PERRON_TOLERANCE in
    max-norm; raises after PERRON_MAX_ITER steps.
    """
    size = matrix.shape[0]
    v = np.full(size, 1.0 / size)
    for iteration in range(1, settings.PERRON_MAX_ITER + 1):
        w = matrix @ v
        total = w.sum()
        if total <= 0:
            raise PerronConvergenceError("Power iteration collapsed to the zero vector")
        w = w / total
        if np.max(np.abs(w - v)) < settings.PERRON_TOLERANCE:
            return w, iteration
        v = w
    raise PerronConvergenceError(
        f"Power iteration did not converge within {settings.PERRON_MAX_ITER} steps"
    )


def _dense_lambda(a: np.ndarray) -> float:
    eigenvalues = linalg.eigvals(a)
    return float(np.max(np.abs(eigenvalues)))


@lru_cache(maxsize=256)
def compute_perron(g: Graph) -> PerronData:
    """
    Perron eigenvalue and eigenvectors of the adjacency matrix of g.

    For period I > 1 plain power iteration oscillates, so the iteration runs on
    A^I restricted to the class D_0 and the vectors are carried to the other
    classes with powers of A.

    Parameters:
    - g: irreducible graph

    Returns:
    - PerronData with u_r summing to 1 and u_l . u_r = 1
    """
    decomp = structure_analysis(g)
    if not decomp.irreducible:
        raise PerronConvergenceError("Perron data requires an irreducible graph")

    period = decomp.period
    classes = decomp.cyclic_classes
    index = {v: i for i, v in enumerate(g.vertices)}
    logger.info(f"Computing Perron data for {len(g.vertices)} vertices (period {period})")

    base = classes[0]
    block = np.array(adjacency_power(g, period).submatrix(base, base), dtype=np.float64)
    right0, right_steps = _power_iteration(block)
    left0, left_steps = _power_iteration(block.T)
    lam_power = float((block @ right0).sum())
    lam = lam_power ** (1.0 / period)

    u_r = np.zeros(len(g.vertices))
    u_l = np.zeros(len(g.vertices))
    for c, cls in enumerate(classes):
        # right vector: D_c reaches D_0 in (I - c) mod I steps
        r = (period - c) % period
        forward = np.array(adjacency_power(g, r).submatrix(cls, base), dtype=np.float64)
        values = (forward @ right0) / lam ** r
        for v, value in zip(cls, values):
            u_r[index[v]] = value
        # left vector: D_0 reaches D_c in c steps
        backward = np.array(adjacency_power(g, c).submatrix(base, cls), dtype=np.float64)
        values = (left0 @ backward) / lam ** c
        for v, value in zip(cls, values):
            u_l[index[v]] = value

    u_r = u_r / u_r.sum()
    u_l = u_l / float(u_l @ u_r)

    a = g.adjacency.to_float()
    scale = lam * max(np.max(np.abs(u_r)), np.max(np.abs(u_l)))
    right_residual = float(np.max(np.abs(a @ u_r - lam * u_r)) / scale)
    left_residual = float(np.max(np.abs(u_l @ a - lam * u_l)) / scale)
    if max(right_residual, left_residual) > 1e-12:
        logger.warning(f"Perron residuals above tolerance: right={right_residual:.3e}, left={left_residual:.3e}")

    return PerronData(
        vertices=g.vertices,
        lam=lam,
        u_r=u_r,
        u_l=u_l,
        period=period,
        iterations=max(right_steps, left_steps),
        right_residual=right_residual,
        left_residual=left_residual,
        dense_lambda=_dense_lambda(a),
    )


def entropy(g: Graph) -> float:
    """Topological entropy log(lambda) of the edge shift (natural log)."""
    return compute_perron(g).entropy
