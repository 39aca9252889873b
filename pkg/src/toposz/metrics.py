"""Signal-quality and persistence-diagram distances for evaluating runs."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .field import ScalarField
from .topology import PersistenceDiagram, persistence_diagram_0d

PSNR_INF = math.inf


def mse(f: ScalarField, g: ScalarField) -> float:
    if tuple(f.dims) != tuple(g.dims):
        raise ValueError(f"dims mismatch: {f.dims} vs {g.dims}")
    diff = f.values - g.values
    return float(np.mean(diff * diff))


def psnr(f: ScalarField, g: ScalarField) -> float:
    """20 log10(max(f) / rmse); +inf when the fields are identical."""
    err = mse(f, g)
    if err == 0.0:
        return PSNR_INF
    return 20.0 * math.log10(float(f.values.max()) / math.sqrt(err))


def compression_ratio(original_bytes: int, compressed_bytes: int) -> float:
    if original_bytes <= 0 or compressed_bytes <= 0:
        raise ValueError("sizes must be positive")
    return original_bytes / compressed_bytes


def _pairs(d) -> np.ndarray:
    if isinstance(d, PersistenceDiagram):
        return d.pairs
    return np.asarray(d, dtype=np.float64).reshape(-1, 2)


def _cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Augmented L-inf costs; rows are a + diag(b), columns b + diag(a)."""
    n, m = len(a), len(b)
    cost = np.full((n + m, m + n), np.inf)
    if n and m:
        cost[:n, :m] = np.maximum(
            np.abs(a[:, None, 0] - b[None, :, 0]), np.abs(a[:, None, 1] - b[None, :, 1])
        )
    if n:
        cost[np.arange(n), m + np.arange(n)] = (a[:, 1] - a[:, 0]) / 2.0
    if m:
        cost[n + np.arange(m), np.arange(m)] = (b[:, 1] - b[:, 0]) / 2.0
    cost[n:, m:] = 0.0
    return cost


def bottleneck_distance(d1, d2) -> float:
    """Exact bottleneck distance between two finite diagrams.

    Bisects over the candidate costs. A threshold ``t`` is feasible iff the
    point-to-point graph with edges ``<= t`` has a matching covering every
    point of ``d1`` farther than ``t`` from the diagonal and one covering every
    such point of ``d2``; by the Mendelsohn-Dulmage theorem a single matching
    then covers both sets and all other points go to the diagonal.
    """
    a, b = _pairs(d1), _pairs(d2)
    if len(a) + len(b) == 0:
        return 0.0
    diag_a = (a[:, 1] - a[:, 0]) / 2.0
    diag_b = (b[:, 1] - b[:, 0]) / 2.0
    if len(a) and len(b):
        cross = np.maximum(
            np.abs(a[:, None, 0] - b[None, :, 0]), np.abs(a[:, None, 1] - b[None, :, 1])
        )
        # an edge longer than both diagonal moves never helps
        useful = cross <= np.maximum(diag_a[:, None], diag_b[None, :])
    else:
        cross = np.zeros((len(a), len(b)))
        useful = np.zeros((len(a), len(b)), dtype=bool)
    candidates = np.unique(np.concatenate([[0.0], diag_a, diag_b, cross[useful]]))

    def covers(adj, need):
        rows = np.flatnonzero(need)
        if rows.size == 0:
            return True
        sub = adj[rows]
        if sub.shape[1] == 0:
            return False
        match = maximum_bipartite_matching(csr_matrix(sub.astype(np.int8)), perm_type="column")
        return bool(np.all(match >= 0))

    def feasible(t):
        adj = useful & (cross <= t)
        return covers(adj, diag_a > t) and covers(adj.T, diag_b > t)

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def wasserstein_distance(d1, d2, q: float = 2.0) -> float:
    a, b = _pairs(d1), _pairs(d2)
    if len(a) + len(b) == 0:
        return 0.0
    cost = _cost_matrix(a, b)
    finite = np.isfinite(cost)
    powered = np.where(finite, cost, 0.0) ** q
    big = powered.sum() * 2.0 + 1.0
    powered[~finite] = big
    rows, cols = linear_sum_assignment(powered)
    return float(powered[rows, cols].sum() ** (1.0 / q))


@dataclass
class MetricsReport:
    psnr: float
    mse: float
    compression_ratio: float | None
    bottleneck: float
    wasserstein2: float
    max_abs_error: float
    false_cases: dict = dc_field(default_factory=dict)
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> str:
        data = asdict(self)
        if math.isinf(self.psnr):
            data["psnr"] = "inf"
        return json.dumps(data, sort_keys=True)


def evaluate(f: ScalarField, g: ScalarField, compressed_bytes: int | None = None, report=None,
             superlevel: bool = True) -> MetricsReport:
    """Compare an original and a decompressed field (both on the same scale)."""
    d_f = persistence_diagram_0d(f, superlevel=superlevel)
    d_g = persistence_diagram_0d(g, superlevel=superlevel)
    ratio = compression_ratio(4 * f.size, compressed_bytes) if compressed_bytes else None
    return MetricsReport(
        psnr=psnr(f, g),
        mse=mse(f, g),
        compression_ratio=ratio,
        bottleneck=bottleneck_distance(d_f, d_g),
        wasserstein2=wasserstein_distance(d_f, d_g, 2.0),
        max_abs_error=float(np.max(np.abs(f.values - g.values))),
        false_cases=dict(report.counts) if report is not None else {},
    )
