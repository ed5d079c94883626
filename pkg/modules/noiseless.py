from __future__ import annotations
from typing import Iterable, List, NamedTuple, Optional

import numpy as np

from modules.errors import DomainError
from modules.graph_core import (
    CandidateGraph, EdgeCostVector, EdgeSelection, SparseLaplacian,
    as_signal_matrix, assemble_laplacian, connected_components, sample_covariance,
)
from modules.log import get_logger

log = get_logger(__name__)

_SYM_TOL = 1e-9


class NoiselessFit(NamedTuple):
    selection: EdgeSelection
    laplacian: SparseLaplacian
    smoothness: float
    components: int


def _graph_for(n: int, graph: Optional[CandidateGraph]) -> CandidateGraph:
    if graph is None:
        return CandidateGraph(n)
    if graph.n != n:
        raise DomainError(f"signal has {n} nodes, candidate graph has {graph.n}")
    return graph


def edge_costs(X, graph: Optional[CandidateGraph] = None) -> EdgeCostVector:
    """c_m = sum_k (x_ik - x_jk)^2. incidence 행렬 없이 행 차분으로 계산."""
    X = as_signal_matrix(X)
    graph = _graph_for(X.shape[0], graph)
    I, J = graph.endpoints()
    d = X[I] - X[J]
    return np.einsum("ml,ml->m", d, d)


def edge_costs_from_covariance(R, l: int, graph: Optional[CandidateGraph] = None) -> EdgeCostVector:
    """c_m = l * (R_ii + R_jj - 2 R_ij)"""
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DomainError(f"covariance must be square, got shape {R.shape}")
    scale = max(1.0, float(np.max(np.abs(R))) if R.size else 1.0)
    if np.max(np.abs(R - R.T), initial=0.0) > _SYM_TOL * scale:
        raise DomainError("covariance matrix is not symmetric")
    if l < 1:
        raise DomainError(f"snapshot count must be >= 1, got {l}")
    graph = _graph_for(R.shape[0], graph)
    I, J = graph.endpoints()
    d = np.diag(R)
    # 수치 오차로 생긴 미세 음수는 0 으로
    return np.maximum(l * (d[I] + d[J] - 2.0 * R[I, J]), 0.0)


def _check_k(k: int, m_total: int) -> None:
    if not (1 <= k <= m_total):
        raise DomainError(f"k={k} out of range [1, {m_total}]")


def select_k_smallest(c, k: int) -> EdgeSelection:
    """c 의 가장 작은 k 개. 동률은 작은 edge index 우선 (stable sort)."""
    c = np.asarray(c, dtype=np.float64).ravel()
    _check_k(k, c.size)
    order = np.argsort(c, kind="stable")
    return EdgeSelection.from_indices(order[:k], c.size)


def learn_noiseless(X, k: int, graph: Optional[CandidateGraph] = None,
                    from_covariance: bool = False) -> NoiselessFit:
    X = as_signal_matrix(X)
    graph = _graph_for(X.shape[0], graph)
    _check_k(k, graph.m_total)
    if from_covariance:
        c = edge_costs_from_covariance(sample_covariance(X), X.shape[1], graph)
    else:
        c = edge_costs(X, graph)
    w = select_k_smallest(c, k)
    L = assemble_laplacian(w, graph)
    smooth = L.quadratic(X) / X.shape[1]
    comps = connected_components(w, graph)
    if comps > 1:
        log.info("learned graph has %d connected components (k=%d, n=%d)", comps, k, graph.n)
    return NoiselessFit(w, L, smooth, comps)


def smoothness_path(X, ks: Iterable[int], graph: Optional[CandidateGraph] = None) -> List[dict]:
    """K 별 최적 (1/L)·smoothness. 정렬된 비용의 누적합 한 번으로 계산."""
    X = as_signal_matrix(X)
    graph = _graph_for(X.shape[0], graph)
    c = np.sort(edge_costs(X, graph), kind="stable")
    csum = np.cumsum(c)
    out = []
    for k in ks:
        _check_k(int(k), graph.m_total)
        out.append({"k": int(k), "smoothness": float(csum[int(k) - 1] / X.shape[1])})
    return out
