from __future__ import annotations
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from modules.config import DENSE_CAP
from modules.errors import DomainError

SelectionKind = Literal["boolean", "relaxed"]

# EdgeCostVector / SignalMatrix 는 검증된 float64 ndarray 로 다룬다
EdgeCostVector = np.ndarray


# ---------------------------
# Candidate (complete) graph & edge indexing
# ---------------------------

@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    m: int


@dataclass(frozen=True)
class CandidateGraph:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"candidate graph needs n >= 2 nodes, got {self.n}")

    @property
    def m_total(self) -> int:
        return self.n * (self.n - 1) // 2

    @classmethod
    def for_edges(cls, m_total: int) -> "CandidateGraph":
        """M = n(n-1)/2 를 만족하는 n 역산"""
        n = (1 + math.isqrt(1 + 8 * m_total)) // 2
        if n * (n - 1) // 2 != m_total:
            raise DomainError(f"{m_total} is not a complete-graph edge count")
        return cls(n)

    def _row_start(self, i: int) -> int:
        return i * (2 * self.n - i - 1) // 2

    def edge_index(self, i: int, j: int) -> int:
        if not (0 <= i < j < self.n):
            raise DomainError(f"edge ({i},{j}) requires 0 <= i < j < {self.n}")
        return self._row_start(i) + (j - i - 1)

    def edge_from_index(self, m: int) -> Tuple[int, int]:
        if not (0 <= m < self.m_total):
            raise DomainError(f"edge index {m} out of range [0, {self.m_total})")
        # row_start(i) <= m 를 만족하는 최대 i (닫힌 식 + 정수 보정)
        b = 2 * self.n - 1
        i = (b - math.isqrt(b * b - 8 * m)) // 2
        while i > 0 and self._row_start(i) > m:
            i -= 1
        while i + 1 < self.n - 1 and self._row_start(i + 1) <= m:
            i += 1
        return i, m - self._row_start(i) + i + 1

    def edge(self, m: int) -> Edge:
        i, j = self.edge_from_index(m)
        return Edge(i, j, m)

    @cached_property
    def _endpoints(self) -> Tuple[np.ndarray, np.ndarray]:
        # np.triu_indices 는 (i, j) 사전식 순서 = 선형 인덱스 순서
        I, J = np.triu_indices(self.n, k=1)
        I.setflags(write=False)
        J.setflags(write=False)
        return I, J

    def endpoints(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._endpoints


def edge_index(i: int, j: int, graph: CandidateGraph) -> int:
    return graph.edge_index(i, j)


def edge_from_index(m: int, graph: CandidateGraph) -> Tuple[int, int]:
    return graph.edge_from_index(m)


def incidence_column(m: int, graph: CandidateGraph) -> sp.csc_matrix:
    """a_m: i 에 +1, j 에 -1 (i < j). N x 1 sparse column."""
    i, j = graph.edge_from_index(m)
    return sp.csc_matrix((np.array([1.0, -1.0]), (np.array([i, j]), np.array([0, 0]))),
                         shape=(graph.n, 1))


def incidence_matrix(graph: CandidateGraph) -> sp.csc_matrix:
    I, J = graph.endpoints()
    M = graph.m_total
    cols = np.arange(M)
    rows = np.concatenate([I, J])
    vals = np.concatenate([np.ones(M), -np.ones(M)])
    return sp.csc_matrix((vals, (rows, np.concatenate([cols, cols]))), shape=(graph.n, M))


# ---------------------------
# Signals
# ---------------------------

def as_signal_matrix(X, n: int | None = None, name: str = "X") -> np.ndarray:
    """N x L float64 행렬로 정규화. 1차원 입력은 L=1 로 본다."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DomainError(f"{name} must be a 2-D N x L matrix, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise DomainError(f"{name} needs at least one snapshot")
    if n is not None and arr.shape[0] != n:
        raise DomainError(f"{name} has {arr.shape[0]} rows, expected {n} nodes")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def sample_covariance(X) -> np.ndarray:
    X = as_signal_matrix(X)
    R = (X @ X.T) / X.shape[1]
    return 0.5 * (R + R.T)


# ---------------------------
# Edge selections
# ---------------------------

_BOX_TOL = 1e-12


@dataclass(frozen=True)
class EdgeSelection:
    weights: np.ndarray
    kind: SelectionKind
    k: int

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        M = w.size
        if not (0 <= self.k <= M):
            raise DomainError(f"k={self.k} out of range for M={M}")
        if self.kind == "boolean":
            if not np.all((w == 0.0) | (w == 1.0)):
                raise DomainError("boolean selection must contain only 0/1 entries")
            if int(np.count_nonzero(w)) != self.k:
                raise DomainError(f"boolean selection has {np.count_nonzero(w)} edges, expected {self.k}")
        elif self.kind == "relaxed":
            if np.any(w < -_BOX_TOL) or np.any(w > 1 + _BOX_TOL):
                raise DomainError("relaxed selection must lie in [0, 1]^M")
            if abs(w.sum() - self.k) > 1e-9 * M:
                raise DomainError(f"relaxed selection sums to {w.sum():.12g}, expected {self.k}")
        else:
            raise DomainError(f"unknown selection kind {self.kind!r}")

    @classmethod
    def from_indices(cls, indices, m_total: int) -> "EdgeSelection":
        idx = np.unique(np.asarray(indices, dtype=np.int64))
        if idx.size and (idx[0] < 0 or idx[-1] >= m_total):
            raise DomainError(f"edge indices out of range [0, {m_total})")
        w = np.zeros(m_total)
        w[idx] = 1.0
        return cls(w, "boolean", int(idx.size))

    @classmethod
    def empty(cls, m_total: int) -> "EdgeSelection":
        return cls(np.zeros(m_total), "boolean", 0)

    @property
    def m_total(self) -> int:
        return self.weights.size

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.weights)

    def key(self) -> bytes:
        """선택 집합 hash 용 (cycle 감지)"""
        return self.indices().tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeSelection):
            return NotImplemented
        return self.kind == other.kind and self.k == other.k and np.array_equal(self.weights, other.weights)

    def __hash__(self) -> int:
        return hash((self.kind, self.k, self.weights.tobytes()))


WeightsLike = Union[EdgeSelection, np.ndarray]


def _weights(w: WeightsLike, graph: CandidateGraph) -> np.ndarray:
    arr = w.weights if isinstance(w, EdgeSelection) else np.asarray(w, dtype=np.float64).ravel()
    if arr.size != graph.m_total:
        raise DomainError(f"selection has length {arr.size}, expected M={graph.m_total}")
    if np.any(arr < -_BOX_TOL) or np.any(arr > 1 + _BOX_TOL) or not np.all(np.isfinite(arr)):
        raise DomainError("edge weights must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


# ---------------------------
# Sparse Laplacian
# ---------------------------

@dataclass(frozen=True, eq=False)
class SparseLaplacian:
    """L_s(w) = sum_m w_m a_m a_m^T. 선택된(비영) edge 와 degree 대각만 저장."""
    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    degree: np.ndarray = field(repr=False)

    @property
    def num_edges(self) -> int:
        return self.weights.size

    def to_sparse(self) -> sp.csr_matrix:
        r = np.concatenate([self.rows, self.cols, np.arange(self.n)])
        c = np.concatenate([self.cols, self.rows, np.arange(self.n)])
        v = np.concatenate([-self.weights, -self.weights, self.degree])
        return sp.csr_matrix((v, (r, c)), shape=(self.n, self.n))

    def to_dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.n > cap:
            raise DomainError(f"dense materialization refused for N={self.n} > cap {cap}")
        L = np.zeros((self.n, self.n))
        np.add.at(L, (self.rows, self.cols), -self.weights)
        np.add.at(L, (self.cols, self.rows), -self.weights)
        L[np.diag_indices(self.n)] = self.degree
        return L

    def shifted(self, gamma: float) -> sp.csr_matrix:
        """I + gamma * L (sparse, SPD)"""
        return (sp.identity(self.n, format="csr") + gamma * self.to_sparse()).tocsr()

    def matmul(self, X) -> np.ndarray:
        X = as_signal_matrix(X, self.n)
        out = self.degree[:, None] * X
        np.add.at(out, self.rows, -self.weights[:, None] * X[self.cols])
        np.add.at(out, self.cols, -self.weights[:, None] * X[self.rows])
        return out

    def quadratic(self, X) -> float:
        """tr{X^T L X} = sum_m w_m ||X^T a_m||^2 (행 차분 형태)"""
        X = as_signal_matrix(X, self.n)
        if not self.num_edges:
            return 0.0
        d = X[self.rows] - X[self.cols]
        return float(np.dot(self.weights, np.einsum("ml,ml->m", d, d)))

    def bilinear(self, X, Z) -> float:
        """tr{X^T L Z}"""
        X = as_signal_matrix(X, self.n)
        Z = as_signal_matrix(Z, self.n, name="Z")
        if not self.num_edges:
            return 0.0
        dx = X[self.rows] - X[self.cols]
        dz = Z[self.rows] - Z[self.cols]
        return float(np.dot(self.weights, np.einsum("ml,ml->m", dx, dz)))


def assemble_laplacian(w: WeightsLike, graph: CandidateGraph) -> SparseLaplacian:
    weights = _weights(w, graph)
    I, J = graph.endpoints()
    nz = np.flatnonzero(weights)
    rows, cols, ws = I[nz], J[nz], weights[nz]
    degree = np.bincount(rows, weights=ws, minlength=graph.n) + np.bincount(cols, weights=ws, minlength=graph.n)
    for arr in (rows, cols, ws, degree):
        arr.setflags(write=False)
    return SparseLaplacian(graph.n, rows, cols, ws, degree)


def laplacian_quadratic(L: SparseLaplacian, X) -> float:
    X = as_signal_matrix(X)
    if X.shape[0] != L.n:
        raise DomainError(f"signal has {X.shape[0]} nodes, Laplacian has {L.n}")
    return L.quadratic(X)


def connected_components(w: WeightsLike, graph: CandidateGraph) -> int:
    L = assemble_laplacian(w, graph)
    adj = sp.csr_matrix((np.ones(L.num_edges), (L.rows, L.cols)), shape=(graph.n, graph.n))
    count, _ = _cc(adj, directed=False)
    return int(count)
