from __future__ import annotations
from typing import Optional, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import cg

from modules.config import RegularizationConfig
from modules.errors import DomainError, SolverError
from modules.graph_core import (
    CandidateGraph, SparseLaplacian, WeightsLike, as_signal_matrix, assemble_laplacian,
)
from modules.log import get_logger

log = get_logger(__name__)

GraphLike = Union[SparseLaplacian, WeightsLike]


def as_laplacian(w: GraphLike, n: int, graph: Optional[CandidateGraph] = None) -> SparseLaplacian:
    if isinstance(w, SparseLaplacian):
        if w.n != n:
            raise DomainError(f"Laplacian has {w.n} nodes, signal has {n}")
        return w
    graph = graph or CandidateGraph(n)
    if graph.n != n:
        raise DomainError(f"signal has {n} nodes, candidate graph has {graph.n}")
    return assemble_laplacian(w, graph)


class TikhonovSystem:
    """[I + gamma L] X = Y. 행렬은 snapshot 과 무관하므로 factorization 1회 후 재사용."""

    def __init__(self, laplacian: SparseLaplacian, gamma: float,
                 cfg: Optional[RegularizationConfig] = None):
        if gamma < 0 or not np.isfinite(gamma):
            raise DomainError(f"gamma must be finite and >= 0, got {gamma}")
        self.cfg = cfg or RegularizationConfig(gamma=gamma)
        self.laplacian = laplacian
        self.gamma = float(gamma)
        self.n = laplacian.n

        if self.gamma == 0.0 or laplacian.num_edges == 0:
            self.method = "identity"
        elif self.cfg.solver == "dense" or (self.cfg.solver == "auto" and self.n <= self.cfg.dense_cap):
            self.method = "dense"
        else:
            self.method = "cg"

        self._chol = None
        self._A = None
        if self.method == "dense":
            A = np.eye(self.n) + self.gamma * laplacian.to_dense(cap=self.cfg.dense_cap)
            self._chol = cho_factor(A, lower=True)
        elif self.method == "cg":
            self._A = laplacian.shifted(self.gamma)

    def solve(self, Y) -> np.ndarray:
        Y = as_signal_matrix(Y, self.n, name="Y")
        if self.method == "identity":
            return Y.copy()
        if self.method == "dense":
            return cho_solve(self._chol, Y)
        return self._solve_cg(Y)

    def _solve_cg(self, Y: np.ndarray) -> np.ndarray:
        tol, maxit = self.cfg.cg_tol, self.cfg.cg_max_iter
        X = np.empty_like(Y)
        for col in range(Y.shape[1]):
            b = Y[:, col]
            bnorm = float(np.linalg.norm(b))
            if bnorm == 0.0:
                X[:, col] = 0.0
                continue
            x, info = cg(self._A, b, rtol=tol, atol=0.0, maxiter=maxit)
            rel = float(np.linalg.norm(self._A @ x - b)) / bnorm
            if rel > tol:
                # 내부 잔차와 실제 잔차가 어긋난 경우 warm start 로 1회 재시도
                x, info = cg(self._A, b, x0=x, rtol=tol, atol=0.0, maxiter=maxit)
                rel = float(np.linalg.norm(self._A @ x - b)) / bnorm
            if info < 0:
                raise SolverError(f"conjugate gradient breakdown on column {col}", residual=rel)
            if rel > tol:
                raise SolverError(f"conjugate gradient did not reach rtol={tol:g} on column {col}",
                                  residual=rel, iterations=maxit)
            X[:, col] = x
        log.debug("cg solved %d columns (n=%d, edges=%d)", Y.shape[1], self.n, self.laplacian.num_edges)
        return X

    def residual(self, X, Y) -> float:
        X = as_signal_matrix(X, self.n)
        Y = as_signal_matrix(Y, self.n, name="Y")
        R = X + self.gamma * self.laplacian.matmul(X) - Y
        return float(np.linalg.norm(R))


def tikhonov_denoise(Y, w: GraphLike, cfg: Optional[RegularizationConfig] = None,
                     graph: Optional[CandidateGraph] = None) -> np.ndarray:
    cfg = cfg or RegularizationConfig()
    Y = as_signal_matrix(Y, name="Y")
    L = as_laplacian(w, Y.shape[0], graph)
    return TikhonovSystem(L, cfg.gamma, cfg).solve(Y)


def residual_norm(Y, X, w: GraphLike, gamma: float, graph: Optional[CandidateGraph] = None) -> float:
    """||(I + gamma L) X - Y||_F"""
    Y = as_signal_matrix(Y, name="Y")
    L = as_laplacian(w, Y.shape[0], graph)
    X = as_signal_matrix(X, L.n)
    return float(np.linalg.norm(X + gamma * L.matmul(X) - Y))


def joint_objective(Y, X, w: GraphLike, gamma: float, graph: Optional[CandidateGraph] = None) -> float:
    """(1/L)(||Y - X||_F^2 + gamma tr{X^T L_s(w) X})"""
    Y = as_signal_matrix(Y, name="Y")
    X = as_signal_matrix(X, Y.shape[0])
    if X.shape != Y.shape:
        raise DomainError(f"X shape {X.shape} does not match Y shape {Y.shape}")
    L = as_laplacian(w, Y.shape[0], graph)
    fid = float(np.sum((Y - X) ** 2))
    smooth = L.quadratic(X) if gamma else 0.0
    return (fid + gamma * smooth) / Y.shape[1]
