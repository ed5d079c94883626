from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from modules.altmin import alt_min
from modules.config import AltMinConfig, RegularizationConfig, RelaxConfig
from modules.denoiser import TikhonovSystem, joint_objective
from modules.errors import DomainError
from modules.graph_core import (
    CandidateGraph, EdgeSelection, WeightsLike, as_signal_matrix, assemble_laplacian,
    connected_components,
)
from modules.log import get_logger
from modules.noiseless import edge_costs

log = get_logger(__name__)

_BISECT_STEPS = 200


@dataclass
class RelaxTrace:
    objectives: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    reason: str = ""
    projected_grad_norm: float = float("nan")


class RelaxSolution(NamedTuple):
    weights: EdgeSelection
    trace: RelaxTrace


class RelaxFit(NamedTuple):
    selection: EdgeSelection
    x_hat: np.ndarray
    diagnostics: Dict[str, Any]


# ---------------------------
# r(w) 와 gradient
# ---------------------------

def _setup(Y, w: WeightsLike, gamma: float, graph: Optional[CandidateGraph]):
    Y = as_signal_matrix(Y, name="Y")
    graph = graph or CandidateGraph(Y.shape[0])
    if graph.n != Y.shape[0]:
        raise DomainError(f"signal has {Y.shape[0]} nodes, candidate graph has {graph.n}")
    if gamma < 0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    return Y, graph, assemble_laplacian(w, graph)


def _value_and_grad(Y: np.ndarray, w: WeightsLike, gamma: float, graph: CandidateGraph,
                    reg: Optional[RegularizationConfig] = None,
                    with_grad: bool = True) -> Tuple[float, Optional[np.ndarray]]:
    Y, graph, L = _setup(Y, w, gamma, graph)
    if gamma == 0.0:
        return 0.0, (np.zeros(graph.m_total) if with_grad else None)
    reg = reg.model_copy(update={"gamma": gamma}) if reg is not None else RegularizationConfig(gamma=gamma)
    X_hat = TikhonovSystem(L, gamma, reg).solve(Y)
    # tr{Y^T M^-1 Y} + gamma tr{Y^T L Y} - ||Y||^2 = gamma tr{Y^T L (Y - X_hat)} (상쇄 오차가 작은 형태)
    r = gamma * L.bilinear(Y, Y - X_hat)
    g = gamma * (edge_costs(Y, graph) - edge_costs(X_hat, graph)) if with_grad else None
    return r, g


def r_of_w(Y, w: WeightsLike, gamma: float, graph: Optional[CandidateGraph] = None,
           reg: Optional[RegularizationConfig] = None) -> float:
    return _value_and_grad(Y, w, gamma, graph, reg, with_grad=False)[0]


def grad_r(Y, w: WeightsLike, gamma: float, graph: Optional[CandidateGraph] = None,
           reg: Optional[RegularizationConfig] = None) -> np.ndarray:
    """g_m = gamma (c_m(Y) - c_m(X_hat)), 선형 시스템 1회 풀이를 모든 edge 가 공유"""
    return _value_and_grad(Y, w, gamma, graph, reg)[1]


# ---------------------------
# capped simplex projection
# ---------------------------

def project_capped_simplex(v, k: int) -> EdgeSelection:
    """argmin ||w - v||^2  s.t. 0 <= w <= 1, sum w = k.  w(tau) = clip(v - tau, 0, 1)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    M = v.size
    if not (1 <= k <= M):
        raise DomainError(f"k={k} out of range [1, {M}]")
    if not np.all(np.isfinite(v)):
        raise DomainError("projection input contains non-finite entries")
    if k == M:
        return EdgeSelection(np.ones(M), "relaxed", k)

    # s(tau) = sum clip(v - tau) 는 tau 에 대해 비증가. s(lo) = M >= k, s(hi) = 0 <= k
    lo, hi = float(v.min()) - 1.0, float(v.max())
    tau = 0.5 * (lo + hi)
    for _ in range(_BISECT_STEPS):
        tau = 0.5 * (lo + hi)
        s = np.clip(v - tau, 0.0, 1.0).sum()
        if s == k:
            break
        if s > k:
            lo = tau
        else:
            hi = tau
        if hi - lo <= np.finfo(float).eps * max(1.0, abs(tau)):
            break
    w = np.clip(v - tau, 0.0, 1.0)

    # active set 이 정해졌으면 free 좌표에서 tau 를 닫힌 식으로 다시 구한다
    free = (v - tau > 0.0) & (v - tau < 1.0)
    if free.any():
        n_up = int(np.count_nonzero(v - tau >= 1.0))
        tau2 = (v[free].sum() + n_up - k) / free.sum()
        w2 = np.clip(v - tau2, 0.0, 1.0)
        if abs(w2.sum() - k) <= abs(w.sum() - k):
            w = w2
    drift = w.sum() - k
    if abs(drift) > 1e-12 * M:
        # 재투영: 남은 drift 를 free 좌표에 나눠 준다
        idx = np.flatnonzero((w > 0.0) & (w < 1.0))
        if idx.size:
            w[idx] = np.clip(w[idx] - drift / idx.size, 0.0, 1.0)
    return EdgeSelection(w, "relaxed", k)


# ---------------------------
# projected gradient with Armijo backtracking
# ---------------------------

def _reg_for(cfg: RelaxConfig, reg: Optional[RegularizationConfig]) -> RegularizationConfig:
    if reg is None:
        return RegularizationConfig(gamma=cfg.gamma)
    return reg.model_copy(update={"gamma": cfg.gamma})


def solve_relaxation(Y, cfg: RelaxConfig, reg: Optional[RegularizationConfig] = None) -> RelaxSolution:
    Y = as_signal_matrix(Y, name="Y")
    graph = CandidateGraph(Y.shape[0])
    M, k = graph.m_total, cfg.k
    if k > M:
        raise DomainError(f"k={k} exceeds candidate edges M={M}")
    reg = _reg_for(cfg, reg)
    gamma = cfg.gamma
    trace = RelaxTrace()

    if k == M:
        w = np.ones(M)
        trace.objectives.append(r_of_w(Y, w, gamma, graph, reg))
        trace.converged, trace.reason, trace.projected_grad_norm = True, "singleton", 0.0
        return RelaxSolution(EdgeSelection(w, "relaxed", k), trace)

    # 균일 feasible 점에서 시작 (w = 0 정류점 회피)
    w = project_capped_simplex(np.full(M, k / M), k).weights.copy()
    f, g = _value_and_grad(Y, w, gamma, graph, reg)
    trace.objectives.append(f)
    if gamma == 0.0:
        trace.converged, trace.reason, trace.projected_grad_norm = True, "zero-objective", 0.0
        return RelaxSolution(EdgeSelection(w, "relaxed", k), trace)

    arm = cfg.armijo
    step = arm.initial_step
    for it in range(1, cfg.max_iter + 1):
        trace.iterations = it
        pg = w - project_capped_simplex(w - g, k).weights
        trace.projected_grad_norm = float(np.linalg.norm(pg))
        if trace.projected_grad_norm <= cfg.grad_tol:
            trace.converged, trace.reason = True, "stationary"
            break

        t = step
        accepted = False
        for _ in range(arm.max_backtracks):
            w_t = project_capped_simplex(w - t * g, k).weights
            f_t, g_t = _value_and_grad(Y, w_t, gamma, graph, reg)
            if f_t <= f + arm.sufficient_decrease * float(np.dot(g, w_t - w)):
                accepted = True
                break
            t *= arm.shrink
        if not accepted or f_t > f:
            trace.reason = "line-search"
            log.warning("armijo backtracking failed at iteration %d (pg=%.3e)", it, trace.projected_grad_norm)
            break

        rel = (f - f_t) / max(abs(f), np.finfo(float).tiny)
        w, f, g = w_t.copy(), f_t, g_t
        trace.objectives.append(f)
        log.debug("iter %d: r=%.12g step=%.3e", it, f, t)
        step = t / arm.shrink
        if rel <= cfg.obj_rel_tol:
            trace.converged, trace.reason = True, "objective-stalled"
            break
    else:
        trace.reason = "max-iter"
        log.warning("projected gradient hit max_iter=%d (pg=%.3e)", cfg.max_iter, trace.projected_grad_norm)

    return RelaxSolution(EdgeSelection(w, "relaxed", k), trace)


def round_topk(w: WeightsLike, k: int) -> EdgeSelection:
    """가장 큰 k 개. 동률은 작은 edge index 우선."""
    arr = w.weights if isinstance(w, EdgeSelection) else np.asarray(w, dtype=np.float64).ravel()
    if not (1 <= k <= arr.size):
        raise DomainError(f"k={k} out of range [1, {arr.size}]")
    order = np.argsort(-arr, kind="stable")
    return EdgeSelection.from_indices(order[:k], arr.size)


def learn_relax(Y, cfg: RelaxConfig, reg: Optional[RegularizationConfig] = None) -> RelaxFit:
    Y = as_signal_matrix(Y, name="Y")
    graph = CandidateGraph(Y.shape[0])
    reg = _reg_for(cfg, reg)
    sol = solve_relaxation(Y, cfg, reg)

    w_hat = round_topk(sol.weights, cfg.k)
    X_hat = TikhonovSystem(assemble_laplacian(w_hat, graph), cfg.gamma, reg).solve(Y)
    r_relaxed = sol.trace.objectives[-1]
    r_rounded = r_of_w(Y, w_hat, cfg.gamma, graph, reg)
    objective = joint_objective(Y, X_hat, w_hat, cfg.gamma, graph)

    polished = False
    if cfg.polish and cfg.gamma > 0:
        res = alt_min(Y, AltMinConfig(k=cfg.k, gamma=cfg.gamma), reg, start=w_hat)
        if res.trace.best_objective < objective:
            w_hat, X_hat, objective = res.selection, res.x_hat, res.trace.best_objective
            r_rounded = r_of_w(Y, w_hat, cfg.gamma, graph, reg)
            polished = True

    gap = r_rounded - r_relaxed
    if gap < -1e-9 * max(1.0, abs(r_relaxed)):
        log.warning("negative relaxation gap %.3e: relaxed solve did not reach its optimum", gap)

    diagnostics = {
        "r_relaxed": r_relaxed,
        "r_rounded": r_rounded,
        "relaxation_gap": gap,
        "objective": objective,
        "iterations": sol.trace.iterations,
        "converged": sol.trace.converged,
        "reason": sol.trace.reason,
        "projected_grad_norm": sol.trace.projected_grad_norm,
        "components": connected_components(w_hat, graph),
        "polished": polished,
    }
    return RelaxFit(w_hat, X_hat, diagnostics)
