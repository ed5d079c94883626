from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from modules.config import AltMinConfig, RegularizationConfig
from modules.denoiser import TikhonovSystem, joint_objective
from modules.errors import DomainError
from modules.graph_core import CandidateGraph, EdgeSelection, as_signal_matrix, assemble_laplacian
from modules.log import get_logger
from modules.noiseless import edge_costs, select_k_smallest
from modules.rng import STREAM_INIT, derive_seed, generator

log = get_logger(__name__)

# 현재 선택이 이미 최적이면 유지 (동률 edge 사이 진동 방지). ||X||_F^2 에 대한 상대 slack.
_TIE_SLACK = 1e-12


@dataclass
class AltMinTrace:
    objective_per_iteration: List[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    reason: str = ""
    selections: List[Tuple[int, ...]] = field(default_factory=list)
    best_objective: float = float("inf")


class AltMinResult(NamedTuple):
    selection: EdgeSelection
    x_hat: np.ndarray
    trace: AltMinTrace


def random_selection(m_total: int, k: int, seed: int) -> EdgeSelection:
    """seed 고정 partial Fisher-Yates 로 균일 k-부분집합"""
    rng = generator(seed, STREAM_INIT)
    perm = np.arange(m_total)
    for t in range(k):
        s = int(rng.integers(t, m_total))
        perm[t], perm[s] = perm[s], perm[t]
    return EdgeSelection.from_indices(perm[:k], m_total)


def initial_selection(Y: np.ndarray, cfg: AltMinConfig, graph: CandidateGraph) -> EdgeSelection:
    if cfg.init == "from-noisy-sorting":
        return select_k_smallest(edge_costs(Y, graph), cfg.k)
    return random_selection(graph.m_total, cfg.k, cfg.seed)


def update_signals(Y: np.ndarray, w: EdgeSelection, reg: RegularizationConfig,
                   graph: CandidateGraph) -> np.ndarray:
    """X-step: X = [I + gamma L_s(w)]^{-1} Y"""
    return TikhonovSystem(assemble_laplacian(w, graph), reg.gamma, reg).solve(Y)


def update_graph(X: np.ndarray, current: Optional[EdgeSelection], k: int,
                 graph: CandidateGraph) -> EdgeSelection:
    """w-step: c_m(X) 의 k 최소. 현재 선택이 slack 안에서 최적이면 그대로 둔다."""
    c = edge_costs(X, graph)
    cand = select_k_smallest(c, k)
    if current is not None and current.k == k and current.kind == "boolean":
        slack = _TIE_SLACK * float(np.sum(X * X))
        if c[current.indices()].sum() <= c[cand.indices()].sum() + slack:
            return current
    return cand


def _reg_for(cfg: AltMinConfig, reg: Optional[RegularizationConfig]) -> RegularizationConfig:
    if reg is None:
        return RegularizationConfig(gamma=cfg.gamma)
    if reg.gamma != cfg.gamma:
        return reg.model_copy(update={"gamma": cfg.gamma})
    return reg


def alt_min(Y, cfg: AltMinConfig, reg: Optional[RegularizationConfig] = None,
            start: Optional[EdgeSelection] = None) -> AltMinResult:
    """start 가 주어지면 cfg.init 대신 그 선택에서 시작"""
    Y = as_signal_matrix(Y, name="Y")
    graph = CandidateGraph(Y.shape[0])
    if cfg.k > graph.m_total:
        raise DomainError(f"k={cfg.k} exceeds candidate edges M={graph.m_total}")
    reg = _reg_for(cfg, reg)

    if start is not None:
        if start.kind != "boolean" or start.k != cfg.k or start.m_total != graph.m_total:
            raise DomainError("start selection must be a boolean k-subset of the candidate edges")
        w = start
    else:
        w = initial_selection(Y, cfg, graph)
    trace = AltMinTrace(selections=[tuple(int(i) for i in w.indices())])
    seen = {w.key()}
    best: Optional[Tuple[float, EdgeSelection, np.ndarray]] = None

    for it in range(1, cfg.max_iter + 1):
        trace.iterations_run = it
        X = update_signals(Y, w, reg, graph)
        f_x = joint_objective(Y, X, w, cfg.gamma, graph)
        trace.objective_per_iteration.append(f_x)
        # X-step 직후의 (w, X(w)) 쌍만 후보. 동률이면 최신 것을 유지
        if best is None or f_x <= best[0]:
            best = (f_x, w, X)

        w_new = update_graph(X, w, cfg.k, graph)
        f_w = joint_objective(Y, X, w_new, cfg.gamma, graph)
        trace.objective_per_iteration.append(f_w)
        log.debug("iter %d: f(X-step)=%.12g f(w-step)=%.12g", it, f_x, f_w)

        if w_new == w:
            trace.converged, trace.reason = True, "fixed-point"
            break
        if w_new.key() in seen:
            trace.reason = "cycle"
            log.warning("selection cycle detected at iteration %d; stopping", it)
            break
        seen.add(w_new.key())
        trace.selections.append(tuple(int(i) for i in w_new.indices()))
        w = w_new
    else:
        trace.reason = "max-iter"
        log.warning("alternating minimization hit max_iter=%d without a fixed point", cfg.max_iter)

    f_best, w_best, X_best = best
    trace.best_objective = f_best
    return AltMinResult(w_best, X_best, trace)


def start_seeds(seed: int, starts: int) -> List[int]:
    # 첫 start 는 master seed 그대로 -> starts=1 이면 alt_min 과 동일
    return [seed] + [derive_seed(seed, s) for s in range(1, starts)]


def alt_min_multistart(Y, cfg: AltMinConfig, starts: int = 5, jobs: int = 1,
                       reg: Optional[RegularizationConfig] = None) -> AltMinResult:
    """독립 seed 로 여러 번 돌리고 목적함수가 가장 낮은 결과 반환 (동률은 앞 start)"""
    if starts < 1:
        raise DomainError(f"starts must be >= 1, got {starts}")
    Y = as_signal_matrix(Y, name="Y")
    cfgs = [cfg.model_copy(update={"seed": s}) for s in start_seeds(cfg.seed, starts)]
    if jobs == 1 or starts == 1:
        results = [alt_min(Y, c, reg) for c in cfgs]
    else:
        results = Parallel(n_jobs=jobs)(delayed(alt_min)(Y, c, reg) for c in cfgs)
    return min(results, key=lambda r: r.trace.best_objective)
