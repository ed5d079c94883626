from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from modules.altmin import alt_min, alt_min_multistart
from modules.config import AltMinConfig, LearnOptions, RegularizationConfig, RelaxConfig, SynthConfig
from modules.denoiser import TikhonovSystem, joint_objective
from modules.errors import DomainError, TrialError
from modules.graph_core import (
    CandidateGraph, EdgeSelection, as_signal_matrix, assemble_laplacian,
)
from modules.log import get_logger
from modules.noiseless import learn_noiseless, smoothness_path
from modules.relax import learn_relax
from modules.rng import STREAM_NOISE, STREAM_PLANT, STREAM_SIGNAL, STREAM_TRIAL, derive_seed, generator

log = get_logger(__name__)

METRICS = ("mse", "edge_precision", "edge_recall", "edge_f1", "smoothness")


@dataclass(frozen=True)
class EvalReport:
    mse: float
    edge_precision: float
    edge_recall: float
    edge_f1: float
    smoothness: float
    trials: int = 1


@dataclass(frozen=True)
class MonteCarloReport:
    method: str
    trials: int
    master_seed: int
    mean: Dict[str, float] = field(default_factory=dict)
    stderr: Dict[str, float] = field(default_factory=dict)

    def as_report(self) -> EvalReport:
        return EvalReport(trials=self.trials, **{m: self.mean[m] for m in METRICS})

    def as_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"method": self.method, "trials": self.trials}
        for m in METRICS:
            row[m] = self.mean[m]
            row[f"{m}_se"] = self.stderr[m]
        return row


# ---------------------------
# synthetic ground truth
# ---------------------------

def plant_graph(cfg: SynthConfig) -> EdgeSelection:
    M = CandidateGraph(cfg.n).m_total
    rng = generator(cfg.seed, STREAM_PLANT)
    return EdgeSelection.from_indices(rng.choice(M, size=cfg.k_true, replace=False), M)


def generate_smooth_signals(w_true: EdgeSelection, cfg: SynthConfig,
                            snapshots: Optional[int] = None) -> np.ndarray:
    """X = [I + alpha L_s(w_true)]^{-1} Z,  Z ~ N(0, 1)"""
    graph = CandidateGraph(cfg.n)
    l = snapshots or cfg.l
    Z = generator(cfg.seed, STREAM_SIGNAL).standard_normal((cfg.n, l))
    L = assemble_laplacian(w_true, graph)
    return TikhonovSystem(L, cfg.alpha, RegularizationConfig(gamma=cfg.alpha)).solve(Z)


def add_noise(X, sigma: float, seed: int) -> np.ndarray:
    X = as_signal_matrix(X)
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return X.copy()
    return X + sigma * generator(seed, STREAM_NOISE).standard_normal(X.shape)


def evaluate(w_hat: EdgeSelection, x_hat, w_true: Optional[EdgeSelection], x_true) -> EvalReport:
    x_hat = as_signal_matrix(x_hat, name="x_hat")
    x_true = as_signal_matrix(x_true, name="x_true")
    if x_hat.shape != x_true.shape:
        raise DomainError(f"x_hat shape {x_hat.shape} does not match x_true shape {x_true.shape}")
    graph = CandidateGraph(x_hat.shape[0])
    if w_hat.m_total != graph.m_total:
        raise DomainError(f"w_hat has length {w_hat.m_total}, expected M={graph.m_total}")

    mse = float(np.sum((x_hat - x_true) ** 2)) / x_hat.size
    smooth = assemble_laplacian(w_hat, graph).quadratic(x_hat) / x_hat.shape[1]

    if w_true is None:
        # ground truth graph 없음 (실측 데이터)
        return EvalReport(mse, math.nan, math.nan, math.nan, smooth)
    if w_true.m_total != graph.m_total:
        raise DomainError(f"w_true has length {w_true.m_total}, expected M={graph.m_total}")
    hat, true = w_hat.weights > 0, w_true.weights > 0
    tp = int(np.count_nonzero(hat & true))
    precision = tp / int(hat.sum()) if hat.any() else 0.0
    recall = tp / int(true.sum()) if true.any() else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(mse, precision, recall, f1, smooth)


# ---------------------------
# learners
# ---------------------------

class LearnedGraph(NamedTuple):
    selection: EdgeSelection
    info: Dict[str, Any]


def _learn_noiseless(Y, opts: LearnOptions, seed: int, reg: RegularizationConfig, jobs: int = 1) -> LearnedGraph:
    fit = learn_noiseless(Y, opts.k, from_covariance=opts.from_covariance)
    return LearnedGraph(fit.selection, {
        "converged": True, "iterations": 0, "smoothness": fit.smoothness, "components": fit.components,
    })


def _learn_altmin(Y, opts: LearnOptions, seed: int, reg: RegularizationConfig, jobs: int = 1) -> LearnedGraph:
    cfg = AltMinConfig(k=opts.k, gamma=opts.gamma, seed=seed, init=opts.init,
                       **({"max_iter": opts.max_iter} if opts.max_iter else {}))
    res = alt_min_multistart(Y, cfg, opts.starts, jobs, reg) if opts.starts > 1 else alt_min(Y, cfg, reg)
    t = res.trace
    return LearnedGraph(res.selection, {
        "converged": t.converged, "iterations": t.iterations_run, "reason": t.reason,
        "objective": t.best_objective,
    })


def _learn_relax(Y, opts: LearnOptions, seed: int, reg: RegularizationConfig, jobs: int = 1) -> LearnedGraph:
    extra: Dict[str, Any] = {}
    if opts.max_iter:
        extra["max_iter"] = opts.max_iter
    if opts.tol:
        extra["obj_rel_tol"] = opts.tol
    fit = learn_relax(Y, RelaxConfig(k=opts.k, gamma=opts.gamma, polish=opts.polish, **extra), reg)
    return LearnedGraph(fit.selection, dict(fit.diagnostics))


def _learn_raw(Y, opts: LearnOptions, seed: int, reg: RegularizationConfig, jobs: int = 1) -> LearnedGraph:
    # 노이즈 제거 없음 기준선: 빈 그래프 -> X_hat = Y
    M = CandidateGraph(as_signal_matrix(Y).shape[0]).m_total
    return LearnedGraph(EdgeSelection.empty(M), {"converged": True, "iterations": 0})


LEARNERS: Dict[str, Callable[..., LearnedGraph]] = {
    "noiseless": _learn_noiseless,
    "altmin": _learn_altmin,
    "relax": _learn_relax,
    "raw": _learn_raw,
}


def learn(method: str, Y, opts: LearnOptions, seed: int = 0,
          reg: Optional[RegularizationConfig] = None, jobs: int = 1) -> LearnedGraph:
    fn = LEARNERS.get(method)
    if fn is None:
        raise DomainError(f"unknown learner {method!r}; choose from {sorted(LEARNERS)}")
    reg = (reg or RegularizationConfig()).model_copy(update={"gamma": opts.gamma})
    return fn(as_signal_matrix(Y, name="Y"), opts, seed, reg, jobs)


# ---------------------------
# trials
# ---------------------------

def trial_seed(master_seed: int, trial: int) -> int:
    return derive_seed(master_seed, STREAM_TRIAL, trial)


def _score(method: str, Y: np.ndarray, X: np.ndarray, l_train: int, opts: LearnOptions,
           seed: int, reg: RegularizationConfig, w_true: Optional[EdgeSelection]) -> EvalReport:
    # 학습은 training split 에서만, MSE 는 held-out split 에서
    learned = learn(method, Y[:, :l_train], opts, seed, reg)
    Y_eval = Y[:, l_train:]
    L = assemble_laplacian(learned.selection, CandidateGraph(Y.shape[0]))
    x_hat = TikhonovSystem(L, opts.gamma, reg.model_copy(update={"gamma": opts.gamma})).solve(Y_eval)
    return evaluate(learned.selection, x_hat, w_true, X[:, l_train:])


def run_trial(method: str, cfg: SynthConfig, opts: LearnOptions, trial: int,
              reg: Optional[RegularizationConfig] = None) -> EvalReport:
    seed = trial_seed(cfg.seed, trial)
    try:
        tcfg = cfg.model_copy(update={"seed": seed})
        w_true = plant_graph(tcfg)
        X = generate_smooth_signals(w_true, tcfg, snapshots=cfg.l + cfg.eval_snapshots)
        Y = add_noise(X, cfg.sigma, seed)
        return _score(method, Y, X, cfg.l, opts, seed, reg or RegularizationConfig(), w_true)
    except Exception as e:
        raise TrialError(trial, seed, e) from e


def run_data_trial(method: str, X_clean: np.ndarray, l_train: int, sigma: float, opts: LearnOptions,
                   master_seed: int, trial: int, reg: Optional[RegularizationConfig] = None) -> EvalReport:
    seed = trial_seed(master_seed, trial)
    try:
        Y = add_noise(X_clean, sigma, seed)
        return _score(method, Y, X_clean, l_train, opts, seed, reg or RegularizationConfig(), None)
    except Exception as e:
        raise TrialError(trial, seed, e) from e


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    vals = [v for v in values if not math.isnan(v)]
    n = len(vals)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)


def aggregate(method: str, reports: Sequence[EvalReport], master_seed: int) -> MonteCarloReport:
    # trial 순서대로 들어온 결과를 fsum 으로 합산 -> jobs 수와 무관하게 동일
    mean, se = {}, {}
    for m in METRICS:
        mean[m], se[m] = _mean_se([getattr(r, m) for r in reports])
    return MonteCarloReport(method, len(reports), master_seed, mean, se)


def _run_many(fn, args_list: List[tuple], jobs: int) -> List[EvalReport]:
    if jobs == 1 or len(args_list) == 1:
        return [fn(*a) for a in args_list]
    return Parallel(n_jobs=jobs)(delayed(fn)(*a) for a in args_list)


def monte_carlo(method: str, cfg: SynthConfig, trials: int, opts: Optional[LearnOptions] = None,
                jobs: int = 1, reg: Optional[RegularizationConfig] = None) -> MonteCarloReport:
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    opts = opts or LearnOptions(k=cfg.k_true)
    reports = _run_many(run_trial, [(method, cfg, opts, t, reg) for t in range(trials)], jobs)
    return aggregate(method, reports, cfg.seed)


def monte_carlo_on_data(method: str, X_clean, l_train: int, sigma: float, trials: int,
                        opts: LearnOptions, seed: int = 0, jobs: int = 1,
                        reg: Optional[RegularizationConfig] = None) -> MonteCarloReport:
    """실측 데이터: 앞 l_train 개 snapshot 으로 학습, 나머지로 평가. trial 마다 새 노이즈."""
    X_clean = as_signal_matrix(X_clean)
    if not (1 <= l_train < X_clean.shape[1]):
        raise DomainError(f"l_train={l_train} must leave at least one evaluation snapshot "
                          f"(data has {X_clean.shape[1]})")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    args = [(method, X_clean, l_train, sigma, opts, seed, t, reg) for t in range(trials)]
    return aggregate(method, _run_many(run_data_trial, args, jobs), seed)


# ---------------------------
# sweeps (plot-ready rows)
# ---------------------------

def sweep_sigma(methods: Iterable[str], cfg: SynthConfig, sigmas: Iterable[float], trials: int,
                opts: Optional[LearnOptions] = None, jobs: int = 1,
                reg: Optional[RegularizationConfig] = None,
                x_clean: Optional[np.ndarray] = None) -> List[Dict[str, Any]]:
    methods, sigmas = list(methods), [float(s) for s in sigmas]
    opts = opts or LearnOptions(k=cfg.k_true)
    rows = []
    with tqdm(total=len(methods) * len(sigmas), desc="sigma sweep", disable=None) as bar:
        for sigma in sigmas:
            for method in methods:
                if x_clean is not None:
                    rep = monte_carlo_on_data(method, x_clean, cfg.l, sigma, trials, opts, cfg.seed, jobs, reg)
                else:
                    rep = monte_carlo(method, cfg.model_copy(update={"sigma": sigma}), trials, opts, jobs, reg)
                rows.append({"sigma": sigma, **rep.as_row()})
                bar.update(1)
    return rows


def sweep_k(X, ks: Iterable[int]) -> List[Dict[str, Any]]:
    return smoothness_path(X, ks)


def head_to_head(instances: int, n: int = 6, l: int = 4, k: int = 3, gamma: float = 1.0,
                 sigma: float = 0.5, starts: int = 5, seed: int = 0) -> Dict[str, Any]:
    """relax 학습 결과와 multistart alt-min 의 joint objective 비교"""
    wins = 0
    rows = []
    for t in range(instances):
        s = trial_seed(seed, t)
        cfg = SynthConfig(n=n, k_true=k, l=l, sigma=sigma, seed=s)
        X = generate_smooth_signals(plant_graph(cfg), cfg)
        Y = add_noise(X, sigma, s)
        fit = learn_relax(Y, RelaxConfig(k=k, gamma=gamma))
        am = alt_min_multistart(Y, AltMinConfig(k=k, gamma=gamma, seed=s), starts)
        f_relax = joint_objective(Y, fit.x_hat, fit.selection, gamma)
        f_alt = am.trace.best_objective
        win = f_relax <= f_alt + 1e-9 * max(1.0, abs(f_alt))
        wins += int(win)
        rows.append({"instance": t, "relax": f_relax, "altmin": f_alt, "relax_not_worse": win})
    return {"instances": instances, "relax_not_worse": wins,
            "fraction": wins / instances if instances else math.nan, "rows": rows}
