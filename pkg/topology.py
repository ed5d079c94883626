# --- file: topology.py ---
from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.config import LearnOptions, RegularizationConfig, SynthConfig
from modules.denoiser import TikhonovSystem, joint_objective
from modules.errors import DomainError
from modules.experiments import (
    LEARNERS, add_noise, generate_smooth_signals, head_to_head, learn, plant_graph, sweep_k, sweep_sigma,
)
from modules.graph_core import CandidateGraph, EdgeSelection, as_signal_matrix, assemble_laplacian, connected_components

# ---------------------------
# learn / denoise
# ---------------------------

def learn_topology(method: str, Y, opts: LearnOptions, seed: int = 0,
                   reg: Optional[RegularizationConfig] = None, jobs: int = 1) -> Tuple[EdgeSelection, Dict[str, Any]]:
    """learner 실행 후 (선택, JSON 용 요약)"""
    if method not in LEARNERS or method == "raw":
        raise DomainError(f"unknown learner {method!r}")
    Y = as_signal_matrix(Y, name="Y")
    graph = CandidateGraph(Y.shape[0])
    if opts.k > graph.m_total:
        raise DomainError(f"k={opts.k} exceeds candidate edges M={graph.m_total} for n={graph.n}")
    learned = learn(method, Y, opts, seed, reg, jobs)
    info = learned.info

    summary: Dict[str, Any] = {
        "method": method,
        "n": graph.n,
        "m_total": graph.m_total,
        "k": learned.selection.k,
        "gamma": opts.gamma,
        "converged": bool(info.get("converged", True)),
        "iterations": int(info.get("iterations", 0)),
    }
    if method == "noiseless":
        summary["objective"] = info["smoothness"]
        summary["components"] = info["components"]
    else:
        summary["objective"] = info["objective"]
        summary["reason"] = info.get("reason", "")
        summary["components"] = info.get("components", connected_components(learned.selection, graph))
    if method == "relax":
        for key in ("r_relaxed", "r_rounded", "relaxation_gap", "projected_grad_norm", "polished"):
            summary[key] = info[key]
    return learned.selection, summary


def denoise_signal(Y, w: EdgeSelection, n: int, reg: RegularizationConfig) -> Tuple[np.ndarray, Dict[str, Any]]:
    Y = as_signal_matrix(Y, name="Y")
    if Y.shape[0] != n:
        raise DomainError(f"signal has {Y.shape[0]} nodes, graph file has n={n}")
    L = assemble_laplacian(w, CandidateGraph(n))
    system = TikhonovSystem(L, reg.gamma, reg)
    X = system.solve(Y)
    fidelity = float(np.sum((Y - X) ** 2))
    smooth = L.quadratic(X)
    return X, {
        "n": n,
        "snapshots": Y.shape[1],
        "edges": L.num_edges,
        "gamma": reg.gamma,
        "solver": system.method,
        "fidelity": fidelity,
        "smoothness": smooth,
        "objective": joint_objective(Y, X, L, reg.gamma),
        "residual": system.residual(X, Y),
    }


# ---------------------------
# synthetic data / evaluation
# ---------------------------

def synthesize(cfg: SynthConfig) -> Dict[str, Any]:
    w_true = plant_graph(cfg)
    X = generate_smooth_signals(w_true, cfg)
    Y = add_noise(X, cfg.sigma, cfg.seed)
    return {
        "graph": w_true,
        "clean": X,
        "noisy": Y,
        "summary": {
            "n": cfg.n, "k": cfg.k_true, "snapshots": cfg.l, "alpha": cfg.alpha,
            "sigma": cfg.sigma, "seed": cfg.seed,
            "components": connected_components(w_true, CandidateGraph(cfg.n)),
        },
    }


def evaluate_sweep(sweep: str, values: Sequence[float], *, methods: Sequence[str] = ("noiseless", "altmin", "relax", "raw"),
                   cfg: Optional[SynthConfig] = None, X=None, trials: int = 20,
                   opts: Optional[LearnOptions] = None, jobs: int = 1,
                   reg: Optional[RegularizationConfig] = None) -> List[Dict[str, Any]]:
    """plot 용 series rows. sigma sweep 는 Monte Carlo, k sweep 는 정렬 비용 누적."""
    if sweep == "k":
        if X is None:
            if cfg is None:
                raise DomainError("k sweep needs --input or synthetic flags")
            X = generate_smooth_signals(plant_graph(cfg), cfg)
        return sweep_k(X, [int(v) for v in values])
    if sweep == "sigma":
        if cfg is None:
            raise DomainError("sigma sweep needs synthetic flags")
        for m in methods:
            if m not in LEARNERS:
                raise DomainError(f"unknown learner {m!r}; choose from {sorted(LEARNERS)}")
        x_clean = as_signal_matrix(X) if X is not None else None
        return sweep_sigma(methods, cfg, values, trials, opts, jobs, reg, x_clean=x_clean)
    if sweep == "head-to-head":
        if cfg is None:
            raise DomainError("head-to-head sweep needs synthetic flags")
        g = opts.gamma if opts else 1.0
        rows = []
        for sigma in values:
            res = head_to_head(trials, n=cfg.n, l=cfg.l, k=cfg.k_true, gamma=g, sigma=float(sigma),
                               starts=max(opts.starts if opts else 1, 5), seed=cfg.seed)
            rows.append({"sigma": float(sigma), "instances": res["instances"],
                         "relax_not_worse": res["relax_not_worse"], "fraction": res["fraction"]})
        return rows
    raise DomainError(f"unknown sweep {sweep!r}")


def parse_values(spec: str) -> List[float]:
    """'a:b:step' (양 끝 포함) 또는 'v1,v2,...'"""
    spec = spec.strip()
    parts = spec.split(":") if ":" in spec else [p for p in spec.split(",") if p.strip()]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise DomainError(f"cannot parse values {spec!r}") from None
    if ":" not in spec:
        if not nums:
            raise DomainError("empty value list")
        return nums
    if len(nums) != 3 or nums[2] <= 0 or nums[1] < nums[0]:
        raise DomainError(f"range {spec!r} must be start:stop:step with step > 0 and stop >= start")
    start, stop, step = nums
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]
