# --- file: forge.py ---
from __future__ import annotations

import argparse, json, os, sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from modules import log as forge_log
from modules.config import DEFAULT_GAMMA, LearnOptions, RegularizationConfig, SynthConfig, config_hash
from modules.errors import EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, DomainError, ForgeError
from modules.graph_store import load_graph, save_graph
from modules.run_ledger import list_runs, record_run
from modules.signal_io import read_signal, write_series, write_signal
from topology import denoise_signal, evaluate_sweep, learn_topology, parse_values, synthesize

log = forge_log.get_logger("forge")

# ---------------------------
# Commands
# ---------------------------

def _reg(args) -> RegularizationConfig:
    # --tol / --max-iter 는 CG 경로에도 적용
    extra: Dict[str, Any] = {}
    if args.tol is not None:
        extra["cg_tol"] = args.tol
    if args.max_iter is not None:
        extra["cg_max_iter"] = args.max_iter
    return RegularizationConfig(gamma=args.gamma, solver=args.solver, **extra)


def cmd_learn(args) -> Dict[str, Any]:
    Y = read_signal(args.input, transpose=args.transpose)
    opts = LearnOptions(k=args.k, gamma=args.gamma, max_iter=args.max_iter, tol=args.tol, init=args.init,
                        starts=args.starts, from_covariance=args.covariance, polish=args.polish)
    sel, summary = learn_topology(args.method, Y, opts, seed=args.seed, reg=_reg(args), jobs=args.jobs)
    outputs: List[str] = []
    if args.output:
        meta = {"method": args.method, "gamma": args.gamma, "seed": args.seed,
                "config_hash": config_hash(opts), "objective": summary["objective"]}
        outputs.append(save_graph(args.output, sel, summary["n"], meta))
    if args.denoised:
        X, _ = denoise_signal(Y, sel, summary["n"], _reg(args))
        outputs.append(write_signal(args.denoised, X, transpose=args.transpose))
    return {"summary": summary, "outputs": outputs, "converged": summary["converged"]}


def cmd_denoise(args) -> Dict[str, Any]:
    Y = read_signal(args.input, transpose=args.transpose)
    sel, n, _ = load_graph(args.graph)
    X, summary = denoise_signal(Y, sel, n, _reg(args))
    outputs = [write_signal(args.output, X, transpose=args.transpose)] if args.output else []
    return {"summary": summary, "outputs": outputs, "converged": True}


def _synth_cfg(args) -> SynthConfig:
    return SynthConfig(n=args.n, k_true=args.k, l=args.l, l_eval=args.l_eval, alpha=args.alpha,
                       sigma=args.sigma, seed=args.seed)


def cmd_synth(args) -> Dict[str, Any]:
    cfg = _synth_cfg(args)
    data = synthesize(cfg)
    out = args.output
    os.makedirs(out, exist_ok=True)
    meta = {"planted": True, "alpha": cfg.alpha, "seed": cfg.seed, "config_hash": config_hash(cfg)}
    outputs = [
        save_graph(os.path.join(out, "graph.json"), data["graph"], cfg.n, meta),
        write_signal(os.path.join(out, f"clean.{args.format}"), data["clean"], transpose=args.transpose),
        write_signal(os.path.join(out, f"noisy.{args.format}"), data["noisy"], transpose=args.transpose),
    ]
    return {"summary": data["summary"], "outputs": outputs, "converged": True}


def cmd_eval(args) -> Dict[str, Any]:
    values = parse_values(args.values)
    X = read_signal(args.input, transpose=args.transpose) if args.input else None
    cfg = opts = None
    if args.sweep != "k" or X is None:
        if args.k is None:
            raise DomainError(f"--k is required for a {args.sweep} sweep")
        if X is None and args.n is None:
            raise DomainError("--n or --input is required")
        n = X.shape[0] if X is not None else args.n
        # 실측 데이터는 앞쪽 l 개 snapshot 으로 학습, 나머지로 평가
        l = args.l if X is None else max(1, min(args.l, X.shape[1] - 1))
        cfg = SynthConfig(n=n, k_true=args.k, l=l, l_eval=args.l_eval, alpha=args.alpha,
                          sigma=args.sigma, seed=args.seed)
        opts = LearnOptions(k=args.k, gamma=args.gamma, max_iter=args.max_iter, tol=args.tol,
                            init=args.init, starts=args.starts)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = evaluate_sweep(args.sweep, values, methods=methods, cfg=cfg, X=X, trials=args.trials,
                          opts=opts, jobs=args.jobs, reg=_reg(args))
    outputs = [write_series(args.output, rows)] if args.output else []
    return {"summary": {"sweep": args.sweep, "points": len(values), "rows": rows},
            "outputs": outputs, "converged": True}


def cmd_runs(args) -> Dict[str, Any]:
    runs = list_runs(args.filter, path=args.ledger)
    return {"summary": {"count": len(runs), "runs": runs[: args.limit]}, "outputs": [], "converged": True}


# ---------------------------
# CLI
# ---------------------------

def _common(p: argparse.ArgumentParser, *, k_required: bool = False) -> None:
    p.add_argument("--input", help="SignalFile (CSV rows=nodes, 또는 .parquet)")
    p.add_argument("--output", help="출력 경로")
    p.add_argument("--k", type=int, required=k_required, help="edge 개수 K")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help=f"smoothness 가중치 (기본 {DEFAULT_GAMMA})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker 수 (multistart / Monte Carlo)")
    p.add_argument("--max-iter", type=int, default=None, help="altmin / relax 반복 상한, CG 반복 상한")
    p.add_argument("--tol", type=float, default=None, help="relax: 목적함수 상대 감소 허용치, CG: 상대 residual 허용치")
    p.add_argument("--transpose", action="store_true", help="column-major 파일 (rows=snapshots)")
    p.add_argument("--solver", choices=["auto", "dense", "cg"], default="auto")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forge", description="K-edge sparse graph topology learning")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="signal 로부터 K-edge 그래프 학습")
    p.add_argument("method", choices=["noiseless", "altmin", "relax"])
    _common(p, k_required=True)
    p.add_argument("--init", choices=["random-uniform", "from-noisy-sorting"], default="random-uniform")
    p.add_argument("--starts", type=int, default=1, help="altmin multistart 횟수")
    p.add_argument("--covariance", action="store_true", help="noiseless: 표본 공분산으로 비용 계산")
    p.add_argument("--polish", action="store_true", help="relax: 반올림 결과에서 altmin 으로 다듬기")
    p.add_argument("--denoised", help="학습된 그래프로 denoise 한 X_hat 저장 경로")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("denoise", help="주어진 그래프로 Tikhonov denoising")
    _common(p)
    p.add_argument("--graph", required=True, help="GraphFile (JSON)")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("synth", help="planted graph + smooth signal 생성")
    _common(p, k_required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=int, default=50)
    p.add_argument("--l-eval", type=int, default=0)
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--format", choices=["csv", "parquet"], default="csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="sigma / k sweep 로 plot 용 series 생성")
    _common(p)
    p.add_argument("--sweep", choices=["sigma", "k", "head-to-head"], required=True)
    p.add_argument("--values", required=True, help="a:b:step 또는 v1,v2,...")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--methods", default="noiseless,altmin,relax,raw")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--l", type=int, default=50)
    p.add_argument("--l-eval", type=int, default=0)
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--init", choices=["random-uniform", "from-noisy-sorting"], default="random-uniform")
    p.add_argument("--starts", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("runs", help="run ledger 조회")
    p.add_argument("--filter", help="command 이름으로 필터")
    p.add_argument("--ledger", help="ledger 경로 (기본 LAPLACE_FORGE_RUN_LEDGER)")
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(func=cmd_runs)
    return ap


def _validate(args) -> None:
    if args.command == "synth" and not args.output:
        raise DomainError("synth needs --output DIR")
    if args.command in ("learn", "denoise") and not args.input:
        raise DomainError(f"{args.command} needs --input")
    for flag in ("jobs", "starts", "trials"):
        v = getattr(args, flag, None)
        if v is not None and v < 1:
            raise DomainError(f"--{flag} must be >= 1")


def main(argv: Optional[List[str]] = None) -> int:
    forge_log.configure()
    args = build_parser().parse_args(argv)
    try:
        _validate(args)
        result = args.func(args)
    except ForgeError as e:
        log.error("%s", e)
        return e.exit_code
    except (ValidationError, ValueError) as e:
        log.error("invalid argument: %s", e)
        return EXIT_USAGE

    if args.command != "runs":
        cfg = {k: v for k, v in vars(args).items() if k != "func"}
        record_run(args.command, cfg, result["outputs"], result["summary"])

    print(json.dumps(result["summary"], indent=2, ensure_ascii=False, default=str))
    if not result["converged"]:
        log.warning("%s did not converge; outputs written, exiting %d", args.command, EXIT_NONCONVERGED)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
