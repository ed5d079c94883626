from __future__ import annotations
import hashlib, json, os
from typing import Any, Dict, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

# 프로세스 공통 기본값 (환경변수로 덮어쓰기)
DENSE_CAP = int(os.getenv("LAPLACE_FORGE_DENSE_CAP", "256"))
RUN_LEDGER = os.getenv("LAPLACE_FORGE_RUN_LEDGER") or None

DEFAULT_GAMMA = 1.0


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RegularizationConfig(_Frozen):
    gamma: float = Field(DEFAULT_GAMMA, ge=0.0, description="smoothness weight")
    solver: Literal["auto", "dense", "cg"] = "auto"
    cg_tol: float = Field(1e-10, gt=0.0)
    cg_max_iter: int = Field(10_000, ge=1)
    dense_cap: int = Field(DENSE_CAP, ge=1)


class ArmijoConfig(_Frozen):
    initial_step: float = Field(1.0, gt=0.0)
    shrink: float = Field(0.5, gt=0.0, lt=1.0)
    sufficient_decrease: float = Field(1e-4, gt=0.0, le=0.5)
    max_backtracks: int = Field(60, ge=1)


class AltMinConfig(_Frozen):
    k: int = Field(..., ge=1)
    gamma: float = Field(DEFAULT_GAMMA, ge=0.0)
    max_iter: int = Field(50, ge=1)
    seed: int = Field(0, ge=0)
    init: Literal["random-uniform", "from-noisy-sorting"] = "random-uniform"


class RelaxConfig(_Frozen):
    k: int = Field(..., ge=1)
    gamma: float = Field(DEFAULT_GAMMA, ge=0.0)
    grad_tol: float = Field(1e-9, gt=0.0)
    obj_rel_tol: float = Field(1e-12, gt=0.0)
    max_iter: int = Field(1000, ge=1)
    armijo: ArmijoConfig = ArmijoConfig()
    polish: bool = False


class SynthConfig(_Frozen):
    n: int = Field(..., ge=2)
    k_true: int = Field(..., ge=1)
    l: int = Field(..., ge=1)
    l_eval: int = Field(0, ge=0, description="held-out snapshots (0 = same as l)")
    alpha: float = Field(10.0, gt=0.0)
    sigma: float = Field(0.0, ge=0.0)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_k(self) -> "SynthConfig":
        m = self.n * (self.n - 1) // 2
        if self.k_true > m:
            raise ValueError(f"k_true={self.k_true} exceeds candidate edges M={m}")
        return self

    @property
    def eval_snapshots(self) -> int:
        return self.l_eval or self.l


class LearnOptions(_Frozen):
    """Monte Carlo / CLI 에서 learner 호출에 쓰는 공통 옵션"""
    k: int = Field(..., ge=1)
    gamma: float = Field(DEFAULT_GAMMA, ge=0.0)
    max_iter: int | None = Field(None, ge=1)
    tol: float | None = Field(None, gt=0.0)
    init: Literal["random-uniform", "from-noisy-sorting"] = "random-uniform"
    starts: int = Field(1, ge=1)
    from_covariance: bool = False
    polish: bool = False


def config_hash(cfg: BaseModel | Dict[str, Any]) -> str:
    payload = cfg.model_dump(mode="json") if isinstance(cfg, BaseModel) else cfg
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]
