from __future__ import annotations
import logging, os, sys

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}
_FORMAT = "[%(levelname)s] %(name)s: %(message)s"
_handler: logging.StreamHandler | None = None


def _level_from_env() -> int:
    raw = (os.getenv("LAPLACE_FORGE_LOG") or "warning").strip().lower()
    if raw.isdigit():
        return int(raw)
    return _LEVELS.get(raw, logging.WARNING)


def configure(level: int | None = None) -> None:
    """stderr 핸들러 1개만 붙인다. stdout은 명령 결과(JSON) 전용."""
    global _handler
    root = logging.getLogger("laplace_forge")
    if _handler is None:
        _handler = logging.StreamHandler(sys.stderr)
        _handler.setFormatter(logging.Formatter(_FORMAT))
        root.addHandler(_handler)
        root.propagate = False
    else:
        # 호출 시점의 sys.stderr 로 다시 연결 (main 을 여러 번 부르는 경우)
        _handler.stream = sys.stderr
    root.setLevel(level if level is not None else _level_from_env())


def get_logger(name: str) -> logging.Logger:
    # modules.altmin -> laplace_forge.altmin
    short = name.rsplit(".", 1)[-1]
    return logging.getLogger(f"laplace_forge.{short}")
