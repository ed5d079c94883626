from __future__ import annotations
import json, os, time
from typing import Any, Dict, List, Optional

from modules import config
from modules.config import config_hash
from modules.log import get_logger

log = get_logger(__name__)


def ledger_path(path: Optional[str] = None) -> Optional[str]:
    return path or config.RUN_LEDGER


def record_run(command: str, cfg: Dict[str, Any], outputs: List[str], summary: Dict[str, Any],
               path: Optional[str] = None) -> Optional[Dict[str, Any]]:
    """CLI 실행 1건 append. ledger 경로가 없으면 기록 안 함."""
    path = ledger_path(path)
    if not path:
        return None
    rec = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "outputs": list(outputs),
        "summary": summary,
        "ts": int(time.time()),
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True, default=str) + "\n")
    return rec


def list_runs(command: Optional[str] = None, path: Optional[str] = None) -> List[Dict[str, Any]]:
    path = ledger_path(path)
    if not path or not os.path.exists(path):
        return []
    out: List[Dict[str, Any]] = []
    with open(path, "r", encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                o = json.loads(line)
            except json.JSONDecodeError:
                # 중간에 잘린 기록은 건너뜀
                log.warning("skipping malformed ledger line %d in %s", n, path)
                continue
            if command is None or o.get("command") == command:
                out.append(o)
    # 최신이 앞으로
    out.sort(key=lambda r: r.get("ts", 0), reverse=True)
    return out
