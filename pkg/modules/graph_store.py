from __future__ import annotations
import json, os
from typing import Any, Dict, Optional, Tuple

import numpy as np

from modules.errors import DomainError, InputFormatError
from modules.graph_core import CandidateGraph, EdgeSelection
from modules.log import get_logger

log = get_logger(__name__)


def graph_to_dict(w: EdgeSelection, n: int, meta: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """GraphFile 구조. edges 는 선형 인덱스 순, key 순서 고정."""
    graph = CandidateGraph(n)
    if w.m_total != graph.m_total:
        raise DomainError(f"selection has length {w.m_total}, expected M={graph.m_total} for n={n}")
    I, J = graph.endpoints()
    edges = [{"i": int(I[m]), "j": int(J[m]), "w": float(w.weights[m])} for m in w.indices()]
    return {"n": n, "k": int(w.k), "kind": w.kind, "edges": edges, "meta": dict(meta or {})}


def dump_graph(w: EdgeSelection, n: int, meta: Optional[Dict[str, Any]] = None) -> str:
    # float 는 json 이 repr(=최단 왕복 표현)로 쓴다
    return json.dumps(graph_to_dict(w, n, meta), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def save_graph(path: str, w: EdgeSelection, n: int, meta: Optional[Dict[str, Any]] = None) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_graph(w, n, meta))
    log.info("saved: %s", path)
    return path


def _field(doc: Dict[str, Any], key: str, typ, path: str):
    if key not in doc:
        raise InputFormatError(f"missing key {key!r}", path)
    v = doc[key]
    if not isinstance(v, typ) or isinstance(v, bool):
        raise InputFormatError(f"key {key!r} has wrong type {type(v).__name__}", path)
    return v


def graph_from_dict(doc: Any, path: str = "<graph>") -> Tuple[EdgeSelection, int, Dict[str, Any]]:
    if not isinstance(doc, dict):
        raise InputFormatError("graph document must be a JSON object", path)
    n = _field(doc, "n", int, path)
    k = _field(doc, "k", int, path)
    kind = doc.get("kind", "boolean")
    edges = _field(doc, "edges", list, path)
    if kind not in ("boolean", "relaxed"):
        raise InputFormatError(f"unknown kind {kind!r}", path)
    try:
        graph = CandidateGraph(n)
    except DomainError as e:
        raise InputFormatError(str(e), path) from e

    w = np.zeros(graph.m_total)
    seen = set()
    for pos, e in enumerate(edges):
        if not isinstance(e, dict) or not {"i", "j"} <= e.keys():
            raise InputFormatError(f"edge #{pos} must be an object with i, j", path)
        i, j, val = e["i"], e["j"], e.get("w", 1.0)
        if not (isinstance(i, int) and isinstance(j, int)) or not (0 <= i < j < n):
            raise InputFormatError(f"edge #{pos} ({i},{j}) requires integers 0 <= i < j < {n}", path)
        if (i, j) in seen:
            raise InputFormatError(f"duplicate edge ({i},{j})", path)
        seen.add((i, j))
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise InputFormatError(f"edge ({i},{j}) weight must be a number", path)
        val = float(val)
        if kind == "boolean" and val != 1.0:
            raise InputFormatError(f"boolean graph edge ({i},{j}) has weight {val}", path)
        if not (0.0 <= val <= 1.0):
            raise InputFormatError(f"edge ({i},{j}) weight {val} outside [0, 1]", path)
        w[graph.edge_index(i, j)] = val

    try:
        sel = EdgeSelection(w, kind, k)
    except DomainError as e:
        raise InputFormatError(str(e), path) from e
    return sel, n, dict(doc.get("meta") or {})


def load_graph(path: str) -> Tuple[EdgeSelection, int, Dict[str, Any]]:
    if not os.path.exists(path):
        raise InputFormatError("file not found", path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise InputFormatError(e.msg, path, e.lineno, e.colno) from e
    return graph_from_dict(doc, path)
