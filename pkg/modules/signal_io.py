from __future__ import annotations
import csv, math, os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pyarrow as pa
import pyarrow.parquet as pq

from modules.errors import InputFormatError
from modules.log import get_logger

log = get_logger(__name__)


def is_parquet_path(path: str) -> bool:
    return str(path).lower().endswith((".parquet", ".pq"))


def fmt_float(v: float) -> str:
    # 17 유효숫자 -> float64 왕복 정확
    return format(float(v), ".17g")


def _parse_cell(cell: str, path: str, line: int, col: int) -> float:
    try:
        v = float(cell.strip())
    except ValueError:
        raise InputFormatError(f"cannot parse {cell!r} as a real number", path, line, col) from None
    if not math.isfinite(v):
        raise InputFormatError(f"non-finite value {cell!r}", path, line, col)
    return v


def _is_number(cell: str) -> bool:
    try:
        float(cell.strip())
        return True
    except ValueError:
        return False


def _read_csv(path: str) -> Tuple[np.ndarray, Optional[List[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = [(i, r) for i, r in enumerate(csv.reader(f), start=1) if any(c.strip() for c in r)]
    if not rows:
        raise InputFormatError("empty signal file", path)

    header = None
    # 첫 행의 모든 셀이 숫자가 아니면 header. 섞여 있으면 아래 파싱에서 line/col 오류
    if not any(_is_number(c) for c in rows[0][1]):
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise InputFormatError("signal file has a header but no data rows", path)

    width = len(rows[0][1])
    if header is not None and len(header) != width:
        raise InputFormatError(f"header has {len(header)} labels, data rows have {width} cells", path, 1)
    data = np.empty((len(rows), width))
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise InputFormatError(f"row has {len(cells)} cells, expected {width}", path, line)
        for c, cell in enumerate(cells):
            data[r, c] = _parse_cell(cell, path, line, c + 1)
    return data, header


def _read_parquet(path: str) -> Tuple[np.ndarray, Optional[List[str]]]:
    try:
        table = pq.read_table(path)
    except (pa.ArrowInvalid, OSError) as e:
        raise InputFormatError(f"cannot read parquet: {e}", path) from e
    if table.num_columns == 0 or table.num_rows == 0:
        raise InputFormatError("empty parquet table", path)
    cols = []
    for idx, name in enumerate(table.column_names):
        col = table.column(idx)
        if not (pa.types.is_floating(col.type) or pa.types.is_integer(col.type)):
            raise InputFormatError(f"column {name!r} has non-numeric type {col.type}", path, column=idx + 1)
        if col.null_count:
            raise InputFormatError(f"column {name!r} contains nulls", path, column=idx + 1)
        cols.append(col.to_numpy().astype(np.float64))
    data = np.column_stack(cols)
    if not np.all(np.isfinite(data)):
        raise InputFormatError("parquet table contains non-finite values", path)
    return data, list(table.column_names)


def read_signal(path: str, transpose: bool = False) -> np.ndarray:
    """SignalFile -> N x L 행렬 (rows = nodes). parquet 은 snapshot 당 1 column."""
    if not os.path.exists(path):
        raise InputFormatError("file not found", path)
    if is_parquet_path(path):
        data, _ = _read_parquet(path)
    else:
        data, _ = _read_csv(path)
    return data.T.copy() if transpose else data


def write_signal(path: str, X, transpose: bool = False, labels: Optional[Sequence[str]] = None) -> str:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    out = X.T if transpose else X
    _ensure_parent(path)
    if is_parquet_path(path):
        names = list(labels) if labels else [f"s{c}" for c in range(out.shape[1])]
        table = pa.table({name: out[:, c] for c, name in enumerate(names)})
        pq.write_table(table, path)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            if labels:
                w.writerow(list(labels))
            for row in out:
                w.writerow([fmt_float(v) for v in row])
    log.info("saved: %s", path)
    return path


def write_series(path: str, rows: List[Dict[str, Any]]) -> str:
    """plot 용 series (sweep 결과). 확장자가 .parquet 이면 parquet, 아니면 header 있는 CSV."""
    _ensure_parent(path)
    fields: List[str] = []
    for r in rows:
        for k in r:
            if k not in fields:
                fields.append(k)
    if is_parquet_path(path):
        pq.write_table(pa.table({k: [r.get(k) for r in rows] for k in fields}), path)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: fmt_float(v) if isinstance(v, float) else v for k, v in r.items()})
    log.info("saved: %s", path)
    return path


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
