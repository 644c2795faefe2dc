"""CSV and JSON emitters for experiment rows."""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Sequence


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def to_csv(rows: Sequence[dict]) -> str:
    """Header plus one line per row, comma separated, LF terminated."""
    if not rows:
        return ""
    header = list(rows[0])
    for r in rows[1:]:
        header.extend(k for k in r if k not in header)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r.get(k)) for k in header])
    return buf.getvalue()


def _jsonable(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def to_json(config: dict, rows: Sequence[dict], tool_version: str, elapsed: float) -> str:
    doc = {
        "config": _jsonable(config),
        "rows": _jsonable(list(rows)),
        "tool_version": tool_version,
        "elapsed_seconds": elapsed,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_text(path: str | None, text: str, stream) -> None:
    if path is None or path == "-":
        stream.write(text)
    else:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
