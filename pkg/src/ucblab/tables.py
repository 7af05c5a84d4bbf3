"""Deterministic CSV/JSON table output.

CSV files carry an optional ``# {json}`` line echoing the run
configuration, then a header row, then one line per row.  Floats are written
with 17 significant digits so every value reads back bit-for-bit.  JSON files
hold ``{"spec": ..., "rows": [...]}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

FORMATS = ("csv", "json")


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    if hasattr(value, "item"):  # numpy scalar
        return _csv_cell(value.item())
    return str(value)


def _json_value(value: Any) -> Any:
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _check_rows(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> None:
    for i, row in enumerate(rows):
        if set(row.keys()) != set(columns):
            raise ValueError(
                f"row {i} has columns {sorted(row.keys())}, expected {sorted(columns)}"
            )


def format_table(
    rows: Sequence[Mapping[str, Any]],
    columns: Sequence[str],
    fmt: str = "csv",
    spec: Mapping[str, Any] | None = None,
) -> str:
    """Render rows to a CSV or JSON string."""
    _check_rows(rows, columns)
    if fmt == "csv":
        buf = io.StringIO()
        if spec is not None:
            buf.write("# " + json.dumps(spec, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        payload = {
            "spec": spec,
            "columns": list(columns),
            "rows": [{c: _json_value(row[c]) for c in columns} for row in rows],
        }
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def emit_table(
    rows: Sequence[Mapping[str, Any]],
    columns: Sequence[str],
    fmt: str,
    path: str | Path | None,
    spec: Mapping[str, Any] | None = None,
) -> str:
    """Write a table to ``path`` (or return it only, if ``path`` is None)."""
    text = format_table(rows, columns, fmt, spec)
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write table to {path}: {exc.strerror}") from exc
    return text


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_table(text: str, fmt: str = "csv") -> tuple[list[str], list[dict[str, Any]]]:
    """Inverse of :func:`format_table`; returns ``(columns, rows)``."""
    if fmt == "json":
        payload = json.loads(text)
        rows = [
            {k: (math.nan if v is None else v) for k, v in row.items()}
            for row in payload["rows"]
        ]
        return payload["columns"], rows
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, [dict(zip(columns, map(_parse_cell, rec))) for rec in reader]


def read_spec(text: str, fmt: str = "csv") -> dict[str, Any] | None:
    if fmt == "json":
        return json.loads(text)["spec"]
    first = text.splitlines()[0] if text else ""
    return json.loads(first[2:]) if first.startswith("# ") else None


def column(rows: Iterable[Mapping[str, Any]], name: str) -> list[Any]:
    return [row[name] for row in rows]
