"""CSV persistence and plain-text tables for benchmark records.

Records are flat dataclasses; the CSV schema is simply their field names in
declaration order (documented in docs/api.md). Reading back re-typecasts via
the dataclass annotations so aggregate functions can be re-run on persisted
rows.
"""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path
from typing import Sequence, Type, TypeVar

T = TypeVar("T")

def _cast_for(annotation) -> callable:
    name = annotation if isinstance(annotation, str) else \
        getattr(annotation, "__name__", "str")
    if name == "int":
        return int
    if name == "float":
        return float
    if name == "bool":
        return lambda s: s in ("True", "true", "1")
    return str


def records_to_csv(records: Sequence, path) -> None:
    if not records:
        Path(path).write_text("")
        return
    names = [f.name for f in dataclasses.fields(records[0])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in records:
            w.writerow([getattr(r, n) for n in names])


def records_from_csv(cls: Type[T], path) -> list[T]:
    casts = {f.name: _cast_for(f.type) for f in dataclasses.fields(cls)}
    out: list[T] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(cls(**{n: casts[n](v) for n, v in row.items()}))
    return out


def format_table(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    """Right-align numbers, left-align text, two-space gutters."""
    def fmt(v) -> str:
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            return f"{v:.4g}"
        return str(v)

    cells = [[fmt(v) for v in r] for r in rows]
    cols = list(zip(*([list(header)] + cells))) if cells else [(h,) for h in header]
    widths = [max(len(c) for c in col) for col in cols]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row, raw in zip(cells, rows):
        parts = []
        for v, c, w in zip(raw, row, widths):
            parts.append(c.rjust(w) if isinstance(v, (int, float)) and
                         not isinstance(v, bool) else c.ljust(w))
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines)


def summaries_table(summaries: Sequence) -> str:
    if not summaries:
        return "(empty)"
    names = [f.name for f in dataclasses.fields(summaries[0])]
    rows = [[getattr(s, n) for n in names] for s in summaries]
    return format_table(rows, names)
