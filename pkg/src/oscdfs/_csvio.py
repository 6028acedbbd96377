"""Deterministic CSV/text formatting shared by the exporters."""
from __future__ import annotations

import io
import math
from typing import Iterable, Sequence, TextIO


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value + 0.0:.12g}"
    if hasattr(value, "item"):
        return fmt(value.item())
    return str(value)


def write_csv(
    out: TextIO,
    header: Sequence[str],
    rows: Iterable[Sequence],
    comment: str | None = None,
) -> None:
    if comment is not None:
        for line in comment.splitlines():
            out.write(f"# {line}\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")


def to_text(writer, *args, **kwargs) -> str:
    buf = io.StringIO()
    writer(buf, *args, **kwargs)
    return buf.getvalue()
