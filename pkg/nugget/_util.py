from __future__ import annotations

import csv
import typing as t
from pathlib import Path

from nugget._exceptions import DatasetIOError


def format_cell(value: t.Any) -> str:
    # repr round-trips floats exactly, so reruns compare byte for byte
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(
    path: Path, header: t.Sequence[str], rows: t.Iterable[t.Sequence[t.Any]]
) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(v) for v in row])
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}") from e
