"""
Deterministic JSON/CSV output with atomic writes.

Floats are written with 17 significant digits and keys in insertion order,
so identical runs produce byte-identical files. Every file is written to a
temporary sibling and renamed into place.
"""

import csv
import io
import json
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, List, Sequence

import numpy as np

SCHEMA_VERSION = 1


def _scalar(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return "null"
        text = format(value, ".17g")
        if "e" not in text and "." not in text:
            text += ".0"
        return text
    return json.dumps(str(value), ensure_ascii=False)


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with fixed float formatting; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _scalar(obj)


@contextmanager
def atomic_open(path: str):
    """Yield a text handle whose contents replace ``path`` only on success."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            yield f
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_json(path: str, payload: dict) -> None:
    with atomic_open(path) as f:
        f.write(dumps(payload))
        f.write("\n")


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return _scalar(value) if math.isfinite(value) else "NA"
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    return value


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    text = csv_text(header, rows)
    with atomic_open(path) as f:
        f.write(text)


def write_all(outputs: List[tuple]) -> None:
    """Write (kind, path, *content) tuples after everything has been computed."""
    for kind, path, *content in outputs:
        if kind == "json":
            write_json(path, *content)
        else:
            write_csv(path, *content)
