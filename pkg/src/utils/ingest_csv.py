"""
Load a numeric CSV into a Dataset, collecting row-level problems.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from moe.errors import IngestionError, IngestionIssue
from moe.regression import Dataset

logger = logging.getLogger(__name__)

MISSING_TOKENS = {"", "na", "nan", "null"}


def _parse_cell(row: Dict[str, str], column: str, row_num: int) -> Tuple[Optional[float], Optional[IngestionIssue]]:
    raw = (row.get(column) or "").strip()
    if raw.lower() in MISSING_TOKENS:
        return None, IngestionIssue(row_num, column, "missing value, row skipped", "warning")
    try:
        value = float(raw)
    except ValueError:
        return None, IngestionIssue(row_num, column, f"not a number: {raw!r}", "error")
    if not math.isfinite(value):
        return None, IngestionIssue(row_num, column, f"not finite: {raw!r}", "error")
    return value, None


def read_columns(path: str, columns: List[str]) -> Tuple[Dict[str, List[float]], List[IngestionIssue]]:
    """Numeric values of ``columns``, skipping rows with missing cells.

    Row numbers count the header as row 1.
    """
    p = Path(path)
    if not p.exists():
        raise IngestionError(f"CSV file not found: {path}")
    with open(p, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames:
            raise IngestionError(f"{path} is empty (no header row)")
        header = [name.strip() for name in reader.fieldnames]
        reader.fieldnames = header
        missing = [c for c in columns if c not in header]
        if missing:
            raise IngestionError(
                f"{path} is missing column(s) {', '.join(missing)}; available: {', '.join(header)}"
            )
        values: Dict[str, List[float]] = {c: [] for c in columns}
        issues: List[IngestionIssue] = []
        for row_num, row in enumerate(reader, start=2):
            parsed, row_issues = {}, []
            for column in columns:
                value, issue = _parse_cell(row, column, row_num)
                parsed[column] = value
                if issue:
                    row_issues.append(issue)
            issues.extend(row_issues)
            if not row_issues:
                for column in columns:
                    values[column].append(parsed[column])
    return values, issues


def ingest_csv(path: str, response_col: str, expert_cols: List[str], gating_col: Optional[str] = None) -> Dataset:
    """Build a Dataset (intercept prepended) from named CSV columns.

    Non-numeric cells abort with every offending row listed; rows with
    missing cells are skipped and reported.
    """
    gating_col = gating_col or expert_cols[0]
    columns = list(dict.fromkeys([response_col] + list(expert_cols) + [gating_col]))
    values, issues = read_columns(path, columns)

    errors = [i for i in issues if i.severity == "error"]
    if errors:
        raise IngestionError(f"{path}: {len(errors)} invalid cell(s)", errors)
    skipped = [i for i in issues if i.severity != "error"]
    for issue in skipped:
        logger.warning("%s", issue)

    n = len(values[response_col])
    if n == 0:
        raise IngestionError(f"{path} has no usable data rows (n=0)", skipped)
    x = [[values[c][i] for c in expert_cols] for i in range(n)]
    logger.info("Loaded %d rows from %s (%d skipped)", n, path, len({i.row_num for i in skipped}))
    return Dataset.from_columns(values[response_col], x, values[gating_col])
