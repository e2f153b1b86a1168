"""
Contaminate a dataset: multiply the response of a random share of rows by a factor.

Writes the contaminated CSV plus an index file listing the modified rows
(1-based data row numbers, header excluded).
"""

import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

if sys.platform == "win32":
    import codecs
    sys.stdout = codecs.getwriter("utf-8")(sys.stdout.detach())

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from moe.errors import IngestionError, IngestionIssue
from utils.reports import write_all
from utils.run_config import RunConfig, script_main


def contaminate_rows(rows, y_col: str, fraction: float, factor: float, seed: int):
    """Return (new rows, sorted 0-based indices of modified rows)."""
    n = len(rows)
    count = int(math.floor(fraction * n))
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=count, replace=False)) if count else np.array([], dtype=int)
    issues = []
    out = [dict(row) for row in rows]
    for i in chosen:
        raw = (rows[i].get(y_col) or "").strip()
        try:
            value = float(raw)
        except ValueError:
            issues.append(IngestionIssue(int(i) + 2, y_col, f"not a number: {raw!r}"))
            continue
        if factor != 1.0:
            out[i][y_col] = repr(value * factor)
    if issues:
        raise IngestionError("cannot contaminate non-numeric responses", issues)
    return out, [int(i) for i in chosen]


def cmd_contaminate(cfg: RunConfig) -> int:
    path = Path(cfg.data)
    if not path.exists():
        raise IngestionError(f"CSV file not found: {cfg.data}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames:
            raise IngestionError(f"{cfg.data} is empty (no header row)")
        header = list(reader.fieldnames)
        rows = list(reader)
    if cfg.y_col not in header:
        raise IngestionError(f"{cfg.data} is missing column {cfg.y_col}; available: {', '.join(header)}")
    if not rows:
        raise IngestionError(f"{cfg.data} has no data rows (n=0)")

    new_rows, modified = contaminate_rows(rows, cfg.y_col, cfg.fraction, cfg.factor, cfg.seed)
    output = cfg.output or str(Path(cfg.out_dir) / f"{path.stem}_contaminated.csv")
    index_path = str(Path(output).with_suffix("")) + "_index.csv"
    write_all([
        ("csv", output, header, [[row.get(c, "") for c in header] for row in new_rows]),
        ("csv", index_path, ["row"], [[i + 1] for i in modified]),
    ])
    print(f"✓ Modified {len(modified)} of {len(rows)} rows ({cfg.y_col} x {cfg.factor})")
    print(f"✓ Written: {output}")
    print(f"✓ Index:   {index_path}")
    return 0


def main(argv=None) -> int:
    return script_main("contaminate", cmd_contaminate, "Contaminate a dataset for robustness checks", argv)


if __name__ == "__main__":
    sys.exit(main())
