"""Deterministic CSV/JSON emission and matplotlib figure rendering.

All serialization is byte-deterministic for a fixed (config, seed): JSON is
dumped with sorted keys and floats via repr, CSV rows are written in a fixed
order with a versioned header comment.
"""

from __future__ import annotations

import json
from pathlib import Path

CSV_HEADER_COMMENT = "# spde-lab csv v1"


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(path: str | Path, columns: list[str], rows: list[list]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(CSV_HEADER_COMMENT + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def suite_csv_rows(suite_dict: dict) -> tuple[list[str], dict[float, list[list]]]:
    """Split a suite report into (columns, rows keyed by checkpoint time)."""
    if suite_dict["suite"] == "harnack":
        cols = ["t", "f", "lhs", "lhs_se", "rhs_log_term", "phi", "psi", "margin", "std_error", "pass"]
        by_t: dict[float, list[list]] = {}
        for r in suite_dict["rows"]:
            by_t.setdefault(r["t"], []).append(
                [r["t"], r["f"], r["lhs"], r["lhs_se"], r["rhs_log_term"], r["phi"],
                 r["psi"], r["margin"], r["std_error"], r["pass"]]
            )
        return cols, by_t
    cols = ["checkpoint", "estimate", "std_error", "bound", "pass"]
    by_t = {}
    for r in suite_dict["rows"]:
        by_t.setdefault(r["t"], []).append(
            [r["t"], r["estimate"], r["std_error"], r["bound"], r["pass"]]
        )
    return cols, by_t


def emit_suite_csvs(outdir: str | Path, suite_dict: dict) -> list[Path]:
    """One CSV per (suite, checkpoint): <suite>_<t>.csv."""
    outdir = Path(outdir)
    cols, by_t = suite_csv_rows(suite_dict)
    written = []
    for t in sorted(by_t):
        path = outdir / f"{suite_dict['suite']}_{t:g}.csv"
        write_csv(path, cols, by_t[t])
        written.append(path)
    return written
