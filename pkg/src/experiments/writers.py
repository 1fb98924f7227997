"""
Plain-text outputs: tab-separated columns under a ``# key: value`` header.

Nothing time-dependent goes into these files, so a re-run with the same config
and seeds reproduces them byte for byte.
"""

import logging
import os
from typing import Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def _header(meta: Dict[str, object]) -> str:
    return "".join(f"# {key}: {value}\n" for key, value in meta.items())


def write_table(path: str, frame: pd.DataFrame, meta: Dict[str, object]) -> str:
    """Write ``frame`` as TSV with a metadata header; returns the path."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(_header(meta))
        frame.to_csv(handle, sep="\t", index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="nan")
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def write_matrix(
    path: str,
    matrix: np.ndarray,
    meta: Dict[str, object],
    row_axis: Optional[pd.DataFrame] = None,
    col_axis: Optional[pd.DataFrame] = None,
) -> list:
    """
    Row-major matrix without column labels; axis vectors go to companion files
    ``<stem>_rows.tsv`` and ``<stem>_cols.tsv``.
    """
    stem, ext = os.path.splitext(path)
    meta = dict(meta)
    meta["shape"] = "x".join(str(s) for s in matrix.shape)
    written = []
    if row_axis is not None:
        meta["rows"] = os.path.basename(f"{stem}_rows{ext}")
        written.append(write_table(f"{stem}_rows{ext}", row_axis, {"axis of": os.path.basename(path)}))
    if col_axis is not None:
        meta["columns"] = os.path.basename(f"{stem}_cols{ext}")
        written.append(write_table(f"{stem}_cols{ext}", col_axis, {"axis of": os.path.basename(path)}))

    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(_header(meta))
        pd.DataFrame(matrix).to_csv(
            handle, sep="\t", index=False, header=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="nan"
        )
    logger.info(f"Wrote {path} ({meta['shape']})")
    return [path] + written


def read_table(path: str) -> pd.DataFrame:
    """Read a file written by :func:`write_table` (header lines are skipped)."""
    return pd.read_csv(path, sep="\t", comment="#")


def read_meta(path: str) -> Dict[str, str]:
    meta = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            meta[key] = value
    return meta
