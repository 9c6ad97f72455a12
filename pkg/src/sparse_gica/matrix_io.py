"""Plain-text matrix format shared by every CLI subcommand.

Line 1 holds ``rows cols``; then one line per row with whitespace-separated
numbers printed with 17 significant digits. Exact zeros are written as ``0``.
"""

from __future__ import annotations

import os

import numpy as np


def format_number(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.17g}"


def dumps_matrix(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines.extend(" ".join(format_number(v) for v in row) for row in M)
    return "\n".join(lines) + "\n"


def loads_matrix(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("matrix text is missing its 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    if rows < 0 or cols < 0:
        raise ValueError("negative matrix dimensions")
    body = tokens[2:]
    if len(body) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries for a {rows}x{cols} matrix, found {len(body)}")
    return np.array([float(t) for t in body], dtype=float).reshape(rows, cols)


def write_matrix(path: str | os.PathLike, M) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_matrix(M))


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        return loads_matrix(fh.read())
