"""CSV/JSON artifacts.

CSV files use ``,`` separators, ``.`` decimals, UTF-8 and LF line endings;
floats are written with 17 significant digits so round trips are exact.
Grid-function and kernel files start with one ``# {json}`` metadata line.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kernels import DenseKernel, IndexBox
from .lattice import GridFunction, SpacetimeGrid

__all__ = [
    "fmt",
    "write_table",
    "read_table",
    "write_json",
    "write_grid_function",
    "read_grid_function",
    "write_dense_kernel",
    "read_dense_kernel",
]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path) -> tuple[dict | None, list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta = None
    if lines and lines[0].startswith("# "):
        meta = json.loads(lines[0][2:])
        lines = lines[1:]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]) if body else np.zeros((0, len(header)))
    return meta, header, data


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if np.isfinite(f) else str(f)
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_grid_function(path, f: GridFunction) -> Path:
    """One row per point: ``t, x, re_0, im_0, re_1, im_1, ...``."""
    g = f.grid
    T, X = g.mesh()
    N = g.components
    header = ["t", "x"] + [p for a in range(N) for p in (f"re_{a}", f"im_{a}")]
    cols = [T.ravel(), X.ravel()]
    for a in range(N):
        cols += [f.values[..., a].real.ravel(), f.values[..., a].imag.ravel()]
    rows = np.stack(cols, axis=1)
    return write_table(path, header, rows, meta=g.metadata())


def read_grid_function(path) -> GridFunction:
    meta, header, data = read_table(path)
    g = SpacetimeGrid(**meta)
    N = g.components
    vals = np.zeros(g.shape, dtype=complex)
    for a in range(N):
        re = data[:, 2 + 2 * a].reshape(g.n_time, g.n_space)
        im = data[:, 3 + 2 * a].reshape(g.n_time, g.n_space)
        vals[..., a] = re + 1j * im
    return GridFunction(g, vals)


def write_dense_kernel(path, W: DenseKernel, theta0: float | None = None) -> Path:
    """Nonzero entries ``(i_x, i_y, re, im)``; indices flatten ``(j, k, A)`` inside the box."""
    import scipy.sparse as sp

    mat = sp.coo_matrix(W.matrix) if not sp.issparse(W.matrix) else W.matrix.tocoo()
    b = W.box()
    meta = {"grid": W.grid.metadata(), "box": [b.j0, b.j1, b.k0, b.k1], "theta0": theta0}
    order = np.lexsort((mat.col, mat.row))
    rows = ((int(mat.row[i]), int(mat.col[i]), mat.data[i].real, mat.data[i].imag) for i in order)
    return write_table(path, ["i_x", "i_y", "re", "im"], rows, meta=meta)


def read_dense_kernel(path) -> DenseKernel:
    import scipy.sparse as sp

    meta, _, data = read_table(path)
    g = SpacetimeGrid(**meta["grid"])
    b = IndexBox(*meta["box"])
    n = b.shape[0] * b.shape[1] * g.components
    if data.size:
        mat = sp.coo_matrix((data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
                            shape=(n, n)).tocsr()
    else:
        mat = sp.csr_matrix((n, n), dtype=complex)
    return DenseKernel(g, b, mat)
