"""Plain-text matrix files.

Layout: one header line ``# <rows> <cols> <dtype>`` followed by the matrix in
row-major order, one row per line. Complex entries are written as
interleaved real/imaginary pairs. Values use 17 significant digits so a
write/read round trip is exact for float64.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_DTYPES = {"float64": np.float64, "complex128": np.complex128}


def save_matrix(path, matrix) -> None:
    m = np.asarray(matrix)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError("only vectors and matrices can be saved")
    is_complex = np.iscomplexobj(m)
    dtype = "complex128" if is_complex else "float64"
    if is_complex:
        body = np.empty((m.shape[0], 2 * m.shape[1]))
        body[:, 0::2] = m.real
        body[:, 1::2] = m.imag
    else:
        body = m.astype(np.float64)
    path = Path(path)
    try:
        with path.open("w") as fh:
            fh.write(f"# {m.shape[0]} {m.shape[1]} {dtype}\n")
            np.savetxt(fh, body, fmt="%.17g")
    except OSError as exc:
        raise OSError(f"cannot write matrix file {path}: {exc}") from exc


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "#" or header[3] not in _DTYPES:
            raise ValueError(f"{path}: malformed matrix header {' '.join(header)!r}")
        rows, cols = int(header[1]), int(header[2])
        body = np.loadtxt(fh, ndmin=2) if rows else np.zeros((0, 0))
    dtype = header[3]
    width = 2 * cols if dtype == "complex128" else cols
    body = body.reshape(rows, width)
    if dtype == "complex128":
        return body[:, 0::2] + 1j * body[:, 1::2]
    return body
