"""Small fixed-size matrix helpers.

Every function works on the last one or two axes, so the same code handles a
single 2x2 matrix, a grid of them with shape (..., 2, 2), or an object array
whose entries are jets.
"""

from __future__ import annotations

import numpy as np

DEFAULT_RANK_TOL = 1e-8


def _ix(m, *k):
    # Ellipsis indexing would wrap jets in 0-d object arrays, so index object arrays plainly.
    if isinstance(m, np.ndarray) and m.dtype == object:
        return m[k]
    return m[(Ellipsis,) + k]


def _assemble(rows):
    """Build a matrix from nested lists of entries (arrays, floats or jets)."""
    flat = [e for row in rows for e in row]
    if any(not isinstance(e, (np.ndarray, float, int, np.floating)) for e in flat):
        out = np.empty((len(rows), len(rows[0])), dtype=object)
        for i, row in enumerate(rows):
            for j, e in enumerate(row):
                out[i, j] = e
        return out
    return np.stack([np.stack(np.broadcast_arrays(*row), axis=-1) for row in rows], axis=-2)


def _assemble_vec(entries):
    if any(not isinstance(e, (np.ndarray, float, int, np.floating)) for e in entries):
        out = np.empty(len(entries), dtype=object)
        for i, e in enumerate(entries):
            out[i] = e
        return out
    return np.stack(np.broadcast_arrays(*entries), axis=-1)


def matrix(rows):
    """Public wrapper of the assembler: matrix([[a, b], [c, d]])."""
    return _assemble(rows)


def transpose(m):
    return np.swapaxes(m, -1, -2)


def det2(m):
    return _ix(m, 0, 0) * _ix(m, 1, 1) - _ix(m, 0, 1) * _ix(m, 1, 0)


def adj2(m):
    return _assemble([[_ix(m, 1, 1), -_ix(m, 0, 1)], [-_ix(m, 1, 0), _ix(m, 0, 0)]])


def inv2(m):
    d = det2(m)
    a = adj2(m)
    if a.dtype == object:
        return _assemble([[a[i, j] / d for j in range(2)] for i in range(2)])
    return a / d[..., None, None]


def det3(m):
    return (
        _ix(m, 0, 0) * (_ix(m, 1, 1) * _ix(m, 2, 2) - _ix(m, 1, 2) * _ix(m, 2, 1))
        - _ix(m, 0, 1) * (_ix(m, 1, 0) * _ix(m, 2, 2) - _ix(m, 1, 2) * _ix(m, 2, 0))
        + _ix(m, 0, 2) * (_ix(m, 1, 0) * _ix(m, 2, 1) - _ix(m, 1, 1) * _ix(m, 2, 0))
    )


def adj3(m):
    def c(i, j):
        r = [k for k in range(3) if k != i]
        s = [k for k in range(3) if k != j]
        minor = _ix(m, r[0], s[0]) * _ix(m, r[1], s[1]) - _ix(m, r[0], s[1]) * _ix(m, r[1], s[0])
        return minor if (i + j) % 2 == 0 else -minor

    # adjugate = transpose of the cofactor matrix
    return _assemble([[c(j, i) for j in range(3)] for i in range(3)])


def inv3(m):
    d = det3(m)
    a = adj3(m)
    if a.dtype == object:
        return _assemble([[a[i, j] / d for j in range(3)] for i in range(3)])
    return a / d[..., None, None]


def cross(a, b):
    return _assemble_vec(
        [
            _ix(a, 1) * _ix(b, 2) - _ix(a, 2) * _ix(b, 1),
            _ix(a, 2) * _ix(b, 0) - _ix(a, 0) * _ix(b, 2),
            _ix(a, 0) * _ix(b, 1) - _ix(a, 1) * _ix(b, 0),
        ]
    )


def dot(a, b):
    out = _ix(a, 0) * _ix(b, 0)
    for k in range(1, a.shape[-1]):
        out = out + _ix(a, k) * _ix(b, k)
    return out


def singular_values_n2(m) -> tuple[np.ndarray, np.ndarray]:
    """Singular values of an (..., n, 2) matrix from its 2x2 Gram matrix.

    The small value comes from det(G) = sum of squared 2x2 minors divided by the
    large one, which keeps it accurate even when it is tiny.
    """
    m = np.asarray(m, dtype=float)
    s = np.sum(m * m, axis=(-1, -2))
    n = m.shape[-2]
    d = np.zeros(m.shape[:-2])
    for i in range(n):
        for j in range(i + 1, n):
            minor = m[..., i, 0] * m[..., j, 1] - m[..., i, 1] * m[..., j, 0]
            d = d + minor * minor
    disc = np.sqrt(np.maximum(s * s - 4.0 * d, 0.0))
    big2 = 0.5 * (s + disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        small2 = np.where(big2 > 0, d / big2, 0.0)
    return np.sqrt(big2), np.sqrt(small2)


def rank_tol(m, tol: float = DEFAULT_RANK_TOL):
    """Numerical rank of an (..., n, 2) matrix.

    Counts singular values above tol times the largest one; when the largest is
    itself below tol the reference scale is 1, so a zero matrix has rank 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    big, small = singular_values_n2(m)
    ref = np.where(big > tol, big, 1.0)
    return (big > tol * ref).astype(int) + (small > tol * ref).astype(int)
