"""Exact linear algebra over the rationals (fraction-based Gaussian elimination)."""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np


def _to_fractions(a) -> list[list[Fraction]]:
    return [[Fraction(v) if not isinstance(v, Fraction) else v for v in row] for row in a]


def rref(a) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    m = _to_fractions(np.asarray(a, dtype=object).tolist() if isinstance(a, np.ndarray) else a)
    rows = len(m)
    cols = len(m[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        pv = m[r][c]
        m[r] = [v / pv for v in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def rank(a) -> int:
    a = np.asarray(a, dtype=object)
    if a.size == 0:
        return 0
    return len(rref(a.tolist())[1])


def nullspace(a, cols: int | None = None) -> list[list[Fraction]]:
    """Basis of ``{v : a v = 0}``, one vector per free column."""
    a = np.asarray(a, dtype=object)
    if cols is None:
        cols = a.shape[1] if a.ndim == 2 else 0
    if a.size == 0:
        return [[Fraction(int(i == j)) for i in range(cols)] for j in range(cols)]
    red, pivots = rref(a.tolist())
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * cols
        v[f] = Fraction(1)
        for row, pc in zip(red, pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis


def primitive_integer(v: Sequence[Fraction]) -> list[int]:
    """Scale a rational vector to coprime integers with a positive leading entry."""
    den = 1
    for x in v:
        den = den * Fraction(x).denominator // gcd(den, Fraction(x).denominator)
    ints = [int(Fraction(x) * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g > 1:
        ints = [x // g for x in ints]
    lead = next((x for x in ints if x != 0), 0)
    if lead < 0:
        ints = [-x for x in ints]
    return ints


def left_kernel(a) -> np.ndarray:
    """Integer basis (rows) of ``{w : w^T a = 0}``."""
    a = np.asarray(a, dtype=object)
    rows = a.shape[0]
    if a.ndim != 2 or a.shape[1] == 0:
        return np.eye(rows, dtype=np.int64)
    basis = nullspace(a.T, cols=rows)
    if not basis:
        return np.zeros((0, rows), dtype=np.int64)
    return np.array([primitive_integer(v) for v in basis], dtype=np.int64)


def det(a) -> Fraction:
    """Exact determinant by fraction elimination."""
    m = _to_fractions(a)
    size = len(m)
    out = Fraction(1)
    for c in range(size):
        p = next((i for i in range(c, size) if m[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            out = -out
        pv = m[c][c]
        out *= pv
        for i in range(c + 1, size):
            if m[i][c] != 0:
                f = m[i][c] / pv
                m[i] = [vi - f * vc for vi, vc in zip(m[i], m[c])]
    return out


def same_row_space(a, b) -> bool:
    """True if two matrices span the same row space over the rationals."""
    a, b = np.atleast_2d(np.asarray(a, dtype=object)), np.atleast_2d(np.asarray(b, dtype=object))
    ra = rank(a) if a.size else 0
    rb = rank(b) if b.size else 0
    if ra != rb:
        return False
    if ra == 0:
        return True
    return rank(np.vstack([a, b])) == ra
