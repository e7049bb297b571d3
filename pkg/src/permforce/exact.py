"""Fraction-free Gaussian elimination over the rationals.

Rows are scaled to integers, reduced with Bareiss' one-step division (all
divisions are exact), and null-space vectors are read off by rational back
substitution.  No floating point is involved.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

__all__ = ["integer_rows", "echelon", "rank", "nullspace"]


def integer_rows(matrix: Sequence[Sequence]) -> list[list[int]]:
    """Scale each row by the lcm of its denominators."""
    out = []
    for row in matrix:
        row = [Fraction(v) for v in row]
        scale = math.lcm(*(v.denominator for v in row)) if row else 1
        out.append([int(v * scale) for v in row])
    return out


def echelon(matrix: Sequence[Sequence]) -> tuple[list[list[int]], list[int]]:
    """Integer row echelon form and pivot columns of `matrix`."""
    a = integer_rows(matrix)
    if not a:
        return [], []
    nrows, ncols = len(a), len(a[0])
    pivots: list[int] = []
    prev = 1
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        for i in range(r + 1, nrows):
            lead = a[i][c]
            row_i, row_r = a[i], a[r]
            for j in range(c, ncols):
                num = piv * row_i[j] - lead * row_r[j]
                q, rem = divmod(num, prev)
                assert rem == 0, "Bareiss division must be exact"
                row_i[j] = q
        prev = piv
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank(matrix: Sequence[Sequence]) -> int:
    return len(echelon(matrix)[1])


def nullspace(matrix: Sequence[Sequence]) -> list[list[Fraction]]:
    """Basis of {x : matrix @ x = 0}, one vector per free column."""
    if not matrix:
        return []
    ncols = len(matrix[0])
    rows, pivots = echelon(matrix)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        x = [Fraction(0)] * ncols
        x[fc] = Fraction(1)
        for r in range(len(pivots) - 1, -1, -1):
            pc = pivots[r]
            s = sum((rows[r][j] * x[j] for j in range(pc + 1, ncols)), Fraction(0))
            x[pc] = -s / rows[r][pc]
        basis.append(x)
    return basis
