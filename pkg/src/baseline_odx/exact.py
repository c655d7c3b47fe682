"""Exact linear algebra over the rationals.

Matrices are lists of rows of :class:`~fractions.Fraction`.  Sizes here are
small (a few dozen at most), so plain Gauss-Jordan elimination is enough.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Matrix = list[list[Fraction]]
Vector = list[Fraction]

ZERO = Fraction(0)
ONE = Fraction(1)


def as_matrix(rows) -> Matrix:
    return [[Fraction(x) for x in row] for row in rows]


def zeros(n: int, m: int | None = None) -> Matrix:
    return [[ZERO] * (n if m is None else m) for _ in range(n)]


def identity(n: int) -> Matrix:
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def transpose(a: Matrix) -> Matrix:
    return [list(col) for col in zip(*a)]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    bt = transpose(b)
    return [[sum((x * y for x, y in zip(row, col) if x and y), ZERO) for col in bt] for row in a]


def matvec(a: Matrix, x: Sequence[Fraction]) -> Vector:
    return [sum((p * q for p, q in zip(row, x) if p and q), ZERO) for row in a]


def dot(x: Sequence[Fraction], y: Sequence[Fraction]) -> Fraction:
    return sum((p * q for p, q in zip(x, y) if p and q), ZERO)


def quadratic_form(x: Sequence[Fraction], a: Matrix) -> Fraction:
    return dot(x, matvec(a, x))


def row_echelon(a: Matrix) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and the pivot columns."""
    m = [list(row) for row in a]
    rows = len(m)
    cols = len(m[0]) if m else 0
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if m[i][c]), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = ONE / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(a: Matrix) -> int:
    return len(row_echelon(a)[1]) if a else 0


def inverse(a: Matrix) -> Matrix:
    n = len(a)
    aug = [list(row) + unit for row, unit in zip(a, identity(n))]
    red, pivots = row_echelon(aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in red]


def independent_columns(a: Matrix) -> list[int]:
    return row_echelon(a)[1]


def symmetric_ginverse(m: Matrix) -> tuple[Matrix, list[int]]:
    """A symmetric generalized inverse of a symmetric matrix.

    A maximal nonsingular principal submatrix ``m[B, B]`` is located by
    elimination; its inverse embedded at ``B`` (zeros elsewhere) satisfies
    ``m g m = m`` whenever ``m`` is positive semidefinite.
    """
    n = len(m)
    basis = independent_columns(m)
    sub = [[m[i][j] for j in basis] for i in basis]
    sub_inv = inverse(sub) if basis else []
    g = zeros(n)
    for a, i in enumerate(basis):
        for b, j in enumerate(basis):
            g[i][j] = sub_inv[a][b]
    return g, basis


def nullspace(a: Matrix) -> Matrix:
    """Basis (as rows) of ``{x : a x = 0}``."""
    if not a:
        return []
    cols = len(a[0])
    red, pivots = row_echelon(a)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        x = [ZERO] * cols
        x[f] = ONE
        for r, p in enumerate(pivots):
            x[p] = -red[r][f]
        basis.append(x)
    return basis


def solve(a: Matrix, b: Sequence[Fraction]) -> Vector | None:
    """One solution of ``a x = b``, or None when the system is inconsistent."""
    cols = len(a[0])
    aug = [list(row) + [Fraction(v)] for row, v in zip(a, b)]
    red, pivots = row_echelon(aug)
    if cols in pivots:
        return None
    x = [ZERO] * cols
    for r, p in enumerate(pivots):
        x[p] = red[r][cols]
    return x


def is_positive_definite(m: Matrix) -> bool:
    """Sylvester-free check via exact LDL' elimination."""
    a = [list(row) for row in m]
    n = len(a)
    for k in range(n):
        if a[k][k] <= 0:
            return False
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            if f:
                for j in range(k, n):
                    a[i][j] -= f * a[k][j]
    return True
