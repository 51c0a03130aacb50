"""Exact rational linear programming for small dense instances.

``lp_solve`` maximizes ``c.w`` subject to ``A w <= b``, ``w >= 0`` with a
two-phase tableau simplex over Fractions using Bland's rule. ``lp_vertex_enum``
solves the same problem by enumerating basic solutions and is kept as an
independent oracle for tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import QclabError


class Infeasible(QclabError):
    pass


class Unbounded(QclabError):
    pass


@dataclass(frozen=True)
class LPResult:
    value: Fraction
    x: tuple


def _pivot(T, basis, r, c):
    piv = T[r][c]
    T[r] = [v / piv for v in T[r]]
    for i, row in enumerate(T):
        if i != r and row[c] != 0:
            f = row[c]
            T[i] = [a - f * b for a, b in zip(row, T[r])]
    basis[r] = c


def _simplex(T, basis, obj, allowed):
    """Maximize with objective row ``obj`` (reduced costs, last entry = -value)."""
    m = len(T)
    while True:
        enter = next((j for j in allowed if obj[j] < 0), None)
        if enter is None:
            return
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise Unbounded("objective is unbounded")
        r = best[1]
        piv = T[r][enter]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [a - f * b for a, b in zip(T[i], T[r])]
        f = obj[enter]
        obj[:] = [a - f * b for a, b in zip(obj, T[r])]
        basis[r] = enter


def lp_solve(c: Sequence, A: Sequence[Sequence], b: Sequence) -> LPResult:
    c = [Fraction(v) for v in c]
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    n, m = len(c), len(A)
    if any(len(row) != n for row in A) or len(b) != m:
        raise ValueError("inconsistent LP dimensions")
    neg = [i for i in range(m) if b[i] < 0]
    n_art = len(neg)
    width = n + m + n_art
    T, basis = [], []
    for i in range(m):
        sign = -1 if b[i] < 0 else 1
        row = [sign * v for v in A[i]] + [Fraction(0)] * (m + n_art) + [sign * b[i]]
        row[n + i] = Fraction(sign)
        if sign < 0:
            a_col = n + m + neg.index(i)
            row[a_col] = Fraction(1)
            basis.append(a_col)
        else:
            basis.append(n + i)
        T.append(row)

    if n_art:
        # phase 1: maximize -sum(artificials)
        obj = [Fraction(0)] * width + [Fraction(0)]
        for j in range(n + m, width):
            obj[j] = Fraction(1)
        for i in neg:
            obj = [a - v for a, v in zip(obj, T[i])]
        _simplex(T, basis, obj, range(width))
        if obj[-1] != 0:
            raise Infeasible("constraints are infeasible")
        for r in range(m):
            if basis[r] >= n + m:
                col = next((j for j in range(n + m) if T[r][j] != 0), None)
                if col is not None:
                    _pivot(T, basis, r, col)
        T = [row[: n + m] + [row[-1]] for row in T]
        keep = [r for r in range(m) if basis[r] < n + m]
        T = [T[r] for r in keep]
        basis = [basis[r] for r in keep]

    obj = [-v for v in c] + [Fraction(0)] * m + [Fraction(0)]
    for r, bv in enumerate(basis):
        if obj[bv] != 0:
            f = obj[bv]
            obj = [a - f * v for a, v in zip(obj, T[r])]
    _simplex(T, basis, obj, range(n + m))
    x = [Fraction(0)] * (n + m)
    for r, bv in enumerate(basis):
        x[bv] = T[r][-1]
    w = tuple(x[:n])
    return LPResult(sum((ci * wi for ci, wi in zip(c, w)), Fraction(0)), w)


def _solve_square(M, rhs):
    n = len(M)
    aug = [list(row) + [v] for row, v in zip(M, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * bb for a, bb in zip(aug[r], aug[col])]
    return [aug[r][-1] for r in range(n)]


def lp_vertex_enum(c: Sequence, A: Sequence[Sequence], b: Sequence) -> LPResult:
    """Best basic feasible solution by brute force; assumes the optimum is finite."""
    c = [Fraction(v) for v in c]
    n = len(c)
    rows = [([Fraction(v) for v in row], Fraction(bv)) for row, bv in zip(A, b)]
    for j in range(n):
        rows.append(([Fraction(-1 if t == j else 0) for t in range(n)], Fraction(0)))
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        x = _solve_square([rows[r][0] for r in combo], [rows[r][1] for r in combo])
        if x is None:
            continue
        if all(sum(a * v for a, v in zip(row, x)) <= bv for row, bv in rows):
            val = sum(ci * xi for ci, xi in zip(c, x))
            if best is None or val > best.value:
                best = LPResult(val, tuple(x))
    if best is None:
        raise Infeasible("no basic feasible solution")
    return best
