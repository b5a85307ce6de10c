"""Exact rational simplex (two-phase, Bland's rule).

Solves  maximize c.x  subject to  A x <= b, x >= 0  over the rationals and
returns the optimum, a primal solution and the dual values of the
inequalities.  Bland's rule guarantees termination; everything is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = ["LPResult", "solve_max", "LPError"]


class LPError(ValueError):
    pass


@dataclass
class LPResult:
    status: str  # "optimal" or "unbounded"
    value: Fraction | None
    x: list[Fraction] | None
    duals: list[Fraction] | None  # one per inequality, >= 0


def _pivot(tab: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = tab[row][col]
    tab[row] = [v / piv for v in tab[row]]
    for r in range(len(tab)):
        if r != row and tab[r][col] != 0:
            f = tab[r][col]
            tab[r] = [v - f * w for v, w in zip(tab[r], tab[row])]
    basis[row] = col


def _simplex(tab: list[list[Fraction]], basis: list[int], cost: list[Fraction], ncols: int):
    """Maximize; cost is a full-length row (including the rhs entry at -1).
    Runs Bland's rule in place and returns the reduced-cost row."""
    m = len(tab)
    # reduced costs: z_j - c_j form; start from the cost row and eliminate basics
    red = cost[:]
    for r, bcol in enumerate(basis):
        if red[bcol] != 0:
            f = red[bcol]
            red = [v - f * w for v, w in zip(red, tab[r])]
    while True:
        enter = next((j for j in range(ncols) if red[j] > 0), None)
        if enter is None:
            return red
        best: tuple[Fraction, int] | None = None
        leave = None
        for r in range(m):
            if tab[r][enter] > 0:
                ratio = tab[r][-1] / tab[r][enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < best[1]):
                    best = (ratio, basis[r])
                    leave = r
        if leave is None:
            return None  # unbounded
        _pivot(tab, basis, leave, enter)
        f = red[enter]
        if f != 0:
            red = [v - f * w for v, w in zip(red, tab[leave])]


def solve_max(
    objective: list[Fraction],
    rows: list[list[Fraction]],
    rhs: list[Fraction],
) -> LPResult:
    """maximize objective . x  subject to  rows x <= rhs,  x >= 0."""
    n = len(objective)
    m = len(rows)
    objective = [Fraction(v) for v in objective]
    rhs = [Fraction(v) for v in rhs]
    # equality form with slacks; flip rows with negative rhs and add artificials
    nart = sum(1 for b in rhs if b < 0)
    total = n + m + nart
    tab: list[list[Fraction]] = []
    basis: list[int] = []
    art_col = n + m
    art_rows = []
    for i in range(m):
        row = [Fraction(v) for v in rows[i]] + [Fraction(0)] * (m + nart) + [rhs[i]]
        row[n + i] = Fraction(1)
        if rhs[i] < 0:
            row = [-v for v in row]
            row[art_col] = Fraction(1)
            basis.append(art_col)
            art_rows.append(i)
            art_col += 1
        else:
            basis.append(n + i)
        tab.append(row)

    if nart:
        phase1 = [Fraction(0)] * (total + 1)
        for j in range(n + m, n + m + nart):
            phase1[j] = Fraction(-1)
        red = _simplex(tab, basis, phase1, total)
        assert red is not None, "phase 1 cannot be unbounded"
        value = -red[-1]
        if value != 0:
            raise LPError("infeasible program")
        # drive any artificial variables out of the basis
        for r in range(m):
            if basis[r] >= n + m:
                col = next((j for j in range(n + m) if tab[r][j] != 0), None)
                if col is not None:
                    _pivot(tab, basis, r, col)

    cost = objective + [Fraction(0)] * (m + nart) + [Fraction(0)]
    red = _simplex(tab, basis, cost, n + m)
    if red is None:
        return LPResult("unbounded", None, None, None)
    x = [Fraction(0)] * n
    for r, bcol in enumerate(basis):
        if bcol < n:
            x[bcol] = tab[r][-1]
    value = sum(c * v for c, v in zip(objective, x))
    # duals: the multiplier on an original row is minus the reduced cost of
    # its slack column (negating a row negates both the multiplier and the
    # slack column, so the formula is uniform)
    duals = [-red[n + i] for i in range(m)]
    return LPResult("optimal", value, x, duals)
