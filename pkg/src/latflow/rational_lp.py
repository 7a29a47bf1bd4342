"""Exact linear programming over the rationals.

A textbook two-phase primal simplex with Bland's rule, run entirely on
Fraction arithmetic.  Problem sizes in this package are tiny (tens of
variables and rows), so exactness wins over speed.

Problems are stated as

    minimize c . x   subject to   A x (<= or ==) b,  x >= 0.

The result carries the optimal vertex, the objective, and one dual
multiplier per input row normalized so that objective == duals . b; for
'<=' rows the multiplier is <= 0 at optimality.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class LPResult:
    status: str
    x: tuple[Fraction, ...]
    objective: Fraction | None
    duals: tuple[Fraction, ...] | None


def _pivot(T: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = T[row][col]
    T[row] = [v / piv for v in T[row]]
    for r in range(len(T)):
        if r != row and T[r][col] != 0:
            f = T[r][col]
            T[r] = [a - f * b for a, b in zip(T[r], T[row])]
    basis[row] = col


def _run_simplex(
    T: list[list[Fraction]],
    basis: list[int],
    cost: list[Fraction],
    allowed_cols: int,
) -> str:
    """Minimize the cost row in place over columns [0, allowed_cols).

    Bland's rule on both the entering and the leaving choice, so the method
    cannot cycle.  The cost row carries the negated objective in its last slot.
    """
    while True:
        enter = next((j for j in range(allowed_cols) if cost[j] < 0), None)
        if enter is None:
            return OPTIMAL
        ratios = [
            (T[r][-1] / T[r][enter], basis[r], r)
            for r in range(len(T))
            if T[r][enter] > 0
        ]
        if not ratios:
            return UNBOUNDED
        _, _, row = min(ratios)  # min ratio, ties broken by smallest basic index
        _pivot(T, basis, row, enter)
        f = cost[enter]
        cost[:] = [a - f * b for a, b in zip(cost, T[row])]


def solve_min(
    c: Sequence[Fraction],
    A: Sequence[Sequence[Fraction]],
    b: Sequence[Fraction],
    senses: Sequence[str],
) -> LPResult:
    nvar = len(c)
    nrow = len(A)
    if len(b) != nrow or len(senses) != nrow:
        raise LPError("inconsistent row data")
    c = [Fraction(v) for v in c]
    rows = [[Fraction(v) for v in row] for row in A]
    rhs = [Fraction(v) for v in b]
    flipped = [False] * nrow
    for r in range(nrow):
        if senses[r] not in ("<=", "=="):
            raise LPError(f"unsupported sense {senses[r]!r}")
        if rhs[r] < 0:
            rows[r] = [-v for v in rows[r]]
            rhs[r] = -rhs[r]
            flipped[r] = True

    # column layout: [vars | slacks (one per <= row) | artificials]
    slack_col: dict[int, int] = {}
    col = nvar
    for r in range(nrow):
        if senses[r] == "<=":
            slack_col[r] = col
            col += 1
    nslack = col - nvar
    art_col: dict[int, int] = {}
    for r in range(nrow):
        # a flipped <= row has slack coefficient -1, so it still needs an artificial
        if senses[r] == "==" or flipped[r]:
            art_col[r] = col
            col += 1
    ncols = col

    T: list[list[Fraction]] = []
    basis: list[int] = []
    for r in range(nrow):
        row = rows[r] + [Fraction(0)] * (ncols - nvar) + [rhs[r]]
        if r in slack_col:
            row[slack_col[r]] = Fraction(-1) if flipped[r] else Fraction(1)
        if r in art_col:
            row[art_col[r]] = Fraction(1)
            basis.append(art_col[r])
        else:
            basis.append(slack_col[r])
        T.append(row)

    art_set = set(art_col.values())

    # phase 1: drive the artificials to zero
    if art_set:
        cost1 = [Fraction(0)] * ncols + [Fraction(0)]
        for ac in art_set:
            cost1[ac] = Fraction(1)
        for r in range(nrow):
            if basis[r] in art_set:
                cost1 = [a - bb for a, bb in zip(cost1, T[r])]
        status = _run_simplex(T, basis, cost1, ncols)
        if status != OPTIMAL or cost1[-1] != 0:
            return LPResult(INFEASIBLE, (), None, None)
        # pivot surviving zero-level artificials out where possible
        for r in range(nrow):
            if basis[r] in art_set:
                piv = next((j for j in range(nvar + nslack) if T[r][j] != 0), None)
                if piv is not None:
                    _pivot(T, basis, r, piv)

    # phase 2 over the real columns only
    cost2 = list(c) + [Fraction(0)] * (ncols - nvar) + [Fraction(0)]
    for r in range(nrow):
        if cost2[basis[r]] != 0:
            f = cost2[basis[r]]
            cost2 = [a - f * bb for a, bb in zip(cost2, T[r])]
    status = _run_simplex(T, basis, cost2, nvar + nslack)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, (), None, None)

    x = [Fraction(0)] * nvar
    for r in range(nrow):
        if basis[r] < nvar:
            x[basis[r]] = T[r][-1]
    objective = sum(ci * xi for ci, xi in zip(c, x))

    duals = _solve_duals(c, rows, slack_col, art_col, basis, nrow, nvar)
    # undo the sign flips applied to normalize the rhs
    duals = [(-d if flipped[r] else d) for r, d in enumerate(duals)]
    return LPResult(OPTIMAL, tuple(x), objective, tuple(duals))


def _solve_duals(c, rows, slack_col, art_col, basis, nrow, nvar):
    """Solve B^T y = c_B exactly for the final basis columns."""

    def column(j: int) -> list[Fraction]:
        if j < nvar:
            return [rows[r][j] for r in range(nrow)]
        col = [Fraction(0)] * nrow
        for r, sc in slack_col.items():
            if sc == j:
                col[r] = Fraction(1)
        for r, ac in art_col.items():
            if ac == j:
                col[r] = Fraction(1)
        return col

    # rows of the system are basis columns transposed: column(bj) . y = c_bj
    M = []
    for bj in basis:
        coef = column(bj)
        cost = c[bj] if bj < nvar else Fraction(0)
        M.append(coef + [cost])

    y = [Fraction(0)] * nrow
    ri = 0
    pivot_row_of = [-1] * nrow
    for cj in range(nrow):
        piv = next((r for r in range(ri, nrow) if M[r][cj] != 0), None)
        if piv is None:
            continue
        M[ri], M[piv] = M[piv], M[ri]
        inv = M[ri][cj]
        M[ri] = [v / inv for v in M[ri]]
        for r in range(len(M)):
            if r != ri and M[r][cj] != 0:
                f = M[r][cj]
                M[r] = [a - f * bb for a, bb in zip(M[r], M[ri])]
        pivot_row_of[cj] = ri
        ri += 1
    for cj in range(nrow):
        if pivot_row_of[cj] >= 0:
            y[cj] = M[pivot_row_of[cj]][nrow]
    return y


def verify_optimality(
    c: Sequence[Fraction],
    A: Sequence[Sequence[Fraction]],
    b: Sequence[Fraction],
    senses: Sequence[str],
    x: Sequence[Fraction],
    duals: Sequence[Fraction],
    objective: Fraction,
) -> None:
    """Independent rational proof that (x, duals) certify optimality.

    Checks primal feasibility, dual sign and feasibility, and strong duality;
    by weak duality these conditions force x to be optimal.  Raises LPError
    with a description if anything fails.
    """
    nrow = len(A)
    nvar = len(c)
    if any(xi < 0 for xi in x):
        raise LPError("primal witness has negative coordinates")
    for r in range(nrow):
        lhs = sum(A[r][j] * x[j] for j in range(nvar))
        if senses[r] == "<=" and lhs > b[r]:
            raise LPError(f"primal witness violates row {r}")
        if senses[r] == "==" and lhs != b[r]:
            raise LPError(f"primal witness violates equality row {r}")
    for r in range(nrow):
        if senses[r] == "<=" and duals[r] > 0:
            raise LPError(f"dual multiplier for <= row {r} must be nonpositive")
    for j in range(nvar):
        reduced = c[j] - sum(duals[r] * A[r][j] for r in range(nrow))
        if reduced < 0:
            raise LPError(f"dual multipliers violate reduced cost at column {j}")
    primal_obj = sum(c[j] * x[j] for j in range(nvar))
    dual_obj = sum(duals[r] * b[r] for r in range(nrow))
    if primal_obj != objective or dual_obj != objective:
        raise LPError("strong duality does not hold exactly")
