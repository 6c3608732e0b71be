"""Small dense two-phase simplex.

Solves  minimize c @ x  subject to  A_ub @ x <= b_ub,  lo <= x <= hi
for the handful of variables the deployment problems need (M <= 10). Upper
bounds become explicit rows; Bland's rule guards against cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InvalidParameterError

TOL = 1e-9


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


class UnboundedError(InvalidParameterError):
    pass


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factor = tab[:, col].copy()
    factor[row] = 0.0
    tab -= np.outer(factor, tab[row])


def _run(tab: np.ndarray, basis: list[int], n_cols: int, max_iter: int) -> int:
    """Simplex iterations on ``tab`` (last row = reduced costs, last column = rhs)."""
    for it in range(max_iter):
        cost = tab[-1, :n_cols]
        entering = next((j for j in range(n_cols) if cost[j] < -TOL), None)
        if entering is None:
            return it
        col = tab[:-1, entering]
        rhs = tab[:-1, -1]
        ratios = np.full(len(col), np.inf)
        pos = col > TOL
        ratios[pos] = rhs[pos] / col[pos]
        if not np.isfinite(ratios).any():
            raise UnboundedError("linear program is unbounded")
        best = ratios.min()
        # Bland: lowest basis index among ties
        ties = [i for i in range(len(col)) if ratios[i] <= best + TOL * max(1.0, abs(best))]
        leaving = min(ties, key=lambda i: basis[i])
        _pivot(tab, leaving, entering)
        basis[leaving] = entering
    raise InvalidParameterError(f"simplex did not terminate in {max_iter} iterations")


def linprog(c, A_ub=None, b_ub=None, bounds=None, max_iter: int = 10_000) -> LPResult:
    """Minimise ``c @ x`` under ``A_ub @ x <= b_ub`` and per-variable bounds.

    ``bounds`` is a list of (lo, hi) pairs with finite lo; hi may be inf.
    Defaults to x >= 0.

    Raises:
        InfeasibleError: phase one cannot drive the artificials to zero;
            ``certificate`` holds the indices of rows that stay violated.
        UnboundedError: the objective decreases without limit.
    """
    c = np.asarray(c, float)
    n = c.size
    A = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    if bounds is None:
        bounds = [(0.0, np.inf)] * n
    lo = np.array([bd[0] for bd in bounds], float)
    hi = np.array([bd[1] for bd in bounds], float)
    if np.any(~np.isfinite(lo)) or np.any(hi < lo):
        raise InvalidParameterError("bounds need finite lower ends and lo <= hi")

    # shift x = lo + y, y >= 0
    b = b - A @ lo
    span = hi - lo
    ub_rows = [i for i in range(n) if np.isfinite(span[i])]
    rows = np.vstack([A, np.eye(n)[ub_rows]]) if ub_rows else A
    rhs = np.concatenate([b, span[ub_rows]])
    m = rows.shape[0]
    n_struct = n + m  # structural + one slack per row
    sign = np.where(rhs < 0, -1.0, 1.0)
    need_art = np.nonzero(sign < 0)[0]
    n_art = len(need_art)
    width = n_struct + n_art
    tab = np.zeros((m + 1, width + 1))
    tab[:m, :n] = rows * sign[:, None]
    tab[:m, n:n_struct] = np.diag(sign)
    tab[:m, -1] = rhs * sign
    basis = [n + i for i in range(m)]
    for k, i in enumerate(need_art):
        tab[i, n_struct + k] = 1.0
        basis[i] = n_struct + k

    iterations = 0
    if n_art:
        tab[-1, n_struct:width] = 1.0
        for i in need_art:
            tab[-1] -= tab[i]
        iterations += _run(tab, basis, width, max_iter)
        if tab[-1, -1] < -TOL * max(1.0, np.abs(rhs).max()):
            bad = [int(i) for i in need_art if i < len(b) and basis[i] >= n_struct and tab[i, -1] > TOL]
            raise InfeasibleError("linear program is infeasible", bad)
        # drive degenerate artificials out of the basis
        for i in range(m):
            if basis[i] >= n_struct:
                j = next((j for j in range(n_struct) if abs(tab[i, j]) > TOL), None)
                if j is not None:
                    _pivot(tab, i, j)
                    basis[i] = j
        tab = np.delete(tab, range(n_struct, width), axis=1)
        keep = [i for i in range(m) if basis[i] < n_struct]
        tab = np.vstack([tab[keep], tab[-1:]])
        basis = [basis[i] for i in keep]

    tab[-1] = 0.0
    tab[-1, :n] = c
    for i, j in enumerate(basis):
        if tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[i]
    iterations += _run(tab, basis, n_struct, max_iter)

    y = np.zeros(n_struct)
    for i, j in enumerate(basis):
        y[j] = tab[i, -1]
    x = lo + np.clip(y[:n], 0.0, None)
    x = np.minimum(x, hi)
    return LPResult(x, float(c @ x), iterations)
