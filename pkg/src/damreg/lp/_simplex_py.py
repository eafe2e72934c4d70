"""Pure-Python (numpy) simplex iteration kernel.

Mirrors ``_simplex_cy.pyx`` operation for operation so that both backends
follow the same pivot sequence on well-conditioned problems.
"""
import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def pivot(T, d, r, j):
    """Gauss-Jordan pivot of the tableau ``T`` and reduced costs ``d`` on (r, j)."""
    T[r, :] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r, :])
    d -= d[j] * T[r, :]


def iterate(T, d, beta, basis, pos, at_upper, lo, up, max_iter, bland_after,
            tol, piv_tol, big):
    """Run bounded-variable primal simplex iterations in place.

    Returns ``(status, iterations)``. All arrays are modified in place.
    """
    m = T.shape[0]
    degenerate = 0
    bland = False
    for it in range(max_iter):
        nonbasic = pos < 0
        inc = nonbasic & (at_upper == 0) & (d > tol) & (up > lo)
        dec = nonbasic & (at_upper == 1) & (d < -tol)
        cand = inc | dec
        if not cand.any():
            return OPTIMAL, it
        if bland:
            j = int(np.argmax(cand))
        else:
            j = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
        direction = 1.0 if inc[j] else -1.0

        theta = up[j] - lo[j]
        leave = -1
        if m:
            col = T[:, j] * direction
            lim = np.full(m, np.inf)
            bl = lo[basis]
            bu = up[basis]
            p = col > piv_tol
            n = col < -piv_tol
            lim[p] = (beta[p] - bl[p]) / col[p]
            lim[n] = (bu[n] - beta[n]) / -col[n]
            np.maximum(lim, 0.0, out=lim)
            rmin = lim.min()
            if rmin < theta:
                ties = np.flatnonzero(lim <= rmin + piv_tol * 1e-2)
                leave = int(ties[np.argmin(basis[ties])])
                theta = lim[leave]

        if leave < 0 and theta >= 0.5 * big:
            return UNBOUNDED, it

        step = theta * direction
        if m:
            beta -= step * T[:, j]
        if leave < 0:
            at_upper[j] = 1 - at_upper[j]
        else:
            k = basis[leave]
            enter_val = (up[j] if at_upper[j] else lo[j]) + step
            at_upper[k] = 1 if T[leave, j] * direction < 0.0 else 0
            pos[k] = -1
            pivot(T, d, leave, j)
            beta[leave] = enter_val
            basis[leave] = j
            pos[j] = leave
            at_upper[j] = 0

        if theta <= piv_tol:
            degenerate += 1
            if degenerate >= bland_after:
                bland = True
        else:
            degenerate = 0
    return ITERATION_LIMIT, max_iter
