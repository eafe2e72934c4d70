# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex iteration kernel. Same contract as ``_simplex_py``."""

from libc.math cimport fabs, INFINITY

cdef enum:
    OPTIMAL = 0
    UNBOUNDED = 1
    ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1], i, k
    cdef double piv = T[r, j], f
    for k in range(n):
        T[r, k] = T[r, k] / piv
    for i in range(m):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for k in range(n):
                T[i, k] = T[i, k] - f * T[r, k]
    f = d[j]
    for k in range(n):
        d[k] = d[k] - f * T[r, k]


def pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t j):
    _pivot(T, d, r, j)


def iterate(double[:, ::1] T, double[::1] d, double[::1] beta,
            long[::1] basis, long[::1] pos, signed char[::1] at_upper,
            double[::1] lo, double[::1] up, long max_iter, long bland_after,
            double tol, double piv_tol, double big):
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1]
    cdef Py_ssize_t i, j, k, leave, it
    cdef long degenerate = 0
    cdef bint bland = False, increasing
    cdef double best, dj, direction, theta, a, lim, rmin, step, enter_val
    cdef double tie = piv_tol * 1e-2
    cdef int status = ITERATION_LIMIT
    cdef long iters = max_iter

    with nogil:
        for it in range(max_iter):
            j = -1
            best = -1.0
            increasing = False
            for k in range(n):
                if pos[k] >= 0:
                    continue
                dj = d[k]
                if at_upper[k] == 0 and dj > tol and up[k] > lo[k]:
                    if bland:
                        j = k
                        increasing = True
                        break
                    if fabs(dj) > best:
                        best = fabs(dj)
                        j = k
                        increasing = True
                elif at_upper[k] == 1 and dj < -tol:
                    if bland:
                        j = k
                        increasing = False
                        break
                    if fabs(dj) > best:
                        best = fabs(dj)
                        j = k
                        increasing = False
            if j < 0:
                status = OPTIMAL
                iters = it
                break
            direction = 1.0 if increasing else -1.0

            theta = up[j] - lo[j]
            leave = -1
            if m > 0:
                rmin = INFINITY
                for i in range(m):
                    a = T[i, j] * direction
                    if a > piv_tol:
                        lim = (beta[i] - lo[basis[i]]) / a
                    elif a < -piv_tol:
                        lim = (up[basis[i]] - beta[i]) / -a
                    else:
                        continue
                    if lim < 0.0:
                        lim = 0.0
                    if lim < rmin:
                        rmin = lim
                if rmin < theta:
                    for i in range(m):
                        a = T[i, j] * direction
                        if a > piv_tol:
                            lim = (beta[i] - lo[basis[i]]) / a
                        elif a < -piv_tol:
                            lim = (up[basis[i]] - beta[i]) / -a
                        else:
                            continue
                        if lim < 0.0:
                            lim = 0.0
                        if lim <= rmin + tie:
                            if leave < 0 or basis[i] < basis[leave]:
                                leave = i
                                theta = lim

            if leave < 0 and theta >= 0.5 * big:
                status = UNBOUNDED
                iters = it
                break

            step = theta * direction
            for i in range(m):
                beta[i] = beta[i] - step * T[i, j]
            if leave < 0:
                at_upper[j] = 1 - at_upper[j]
            else:
                k = basis[leave]
                enter_val = (up[j] if at_upper[j] else lo[j]) + step
                at_upper[k] = 1 if T[leave, j] * direction < 0.0 else 0
                pos[k] = -1
                _pivot(T, d, leave, j)
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
    return status, iters
