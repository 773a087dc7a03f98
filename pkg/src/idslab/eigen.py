"""Dense symmetric eigensolver and Sturm-sequence counting.

Householder reduction to tridiagonal form, then implicit QL with Wilkinson
shifts. Both stages are compiled with numba and walk rows, so memory access
stays contiguous.
"""
from __future__ import annotations

import logging
import math

import numba
import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

MAX_SWEEPS = 30
_EPS = np.finfo(float).eps


class EigenConvergenceError(RuntimeError):
    def __init__(self, index: int):
        super().__init__(f"QL iteration did not converge for eigenvalue index {index} after {MAX_SWEEPS} sweeps")
        self.index = index


def is_tridiagonal(A: np.ndarray) -> bool:
    n = A.shape[0]
    if n <= 2:
        return True
    off = np.triu(A, 2)
    return not off.any()


@numba.njit(cache=True)
def _reduce(A, V):
    """Householder sweep on the full symmetric A (in place). Reflector k is stored in
    row k of V (columns k+1:); rows of skipped steps stay zero."""
    n = A.shape[0]
    p = np.empty(n)
    for k in range(n - 2):
        m = n - k - 1
        alpha = 0.0
        tail = 0.0
        for j in range(k + 1, n):
            alpha += A[k, j] * A[k, j]
            if j > k + 1:
                tail += A[k, j] * A[k, j]
        if tail == 0.0:
            continue
        alpha = math.sqrt(alpha)
        if A[k, k + 1] > 0:
            alpha = -alpha
        v = V[k, k + 1:]
        for j in range(m):
            v[j] = A[k, k + 1 + j]
        v[0] -= alpha
        nv = 0.0
        for j in range(m):
            nv += v[j] * v[j]
        nv = math.sqrt(nv)
        for j in range(m):
            v[j] /= nv
        # A22 <- H A22 H with H = I - 2 v v^T, rows are contiguous
        K = 0.0
        for i in range(m):
            acc = 0.0
            row = A[k + 1 + i, k + 1:]
            for j in range(m):
                acc += row[j] * v[j]
            p[i] = acc
            K += v[i] * acc
        for i in range(m):
            p[i] = 2.0 * (p[i] - K * v[i])
        for i in range(m):
            row = A[k + 1 + i, k + 1:]
            vi = v[i]
            pi = p[i]
            for j in range(m):
                row[j] -= vi * p[j] + pi * v[j]
        for j in range(k + 1, n):
            A[k, j] = 0.0
            A[j, k] = 0.0
        A[k, k + 1] = alpha
        A[k + 1, k] = alpha


@numba.njit(cache=True)
def _accumulate(V):
    """Q = H_0 H_1 ... H_{n-3}, applied backwards so each step touches its trailing block."""
    n = V.shape[0]
    Q = np.eye(n)
    u = np.empty(n)
    for k in range(n - 3, -1, -1):
        v = V[k, k + 1:]
        m = n - k - 1
        nz = False
        for j in range(m):
            if v[j] != 0.0:
                nz = True
                break
        if not nz:
            continue
        for j in range(m):
            u[j] = 0.0
        for i in range(m):
            vi = v[i]
            if vi != 0.0:
                row = Q[k + 1 + i, k + 1:]
                for j in range(m):
                    u[j] += vi * row[j]
        for i in range(m):
            c = 2.0 * v[i]
            if c != 0.0:
                row = Q[k + 1 + i, k + 1:]
                for j in range(m):
                    row[j] -= c * u[j]
    return Q


def householder_tridiagonalize(A: np.ndarray, want_q: bool = False):
    """Return (diag, offdiag, Q) with Q^T A Q tridiagonal; Q is None unless requested."""
    A = np.array(A, dtype=float, order="C", copy=True)
    n = A.shape[0]
    V = np.zeros((n, n))
    _reduce(A, V)
    Q = _accumulate(V) if want_q else None
    d = np.diag(A).copy()
    e = np.diag(A, -1).copy() if n > 1 else np.zeros(0)
    return d, e, Q


@numba.njit(cache=True)
def _tql(d, e, zt, want):
    """In-place implicit QL on (d, e); e[i] couples i and i+1. Returns -1 or the stuck index."""
    n = d.shape[0]
    ee = np.zeros(n)
    ee[: n - 1] = e
    eps = 2.220446049250313e-16
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(ee[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if sweeps == 30:
                return l
            sweeps += 1
            # Wilkinson shift from the leading 2x2 block
            g = (d[l + 1] - d[l]) / (2.0 * ee[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + ee[l] / (g + (r if g >= 0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            deflated = False
            i = m - 1
            while i >= l:
                f = s * ee[i]
                b = c * ee[i]
                r = math.hypot(f, g)
                ee[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    ee[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want:
                    # zt holds eigenvector columns as rows
                    zi = zt[i]
                    zj = zt[i + 1]
                    for k in range(zt.shape[1]):
                        f = zj[k]
                        zj[k] = s * zi[k] + c * f
                        zi[k] = c * zi[k] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            ee[l] = g
            ee[m] = 0.0
    return -1


def tridiagonal_eigh(d, e, z=None):
    """Eigenvalues (and rotated z, if given) of the symmetric tridiagonal (d, e)."""
    d = np.array(d, dtype=float, copy=True)
    e = np.array(e, dtype=float, copy=True)
    want = z is not None
    zt = np.ascontiguousarray(np.asarray(z, dtype=float).T) if want else np.zeros((0, 0))
    if d.shape[0] > 1:
        bad = _tql(d, e, zt, want)
        if bad >= 0:
            raise EigenConvergenceError(int(bad))
    order = np.argsort(d, kind="stable")
    return d[order], (np.ascontiguousarray(zt[order].T) if want else None)


def symmetric_eigh(A: np.ndarray, want_vectors: bool = False):
    """Eigenvalues ascending (and orthonormal eigenvectors as columns)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix must be symmetric")
    if n == 0:
        return np.zeros(0), (np.zeros((0, 0)) if want_vectors else None)
    if is_tridiagonal(A):
        # reflectors are trivial here
        d, e = np.diag(A).copy(), np.diag(A, -1).copy()
        Q = np.eye(n) if want_vectors else None
    else:
        d, e, Q = householder_tridiagonalize(A, want_q=want_vectors)
    return tridiagonal_eigh(d, e, Q)


# -- Sturm counting ---------------------------------------------------------------

def sturm_count_tridiagonal(d, e, lam: float, max_retries: int = 8) -> int:
    """Number of eigenvalues strictly below ``lam`` from the signs of the LDL^T pivots
    of T - lam I. A zero pivot means lam is (numerically) an eigenvalue; the count is
    then redone at lam nudged down by a few ulps, which keeps the strict inequality."""
    d = np.asarray(d, dtype=float)
    e2 = np.asarray(e, dtype=float) ** 2
    x = float(lam)
    for attempt in range(max_retries + 1):
        count, ok = _sturm(d, e2, x)
        if ok:
            if attempt:
                log.info("sturm count at %r used jittered lambda %r", lam, x)
            return count
        x = x - max(abs(x), 1.0) * _EPS * 4 ** (attempt + 1)
    raise ArithmeticError(f"Sturm pivot breakdown persisted near lambda={lam}")


@numba.njit(cache=True)
def _sturm(d, e2, x):
    count = 0
    q = d[0] - x
    if q == 0.0:
        return 0, False
    if q < 0:
        count += 1
    for i in range(1, d.shape[0]):
        q = d[i] - x - e2[i - 1] / q
        if q == 0.0:
            return 0, False
        if q < 0:
            count += 1
    return count, True


def tridiagonal_form(A: np.ndarray):
    """(diag, offdiag) of a symmetric matrix, reduced independently of the eigen path."""
    A = np.asarray(A, dtype=float)
    if is_tridiagonal(A):
        return np.diag(A).copy(), np.diag(A, -1).copy()
    T = scipy.linalg.hessenberg(A)
    return np.diag(T).copy(), np.diag(T, -1).copy()


def sturm_count(A: np.ndarray, lam: float) -> int:
    d, e = tridiagonal_form(A)
    return sturm_count_tridiagonal(d, e, lam)
