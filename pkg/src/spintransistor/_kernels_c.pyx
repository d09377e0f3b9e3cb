# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ordered-sector sums over tensor grids.

Both kernels visit every strictly increasing index tuple on the grid and
accumulate squared Slater determinants built from orbital samples
``phi[i, x]`` (orbital ``i`` at grid point ``x``).
"""

import numpy as np
from libc.math cimport fabs

cdef enum:
    MAXN = 8


cdef double _det(double* a, int n) noexcept nogil:
    cdef int i, j, k, p
    cdef double det = 1.0, piv, f, tmp
    for k in range(n):
        p = k
        piv = fabs(a[k * n + k])
        for i in range(k + 1, n):
            if fabs(a[i * n + k]) > piv:
                piv = fabs(a[i * n + k])
                p = i
        if piv == 0.0:
            return 0.0
        if p != k:
            for j in range(n):
                tmp = a[k * n + j]
                a[k * n + j] = a[p * n + j]
                a[p * n + j] = tmp
            det = -det
        det *= a[k * n + k]
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            for j in range(k + 1, n):
                a[i * n + j] -= f * a[k * n + j]
    return det


cdef bint _advance(int* idx, int d, int n) noexcept nogil:
    cdef int k = d - 1, j
    while k >= 0 and idx[k] == n - d + k:
        k -= 1
    if k < 0:
        return False
    idx[k] += 1
    for j in range(k + 1, d):
        idx[j] = idx[j - 1] + 1
    return True


def contact_sum(double[:, ::1] phi, double[:, ::1] dphi, int bond):
    """Sum of D^2 over ordered grid tuples on the coincidence plane of ``bond``.

    With N orbitals there are N - 1 free ordered coordinates; particles
    ``bond`` and ``bond + 1`` share one of them, and column ``bond`` of the
    determinant holds orbital derivatives.
    """
    cdef int N = phi.shape[0], n = phi.shape[1], d = N - 1
    cdef int idx[MAXN]
    cdef double a[MAXN * MAXN]
    cdef int i, k, x
    cdef double det, total = 0.0
    if N < 2 or N > MAXN:
        raise ValueError(f"orbital count must be in [2, {MAXN}], got {N}")
    if not 0 <= bond < N - 1:
        raise ValueError(f"bond must be in [0, {N - 2}], got {bond}")
    if dphi.shape[0] != N or dphi.shape[1] != n:
        raise ValueError("phi and dphi shapes differ")
    if d > n:
        return 0.0
    for k in range(d):
        idx[k] = k
    with nogil:
        while True:
            for k in range(N):
                if k < bond:
                    x = idx[k]
                elif k <= bond + 1:
                    x = idx[bond]
                else:
                    x = idx[k - 1]
                if k == bond:
                    for i in range(N):
                        a[i * N + k] = dphi[i, x]
                else:
                    for i in range(N):
                        a[i * N + k] = phi[i, x]
            det = _det(a, N)
            total += det * det
            if not _advance(idx, d, n):
                break
    return total


def ordered_sums(double[:, ::1] phi, field=None):
    """Sum of D^2 over ordered N-tuples and, with ``field``, sums of D^2 B(x_j).

    Returns ``(norm_sum, field_sums)``; ``field_sums`` is None without a field.
    """
    cdef int N = phi.shape[0], n = phi.shape[1]
    cdef int idx[MAXN]
    cdef double a[MAXN * MAXN]
    cdef int i, k
    cdef double det2, total = 0.0
    cdef bint use_field = field is not None
    cdef double[::1] B
    cdef double[::1] acc = np.zeros(N)
    if N < 1 or N > MAXN:
        raise ValueError(f"orbital count must be in [1, {MAXN}], got {N}")
    if use_field:
        B = np.ascontiguousarray(field, dtype=np.float64)
        if B.shape[0] != n:
            raise ValueError("field length differs from grid length")
    else:
        B = np.zeros(1)
    if N > n:
        return 0.0, (np.zeros(N) if use_field else None)
    for k in range(N):
        idx[k] = k
    with nogil:
        while True:
            for k in range(N):
                for i in range(N):
                    a[i * N + k] = phi[i, idx[k]]
            det2 = _det(a, N)
            det2 = det2 * det2
            total += det2
            if use_field:
                for k in range(N):
                    acc[k] += det2 * B[idx[k]]
            if not _advance(idx, N, n):
                break
    return total, (np.asarray(acc) if use_field else None)
