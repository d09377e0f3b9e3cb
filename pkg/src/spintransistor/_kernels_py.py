"""Pure numpy fallback for the ordered-sector sums in ``_kernels_c``."""

from itertools import combinations

import numpy as np


def increasing_tuples(n: int, d: int, chunk: int = 200_000):
    """Yield arrays of strictly increasing index tuples, shape (m, d), in lexicographic order."""
    if d > n or d <= 0:
        return
    if d == 1:
        yield np.arange(n)[:, None]
        return
    pending = []
    size = 0
    for prefix in combinations(range(n), d - 2):
        lo = prefix[-1] + 1 if prefix else 0
        i, j = np.triu_indices(n - lo, 1)
        if i.size == 0:
            continue
        block = np.empty((i.size, d), dtype=np.intp)
        block[:, : d - 2] = prefix
        block[:, d - 2] = i + lo
        block[:, d - 1] = j + lo
        pending.append(block)
        size += i.size
        if size >= chunk:
            yield np.concatenate(pending)
            pending, size = [], 0
    if pending:
        yield np.concatenate(pending)


def contact_sum(phi: np.ndarray, dphi: np.ndarray, bond: int) -> float:
    phi = np.asarray(phi, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    N, n = phi.shape
    if not 0 <= bond < N - 1:
        raise ValueError(f"bond must be in [0, {N - 2}], got {bond}")
    if dphi.shape != phi.shape:
        raise ValueError("phi and dphi shapes differ")
    # particle k reads free coordinate cols[k]
    cols = [k if k <= bond else k - 1 for k in range(N)]
    total = 0.0
    for tup in increasing_tuples(n, N - 1):
        M = phi[:, tup[:, cols]]  # (N orbitals, m, N particles)
        M[:, :, bond] = dphi[:, tup[:, bond]]
        det = np.linalg.det(np.transpose(M, (1, 0, 2)))
        total += float(np.dot(det, det))
    return total


def ordered_sums(phi: np.ndarray, field=None):
    phi = np.asarray(phi, dtype=float)
    N, n = phi.shape
    B = None if field is None else np.asarray(field, dtype=float)
    if B is not None and B.shape != (n,):
        raise ValueError("field length differs from grid length")
    total = 0.0
    acc = np.zeros(N)
    for tup in increasing_tuples(n, N):
        M = phi[:, tup]
        det = np.linalg.det(np.transpose(M, (1, 0, 2)))
        det2 = det * det
        total += float(det2.sum())
        if B is not None:
            acc += det2 @ B[tup]
    return total, (acc if B is not None else None)
