import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spintransistor import kernels
from spintransistor._kernels_py import increasing_tuples

BACKENDS = kernels.available_backends()


def brute_contact(phi, dphi, bond):
    n, m = phi.shape
    total = 0.0
    for tup in combinations(range(m), n - 1):
        cols = [tup[k] if k < bond else tup[bond] if k <= bond + 1 else tup[k - 1] for k in range(n)]
        M = phi[:, cols].copy()
        M[:, bond] = dphi[:, tup[bond]]
        total += np.linalg.det(M) ** 2
    return total


def brute_ordered(phi, field):
    n, m = phi.shape
    total, sums = 0.0, np.zeros(n)
    for tup in combinations(range(m), n):
        d2 = np.linalg.det(phi[:, list(tup)]) ** 2
        total += d2
        sums += d2 * field[list(tup)]
    return total, sums


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(6, 11), st.integers(0, 2**32 - 1))
def test_kernels_match_brute_force(backend, n, m, seed):
    rng = np.random.default_rng(seed)
    phi, dphi, field = rng.normal(size=(n, m)), rng.normal(size=(n, m)), rng.normal(size=m)
    for bond in range(n - 1):
        got = kernels.contact_sum(phi, dphi, bond, backend=backend)
        assert got == pytest.approx(brute_contact(phi, dphi, bond), rel=1e-10)
    total, sums = kernels.ordered_sums(phi, field, backend=backend)
    ref_total, ref_sums = brute_ordered(phi, field)
    assert total == pytest.approx(ref_total, rel=1e-10)
    np.testing.assert_allclose(sums, ref_sums, rtol=1e-9, atol=1e-12)
    assert kernels.ordered_sums(phi, backend=backend)[1] is None


def test_backends_agree():
    rng = np.random.default_rng(0)
    phi, dphi = rng.normal(size=(4, 40)), rng.normal(size=(4, 40))
    results = {b: [kernels.contact_sum(phi, dphi, k, backend=b) for k in range(3)] for b in BACKENDS}
    ref = results["python"]
    for values in results.values():
        np.testing.assert_allclose(values, ref, rtol=1e-12)


def test_increasing_tuples_complete():
    tuples = np.concatenate(list(increasing_tuples(9, 4, chunk=17)))
    assert len(tuples) == math.comb(9, 4)
    assert sorted(map(tuple, tuples)) == list(combinations(range(9), 4))


def test_backend_selection():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_bond_out_of_range():
    phi = np.ones((3, 10))
    for backend in BACKENDS:
        with pytest.raises(ValueError):
            kernels.contact_sum(phi, phi, 2, backend=backend)
