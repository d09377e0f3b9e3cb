"""Compare the compiled and numpy backends on the ordered-sector sums.

Usage: python3 benchmarks/bench_kernels.py [--points 200] [--norm-points 80] [--repeat 3]
"""

import argparse
import time

import numpy as np

from spintransistor import kernels
from spintransistor.atommap import TrapSpec, _stride_for, _subgrid, solve_schrodinger_1d


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        value = fn()
        times.append(time.perf_counter() - start)
    return min(times), value


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=200, help="grid points per axis, contact sums")
    parser.add_argument("--norm-points", type=int, default=80, help="grid points per axis, ordered sums")
    parser.add_argument("--particles", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    spectrum = solve_schrodinger_1d(TrapSpec(), args.particles)
    n = args.particles
    m = len(spectrum.x)
    cut = _subgrid(m, _stride_for(m, args.points))
    phi = np.ascontiguousarray(spectrum.orbitals[:n, cut])
    dphi = np.ascontiguousarray(spectrum.derivatives()[:n, cut])
    ncut = _subgrid(m, _stride_for(m, args.norm_points))
    nphi = np.ascontiguousarray(spectrum.orbitals[:n, ncut])
    field = np.ascontiguousarray(np.cos(spectrum.x[ncut]))
    print(f"N = {n}; {phi.shape[1]} points per axis for contact sums, "
          f"{nphi.shape[1]} for ordered sums; best of {args.repeat}")
    print(f"{'backend':<8} {'contact_sum':>12} {'ordered_sums':>13}")

    results = {}
    for backend in kernels.available_backends():
        t_contact, contacts = best_of(
            lambda: [kernels.contact_sum(phi, dphi, b, backend=backend) for b in range(n - 1)],
            args.repeat,
        )
        t_ordered, ordered = best_of(lambda: kernels.ordered_sums(nphi, field, backend=backend), args.repeat)
        results[backend] = (t_contact, t_ordered, contacts, ordered)
        print(f"{backend:<8} {t_contact:>11.3f}s {t_ordered:>12.3f}s")

    if "cython" in results:
        py, cy = results["python"], results["cython"]
        print(f"speedup  {py[0] / cy[0]:>11.1f}x {py[1] / cy[1]:>12.1f}x")
        diff = max(
            np.max(np.abs(np.subtract(py[2], cy[2])) / np.abs(py[2])),
            abs(py[3][0] - cy[3][0]) / abs(py[3][0]),
        )
        print(f"max relative difference between backends: {diff:.1e}")
    else:
        print("compiled backend not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
