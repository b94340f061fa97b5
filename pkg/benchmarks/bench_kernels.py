"""Compare the compiled kernels with the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py [--grid 128] [--repeat 5]``. Each
kernel is timed on both backends with identical inputs; the script also
checks that the outputs agree (bit-identical for Philox, to rounding for
the factorization and triangular solves).
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np
import scipy.sparse as sp

from maternspde import _kernels_py
from maternspde.fem import assemble_mass, assemble_stiffness
from maternspde.mesh import rectangle

try:
    from maternspde import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _system(cells):
    mesh = rectangle(cells, cells)
    A = (assemble_mass(mesh) + assemble_stiffness(mesh, scale=0.01)).csr
    low = sp.tril(A, format="csr")
    low.sort_indices()
    return low.indptr.astype(np.int64), low.indices.astype(np.int64), low.data.copy()


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def run(cells: int, repeat: int) -> list[tuple[str, float, float | None]]:
    indptr, indices, data = _system(cells)
    n = len(indptr) - 1
    b = np.random.default_rng(0).standard_normal(n)
    lanes, blocks = 4 * cells * cells, 4

    cases = {
        "philox_lanes": lambda k: k.philox_lanes(12345, 7, lanes, blocks),
        "ic0_factor": lambda k: k.ic0_factor(indptr, indices, data),
    }
    L_ref, _ = _kernels_py.ic0_factor(indptr, indices, data)
    cases["lower_solve"] = lambda k: k.lower_solve(indptr, indices, L_ref, b)
    cases["upper_solve"] = lambda k: k.upper_solve(indptr, indices, L_ref, b)

    rows = []
    for name, call in cases.items():
        t_py = _best(lambda: call(_kernels_py), repeat)
        t_c = None
        if _kernels_c is not None:
            t_c = _best(lambda: call(_kernels_c), repeat)
            _check(name, call(_kernels_py), call(_kernels_c))
        rows.append((name, t_py, t_c))
    return rows


def _check(name, ref, got):
    if isinstance(ref, tuple):
        ref, got = ref[0], got[0]
    if name == "philox_lanes":
        ok = np.array_equal(ref, got)
    else:
        ok = np.allclose(ref, got, rtol=1e-12, atol=1e-14)
    if not ok:
        raise SystemExit(f"{name}: backends disagree")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", type=int, default=128, help="cells per side of the test grid")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rows = run(args.grid, args.repeat)
    print(f"grid {args.grid}x{args.grid}, best of {args.repeat}")
    print(f"{'kernel':<14}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, t_py, t_c in rows:
        if t_c is None:
            print(f"{name:<14}{1e3 * t_py:>14.3f}{'n/a':>14}{'n/a':>10}")
        else:
            print(f"{name:<14}{1e3 * t_py:>14.3f}{1e3 * t_c:>14.3f}{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
