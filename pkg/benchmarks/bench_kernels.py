"""Compare the compiled and pure-Python Gram-Schmidt kernels.

Times the raw kernel on random candidate blocks and two end-to-end calls
that lean on it (closure generation and the minimal sufficient algebra),
checking that both backends produce subspaces of the same dimension.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import time

import numpy as np

from qsuff import kernels
from qsuff.algebra import generate_star
from qsuff.model import restrict_to_HS
from qsuff.randmodels import random_hermitian, random_model
from qsuff.sufficiency import minimal_sufficient_star


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def raw_kernel_case(n, rows, seed):
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(rows, n))
    # repeated directions exercise the rejection path
    C[rows // 2:] = C[:rows - rows // 2]

    def run():
        Q = np.zeros((n, n))
        return kernels.gs_extend(Q, 0, C, 1e-10)
    return run


def closure_case(d, seed):
    rng = np.random.default_rng(seed)
    gens = [np.kron(np.eye(2), random_hermitian(d // 2, rng)), random_hermitian(d, rng)]
    return lambda: generate_star(gens).dim


def minsuff_case(d, seed):
    m = restrict_to_HS(random_model(d, np.random.default_rng(seed)))
    return lambda: minimal_sufficient_star(m).dim


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5, help="timing repeats, best is kept")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    cases = [(f"gs_extend n={n} rows={r}", raw_kernel_case(n, r, args.seed))
             for n, r in ((32, 64), (128, 512), (512, 2048))]
    cases += [(f"generate_star d={d}", closure_case(d, args.seed)) for d in (4, 6, 8)]
    cases += [(f"minimal_sufficient_star d={d}", minsuff_case(d, args.seed)) for d in (3, 5)]

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    if len(backends) < 2:
        print("compiled kernel not built; only the Python fallback can be timed")
    header = f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends)
    if "cython" in backends:
        header += f"{'speedup':>10s}"
    print(header)
    previous = kernels.BACKEND
    try:
        for name, fn in cases:
            times, results = {}, {}
            for b in backends:
                kernels.set_backend(b)
                times[b], results[b] = best_time(fn, args.repeat)
            if len(set(results.values())) != 1:
                raise SystemExit(f"{name}: backends disagree {results}")
            line = f"{name:34s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
            if "cython" in backends:
                line += f"{times['python'] / times['cython']:9.1f}x"
            print(line)
    finally:
        kernels.set_backend(previous)


if __name__ == "__main__":
    main()
