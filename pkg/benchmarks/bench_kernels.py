"""Compare the compiled and pure-Python Bessel kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from rtcyl import _pykernels

try:
    from rtcyl import _speedups
except ImportError:  # extension not built
    _speedups = None


def workloads(mod):
    xs = np.ascontiguousarray(np.linspace(0.0, 60.0, 2000))

    def scalar_eval():
        for m in (0, 1, 5, 20):
            for x in xs[::4]:
                mod.jn(m, x)

    def array_eval():
        for m in (0, 1, 5, 20):
            mod.jn_array(m, xs)

    def zero_bisection():
        for m, a, b in ((1, 1.5, 2.2), (2, 2.8, 3.3), (0, 3.5, 4.2), (10, 11.5, 12.5), (20, 22.0, 23.0)):
            mod.bisect_jprime(m, a, b, 1e-12, 200)

    return {"scalar J_m (2000 calls)": scalar_eval, "array J_m (8000 points)": array_eval, "j'_m,k bisection (5 zeros)": zero_bisection}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = {"python": _pykernels}
    if _speedups is not None:
        backends["cython"] = _speedups
    times = {}
    for name, mod in backends.items():
        for label, fn in workloads(mod).items():
            times[(name, label)] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    labels = list(workloads(_pykernels))
    print(f"{'workload':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label in labels:
        py = times[("python", label)] * 1e3
        if _speedups is None:
            print(f"{label:28s} {py:12.3f} {'n/a':>12s} {'n/a':>8s}")
            continue
        cy = times[("cython", label)] * 1e3
        print(f"{label:28s} {py:12.3f} {cy:12.3f} {py / cy:8.1f}x")


if __name__ == "__main__":
    main()
