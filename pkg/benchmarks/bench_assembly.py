"""Compare the compiled and numpy assembly kernels on annulus meshes.

Usage: python3 benchmarks/bench_assembly.py [--repeat N] [--sizes h1,h2,...]
"""
import argparse
import time

import numpy as np

from green_imcf.fem import _assembly_py, annulus_mesh

try:
    from green_imcf.fem import _assembly as _assembly_c
except ImportError:
    _assembly_c = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="0.05,0.02,0.01")
    ap.add_argument("--p", type=float, default=1.5)
    ap.add_argument("--eps", type=float, default=1e-3)
    args = ap.parse_args()
    if _assembly_c is None:
        print("compiled kernel not available; build with `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'h':>6} {'triangles':>10} {'mode':>8} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8} {'max diff':>9}")
    for h in (float(x) for x in args.sizes.split(",")):
        m = annulus_mesh(1.0, 2.0, h)
        u = rng.random(m.nv)
        for mode, flags in (("energy", (False, False)), ("grad", (True, False)), ("hessian", (True, True))):
            call = lambda mod: mod.assemble(m.triangles, m.area, m.grads, u, args.p, args.eps, *flags)
            tp = best_of(lambda: call(_assembly_py), args.repeat)
            if _assembly_c is None:
                print(f"{h:6.3f} {m.nt:10d} {mode:>8} {1e3 * tp:11.2f} {'-':>12} {'-':>8} {'-':>9}")
                continue
            tc = best_of(lambda: call(_assembly_c), args.repeat)
            a, b = call(_assembly_py), call(_assembly_c)
            diff = abs(a[0] - b[0]) / abs(a[0])
            for x, y in zip(a[1:], b[1:]):
                if x is not None:
                    diff = max(diff, float(np.max(np.abs(x - y))))
            print(f"{h:6.3f} {m.nt:10d} {mode:>8} {1e3 * tp:11.2f} {1e3 * tc:12.2f} {tp / tc:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
