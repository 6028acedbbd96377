"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from oscdfs import _pykernels
from oscdfs.bath import SystemParams
from oscdfs.fock import FockSpace
from oscdfs.propagator import build_general2_liouvillian, rk4_step_matrix, single_excitation_state

try:
    from oscdfs import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases():
    h = 1e-3
    t = np.arange(5000) * h
    kernel = np.exp((0.2j - 0.5) * t)
    yield "volterra n=5000", "volterra_trapezoid", (kernel, h)

    for cutoff, nsteps in ((1, 100000), (3, 20000)):
        space = FockSpace(2, cutoff)
        L = build_general2_liouvillian(space, SystemParams(omega1=1.0, omega2=1.2, k1=0.5, k2=0.8, k3=0.4))
        step = rk4_step_matrix(L.matrix, 1e-3)
        rho0 = single_excitation_state(space, 0.3, 0.1).matrix.ravel().copy()
        yield f"rk4 dim={space.dim} steps={nsteps}", "rk4_linear", (step, rho0, nsteps, 10, space.dim)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    print(f"{'case':<28} {'numpy [s]':>10} {'cython [s]':>11} {'speedup':>8}")
    for label, name, call_args in cases():
        py = best_of(lambda: getattr(_pykernels, name)(*call_args), args.repeat)
        if _ckernels is None:
            print(f"{label:<28} {py:>10.4f} {'n/a':>11} {'n/a':>8}")
            continue
        cy = best_of(lambda: getattr(_ckernels, name)(*call_args), args.repeat)
        print(f"{label:<28} {py:>10.4f} {cy:>11.4f} {py / cy:>7.1f}x")


if __name__ == "__main__":
    main()
