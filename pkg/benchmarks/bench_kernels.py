"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--size N] [--repeat R]

Both backends are imported side by side through ``kernels.IMPLEMENTATIONS``,
so one process times both regardless of ``MGPBOOT_BACKEND``. The first numba
call (compilation or cache load) is excluded from the timings.
"""

import argparse
import time

import numpy as np

from mgpboot import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--size", type=int, default=300_000)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--nu", type=float, default=2.5)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    t = rng.standard_t(args.nu, args.size)
    # mostly upper-tail probabilities, like the back-transform sees
    p = np.exp(-rng.exponential(3.0, args.size)).clip(1e-300, 1 - 1e-12)
    x = rng.random(args.size)
    cases = {
        "t_sf": lambda impl: impl["t_sf"](t, args.nu),
        "t_isf": lambda impl: impl["t_isf"](p, args.nu),
        "betainc": lambda impl: impl["betainc"](1.25, 0.5, x),
    }

    backends = sorted(kernels.IMPLEMENTATIONS)
    print(f"elements per call: {args.size}, best of {args.repeat}, active backend: {kernels.BACKEND}")
    print(f"{'kernel':<10}" + "".join(f"{b + ' (us/elt)':>20}" for b in backends) + f"{'speedup':>10}")
    for name, call in cases.items():
        per = {}
        outs = {}
        for b in backends:
            impl = kernels.IMPLEMENTATIONS[b]
            outs[b] = call(impl)  # warm-up
            per[b] = best_of(lambda: call(impl), args.repeat) / args.size * 1e6
        line = f"{name:<10}" + "".join(f"{per[b]:>20.3f}" for b in backends)
        if len(backends) == 2:
            line += f"{per['numpy'] / per['numba']:>9.1f}x"
            diff = np.nanmax(np.abs(outs["numba"] - outs["numpy"]) / np.maximum(np.abs(outs["numpy"]), 1e-300))
            line += f"   max rel diff {diff:.1e}"
        print(line)


if __name__ == "__main__":
    main()
