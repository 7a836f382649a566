"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--size 250] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from masksplitter import _pykernels

try:
    from masksplitter import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def workloads(size, rng):
    mask = (rng.random((size, size)) < 0.45).astype(np.uint8)
    a = rng.integers(0, 40, (size, size)).astype(np.int32)
    b = rng.integers(0, 30, (size, size)).astype(np.int32)
    x = rng.normal(size=(2, size, size))
    k = rng.normal(size=(2, 3, 3))
    g = rng.normal(size=(size, size))
    return {
        "label_components(8)": lambda impl: impl.label_components(mask, 8),
        "overlap_counts": lambda impl: impl.overlap_counts(a, b, 39, 29),
        "conv3x3": lambda impl: impl.conv3x3(x, k, 0.1),
        "conv3x3_backward": lambda impl: impl.conv3x3_backward(x, k, g),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=250)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled extension not built; timing the Python backend only")

    jobs = workloads(args.size, np.random.default_rng(0))
    print(f"{args.size}x{args.size}, best of {args.repeat}, milliseconds")
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name, _ in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, job in jobs.items():
        times = [min(timeit.repeat(lambda: job(impl), number=1, repeat=args.repeat)) * 1e3 for _, impl in backends]
        row = f"{label:<22}" + "".join(f"{t:12.3f}" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
