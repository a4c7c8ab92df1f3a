#!/usr/bin/env python3
"""Benchmark the pure-Python vs native monotonic-alignment-search backends.

Usage: python3 benchmarks/bench_mas.py [--repeats 5] [--seed 0]
"""

import argparse
import time

import numpy as np

from styletts import masbackend

SIZES = [(8, 64), (16, 128), (32, 256), (64, 512), (128, 1024)]


def bench(backend, matrices, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for m in matrices:
            backend.search(m)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--batch", type=int, default=16,
                        help="matrices per size bucket")
    args = parser.parse_args()

    reference = masbackend.ReferenceBackend()
    lib = masbackend.find_native_library()
    native = masbackend.NativeBackend(lib) if lib else None
    if native is None:
        print("native kernel not built; run "
              "`cargo build --release` in mas-kernel/ first")

    rng = np.random.default_rng(args.seed)
    print(f"{'size':>12} {'reference':>12} {'native':>12} {'speedup':>9}")
    for n, t in SIZES:
        matrices = [rng.normal(size=(n, t)).astype(np.float32)
                    for _ in range(args.batch)]
        t_ref = bench(reference, matrices, args.repeats)
        row = f"{f'{n}x{t}':>12} {t_ref * 1e3:>10.2f}ms"
        if native:
            for a, b in zip((native.search(m) for m in matrices),
                            (reference.search(m) for m in matrices)):
                assert np.array_equal(a, b), "backend mismatch"
            t_nat = bench(native, matrices, args.repeats)
            row += f" {t_nat * 1e3:>10.2f}ms {t_ref / t_nat:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
