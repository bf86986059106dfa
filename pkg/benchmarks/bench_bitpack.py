"""Benchmark the compiled bit-packing kernel against the NumPy fallback.

Usage:
    python3 benchmarks/bench_bitpack.py [--elements N] [--repeats R]

Prints pack/unpack throughput (million elements per second) for both
implementations at several bit-widths, plus the speedup ratio, after
verifying the two kernels produce identical bytes.
"""

import argparse
import time

import numpy as np

from dsquant import _bitpack_py
from dsquant.quantizer import USING_NATIVE_KERNEL, max_code

try:
    from dsquant import _bitpack as native
except ImportError:
    native = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench(kernel, offsets, bits, repeats):
    payload = kernel.pack_offsets(offsets, bits)
    pack_s = _time(lambda: kernel.pack_offsets(offsets, bits), repeats)
    unpack_s = _time(lambda: kernel.unpack_offsets(payload, offsets.size, bits),
                     repeats)
    return payload, pack_s, unpack_s


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--elements", type=int, default=1_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"native kernel available: {native is not None}")
    print(f"library default at import: "
          f"{'native' if USING_NATIVE_KERNEL else 'numpy fallback'}")
    print(f"{args.elements:,} elements, best of {args.repeats} runs\n")
    columns = ["bits", "numpy pack", "numpy unpack", "native pack",
               "native unpack", "pack speedup", "unpack speedup"]
    header = "  ".join(f"{c:>14}" for c in columns)
    print(header)
    print("-" * len(header))

    rng = np.random.default_rng(0)
    for bits in (2, 4, 8, 12, 16):
        offsets = rng.integers(0, 2 * max_code(bits) + 1,
                               size=args.elements).astype(np.uint32)
        mps = args.elements / 1e6
        py_payload, py_pack, py_unpack = bench(_bitpack_py, offsets, bits,
                                               args.repeats)
        cells = [f"{bits}", f"{mps / py_pack:.1f}me/s",
                 f"{mps / py_unpack:.1f}me/s"]
        if native is not None:
            na_payload, na_pack, na_unpack = bench(native, offsets, bits,
                                                   args.repeats)
            assert bytes(na_payload) == bytes(py_payload), "kernel mismatch"
            cells += [f"{mps / na_pack:.1f}me/s", f"{mps / na_unpack:.1f}me/s",
                      f"{py_pack / na_pack:.1f}x", f"{py_unpack / na_unpack:.1f}x"]
        print("  ".join(f"{c:>14}" for c in cells))


if __name__ == "__main__":
    main()
