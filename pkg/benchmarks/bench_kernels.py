#!/usr/bin/env python3
"""Time the compiled kernels against the pure-Python fallback.

Both backends get identical inputs; the script checks that their outputs
agree before printing timings. Run after ``pip install -e .`` so the
compiled module exists.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from qbin import _kernels
from qbin._kernels import _pure

try:
    from qbin._kernels import _fast
except ImportError:  # build skipped
    _fast = None


def scan_case(rows: int, tokens: int, seed: int):
    rng = np.random.default_rng(seed)
    tags = rng.integers(0, 2**63, size=rows, dtype=np.uint64)
    toks = np.unique(np.concatenate([rng.choice(tags, tokens // 2), rng.integers(0, 2**63, tokens // 2, dtype=np.uint64)]))
    return tags, toks


def enum_case(side: int, k: int):
    """A square base-shaped universe with every assignment allowed."""
    allowed = np.ones((side, side + 1), dtype=np.uint8)
    x = int(np.sqrt(side))
    while side % x:
        x -= 1
    y = side // x
    ref_bin = np.arange(side) % x
    val_bin = np.arange(side) % y
    return allowed, k, 1, ref_bin, val_bin, True, np.bincount(ref_bin), np.bincount(val_bin)


def best_of(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--tokens", type=int, default=2_000)
    ap.add_argument("--side", type=int, default=8, help="refs and values in the enumeration case")
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    if _fast is None:
        print("compiled backend not built; nothing to compare", file=sys.stderr)
        return 1

    tags, toks = scan_case(args.rows, args.tokens, 0)
    case = enum_case(args.side, args.k)
    if not np.array_equal(_pure.scan_match(tags, toks), _fast.scan_match(tags, toks)):
        print("scan_match outputs differ", file=sys.stderr)
        return 2
    a, b = _pure.enumerate_assignments(*case), _fast.enumerate_assignments(*case)
    if a[1] != b[1] or any(not np.array_equal(a[i], b[i]) for i in (0, 2, 3)):
        print("enumerate_assignments outputs differ", file=sys.stderr)
        return 2

    results = []
    for name, fn_pure, fn_fast in (
        (f"scan_match rows={args.rows} tokens={toks.size}",
         lambda: _pure.scan_match(tags, toks), lambda: _fast.scan_match(tags, toks)),
        (f"enumerate side={args.side} k={args.k}",
         lambda: _pure.enumerate_assignments(*case), lambda: _fast.enumerate_assignments(*case)),
    ):
        tp, tf = best_of(fn_pure, args.repeat), best_of(fn_fast, args.repeat)
        results.append({"case": name, "python_s": tp, "cython_s": tf, "speedup": tp / tf if tf else float("inf")})

    if args.json:
        print(json.dumps({"default_backend": _kernels.BACKEND, "results": results}, indent=2))
    else:
        print(f"default backend: {_kernels.BACKEND}")
        for r in results:
            print(f"{r['case']:<45} python {r['python_s']*1e3:9.2f} ms  cython {r['cython_s']*1e3:9.2f} ms  x{r['speedup']:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
