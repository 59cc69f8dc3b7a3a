"""Compare the compiled and pure-Python scan kernels.

    python benchmarks/bench_scan.py [--docs 200000] [--repeat 3]

Reports posts/s and tokens/s for each backend, the cost of tokenizing raw
text, and how scan time scales with document length and lexicon size.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cdscan import _scan_py
from cdscan.lexicon import load_lexicon
from cdscan.matcher import build_index
from cdscan.synth import random_token_docs
from cdscan.textnorm import normalize

try:
    from cdscan import _scan
except ImportError:
    _scan = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_time(kernel, index, docs, repeat):
    args = (index.vocab, index.delta, index.out_start, index.out_ids, index.n_patterns)
    return best_of(lambda: kernel(docs, *args), repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    lex = load_lexicon()
    index = build_index(lex)
    rng = np.random.default_rng(args.seed)
    docs = random_token_docs(rng, args.docs, mean_tokens=20, schemata=lex)
    n_tok = sum(map(len, docs))
    print(f"{args.docs} docs, {n_tok} tokens, {index.n_patterns} patterns, {index.n_states} states")

    kernels = [("python", _scan_py.scan_lists)]
    if _scan is not None:
        kernels.insert(0, ("cython", _scan.scan_lists))
    else:
        print("compiled extension not built; python only")
    base = None
    for name, k in kernels:
        dt = kernel_time(k, index, docs, args.repeat)
        base = base or dt
        print(f"  {name:7s} {dt:7.3f} s  {args.docs / dt / 1e6:6.2f} M posts/s  "
              f"{n_tok / dt / 1e6:6.1f} M tokens/s  ({dt / base:.1f}x)")

    sample = [" ".join(d) for d in docs[:20000]]
    dt = best_of(lambda: [normalize(t) for t in sample], 1)
    print(f"  tokenize {len(sample) / dt / 1e3:.0f} k posts/s (raw text to tokens)")

    kernel = kernels[0][1]
    print("scaling with mean document length (tokens/s should stay flat):")
    for mean in (5, 20, 80):
        d = random_token_docs(rng, 50_000, mean_tokens=mean, schemata=lex)
        dt = kernel_time(kernel, index, d, args.repeat)
        print(f"  mean {mean:3d}: {sum(map(len, d)) / dt / 1e6:6.1f} M tokens/s")
    print("scaling with lexicon size (time should not grow with |C|):")
    for n in (10, 60, 241):
        sub = build_index(lex[:n])
        dt = kernel_time(kernel, sub, docs, args.repeat)
        print(f"  {n:3d} schemata: {dt:6.3f} s")


if __name__ == "__main__":
    main()
