#!/usr/bin/env python3
"""Benchmark the pure-Python and compiled coder kernels on shared inputs.

Encodes and decodes the same corpora with every available backend, checks
that the emitted streams are byte-identical, and reports throughput.

Usage:
    python benchmarks/bench_coder.py [--symbols 20000] [--repeats 3]
"""

import argparse
import time

import numpy as np

from preqcode._kernels import available_backends


def make_corpora(n_symbols: int, seed: int):
    rng = np.random.default_rng(seed)
    return [
        ("bernoulli(0.3)", 0, 0, 0.5, rng.binomial(1, 0.3, n_symbols).astype(np.int64)),
        ("poisson(4)", 1, 0, 1.0, rng.poisson(4.0, n_symbols).astype(np.int64)),
        ("geometric(2.5)", 2, 0, 1.0, (rng.geometric(1 / 3.5, n_symbols) - 1).astype(np.int64)),
        ("binomial(8, 3)", 3, 8, 4.0, rng.binomial(8, 0.375, n_symbols).astype(np.int64)),
    ]


def bench(backend, fam, m, x0, seq, repeats, precision, tail_exp):
    best_enc = best_dec = float("inf")
    payload = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        payload, bits = backend.encode_symbols(fam, m, x0, 1.0, precision, tail_exp, seq)
        t1 = time.perf_counter()
        out = backend.decode_symbols(fam, m, x0, 1.0, precision, tail_exp, len(seq), payload)
        t2 = time.perf_counter()
        best_enc = min(best_enc, t1 - t0)
        best_dec = min(best_dec, t2 - t1)
        assert list(out) == list(seq), "round-trip mismatch"
    return payload, bits, best_enc, best_dec


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--symbols", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--precision", type=int, default=32)
    ap.add_argument("--tail-exp", type=int, default=32)
    ap.add_argument("--seed", type=int, default=20240101)
    args = ap.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}   symbols per corpus: {args.symbols}")
    header = f"{'corpus':<16} {'backend':<9} {'enc Msym/s':>11} {'dec Msym/s':>11} {'bits/sym':>9}"
    print(header)
    print("-" * len(header))

    for label, fam, m, x0, seq in make_corpora(args.symbols, args.seed):
        streams = {}
        for name, backend in backends.items():
            payload, bits, enc_t, dec_t = bench(
                backend, fam, m, x0, seq, args.repeats, args.precision, args.tail_exp
            )
            streams[name] = payload
            print(
                f"{label:<16} {name:<9} {len(seq)/enc_t/1e6:>11.3f} "
                f"{len(seq)/dec_t/1e6:>11.3f} {bits/len(seq):>9.3f}"
            )
        if len(set(streams.values())) != 1:
            print(f"!! backends disagree on {label}")
            return 1
        print(f"{'':<16} streams byte-identical across backends")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
