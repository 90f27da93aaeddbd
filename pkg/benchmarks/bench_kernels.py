#!/usr/bin/env python3
"""Benchmark the pure-numpy kernels against the compiled extension.

Workload mirrors a training update: a block-diagonal batch of small
intersection graphs pushed through the dense and graph-attention kernels,
forward and backward. Usage:

    python3 benchmarks/bench_kernels.py [--repeats 50] [--batch 32] [--agents 4]
"""

import argparse
import time

import numpy as np

from gridlight.agent import tile_csr
from gridlight.nn import model as M
from gridlight.nn.backends import available, get_backend


def build_workload(batch, agents, hidden, heads, rng):
    # chain-of-agents graph replicated block-diagonally across the batch
    nbrs = [[i] + [j for j in (i - 1, i + 1) if 0 <= j < agents] for i in range(agents)]
    ptr, idx = M.csr_neighborhoods(nbrs)
    bptr, bidx = tile_csr(ptr, idx, batch)
    n = batch * agents
    return {
        "X16": np.ascontiguousarray(rng.normal(size=(n, 16))),
        "H": np.ascontiguousarray(rng.normal(size=(n, hidden))),
        "embed.W": np.ascontiguousarray(rng.normal(size=(hidden, 16))),
        "embed.b": np.ascontiguousarray(rng.normal(size=hidden)),
        "Wt": np.ascontiguousarray(rng.normal(size=(heads, hidden, hidden))),
        "Ws": np.ascontiguousarray(rng.normal(size=(heads, hidden, hidden))),
        "Wv": np.ascontiguousarray(rng.normal(size=(heads, hidden, hidden))),
        "gH": np.ascontiguousarray(rng.normal(size=(n, hidden))),
        "ptr": bptr,
        "idx": bidx,
    }


def bench(fn, repeats):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--agents", type=int, default=4)
    parser.add_argument("--hidden", type=int, default=20)
    parser.add_argument("--heads", type=int, default=5)
    args = parser.parse_args()

    w = build_workload(args.batch, args.agents, args.hidden, args.heads,
                       np.random.default_rng(0))
    backends = available()
    print(f"backends: {', '.join(backends)}")
    print(f"workload: batch={args.batch} agents={args.agents} "
          f"hidden={args.hidden} heads={args.heads}")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")

    cases = {
        "dense fwd": lambda be: be.dense_forward(w["X16"], w["embed.W"], w["embed.b"]),
        "dense bwd": lambda be: be.dense_backward(w["X16"], w["embed.W"], w["gH"][:, : w['embed.W'].shape[0]]),
        "gat fwd": lambda be: be.gat_forward(w["H"], w["Wt"], w["Ws"], w["Wv"], w["ptr"], w["idx"]),
    }

    def gat_bwd(be):
        _, attn, T, U, V = be.gat_forward(w["H"], w["Wt"], w["Ws"], w["Wv"], w["ptr"], w["idx"])
        return be.gat_backward(w["H"], w["Wt"], w["Ws"], w["Wv"], w["ptr"], w["idx"],
                               attn, T, U, V, w["gH"])

    cases["gat fwd+bwd"] = gat_bwd

    for label, call in cases.items():
        times = [bench(lambda be=get_backend(n): call(be), args.repeats) for n in backends]
        row = f"{label:<16}" + "".join(f"{t * 1e6:>10.0f}us" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
