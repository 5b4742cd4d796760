"""Compare the compiled core with the numpy fallback.

    python3 benchmarks/bench_backends.py [--repeat 3] [--quick]

Times the sampler on a few designs and the h_gamma cosine series, checks that
both backends return the same pattern for the same seed, and prints a table.
"""

import argparse
import time

import numpy as np

from dirichlet_dpp import _pycore
from dirichlet_dpp.sampler import _generator

try:
    from dirichlet_dpp import _core
except ImportError:  # extension not built
    _core = None


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_sampler(factors, repeat):
    f = np.asarray(factors, dtype=np.int_)
    N = int(np.prod(f))
    row = {"case": f"sample {tuple(factors)} N={N}"}
    results = {}
    for name, mod in (("compiled", _core), ("python", _pycore)):
        if mod is None:
            continue
        t, out = best_of(lambda: mod.sample_core(f, _generator(11), 1000 * N, 2 ** -0.5), repeat)
        row[name] = t
        results[name] = out[0]
    if len(results) == 2:
        row["agree"] = bool(np.array_equal(results["compiled"], results["python"]))
    return row


def bench_hgamma(points, J, repeat):
    t = np.random.default_rng(0).random(points) - 0.5
    w = 1.0 / (2 * np.pi * np.arange(1, J + 1) ** 0.75)
    row = {"case": f"h_gamma {points} pts J={J}"}
    vals = {}
    for name, mod in (("compiled", _core), ("python", _pycore)):
        if mod is None:
            continue
        row[name], vals[name] = best_of(lambda: mod.hgamma_sum(t, w), repeat)
    if len(vals) == 2:
        row["agree"] = bool(np.allclose(vals["compiled"], vals["python"], rtol=0, atol=1e-10))
    return row


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small cases only")
    args = ap.parse_args()
    designs = [(16,), (64,), (8, 8), (256,), (14, 14)]
    if not args.quick:
        designs.append((5, 5, 5, 2, 2, 2))
    rows = [bench_sampler(f, args.repeat) for f in designs]
    rows.append(bench_hgamma(256, 100_000 if not args.quick else 10_000, args.repeat))
    print(f"{'case':<34}{'compiled [s]':>14}{'python [s]':>12}{'speedup':>9}  agree")
    for r in rows:
        c, p = r.get("compiled"), r.get("python")
        sp = f"{p / c:8.1f}x" if c and p else "      n/a"
        cs = f"{c:14.4f}" if c is not None else f"{'n/a':>14}"
        print(f"{r['case']:<34}{cs}{p:12.4f}{sp}  {r.get('agree', '-')}")


if __name__ == "__main__":
    main()
