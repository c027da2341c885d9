"""Time the router emission kernels on the compiled and pure-Python backends.

    python3 benchmarks/bench_kernels.py --gen "linext:n=5" --M 20000 --steps 20
"""

import argparse
import json
import time

import numpy as np

from detwalk import _backend, routers
from detwalk.chains import parse_generator
from detwalk.routers import RouterBank, RouterKind


def time_backend(mod, P, kind, M, steps, repeats):
    """Best-of-``repeats`` seconds to serve ``steps`` rounds of M tokens spread uniformly."""
    chi = np.full(P.n, M // P.n, dtype=np.int64)
    chi[: M % P.n] += 1
    old, routers.kernels = routers.kernels, mod
    try:
        best, flows = np.inf, None
        for _ in range(repeats):
            bank = RouterBank(P, kind)
            t0 = time.perf_counter()
            out = [bank.emit(chi, 1) for _ in range(steps)]
            best = min(best, time.perf_counter() - t0)
            flows = np.concatenate(out)
    finally:
        routers.kernels = old
    return best, flows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gen", default="linext:n=5")
    ap.add_argument("--M", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args()

    P, _ = parse_generator(args.gen)
    backends = _backend.available()
    emissions = args.M * args.steps
    print(f"chain {args.gen}: N={P.n}, arcs={P.num_arcs}; {emissions} emissions per timing")
    print(f"{'router':9s}" + "".join(f"{name:>14s}" for name in backends) + f"{'speedup':>10s}  same")
    results = []
    for kind in RouterKind:
        row = {"router": kind.value}
        flows = {}
        for name, mod in backends.items():
            secs, flows[name] = time_backend(mod, P, kind, args.M, args.steps, args.repeats)
            row[name] = secs
        same = len({f.tobytes() for f in flows.values()}) == 1
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        row.update(speedup=speed, identical=same)
        results.append(row)
        print(f"{kind.value:9s}" + "".join(f"{row[n] * 1e3:12.1f}ms" for n in backends)
              + f"{speed:9.1f}x  {'yes' if same else 'NO'}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
