"""Time the numba kernels against their numpy fallbacks and check they agree.

    python3 benchmarks/bench_kernels.py [--eps 1/32] [--walks 2000] [--points 200000]
"""
import argparse
import time
from fractions import Fraction

import numpy as np

from ortholap import _accel, mollify, network, odmap, walk


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_walks(m, net, n, repeat):
    start = net.local(walk.nearest_primal(m, (0.0, 0.0)))
    stop = np.array(net.is_boundary)

    def run():
        return walk.simulate(net, np.full(n, start), 7, np.arange(n), stop)

    rows = {}
    for name in ("numba", "numpy"):
        if name == "numba" and not _accel.HAVE_NUMBA:
            continue
        with _accel.backend(name):
            run()  # compile / warm caches
            rows[name] = best_of(run, repeat)
    return rows


def bench_locate(ext, n, repeat):
    rng = np.random.default_rng(0)
    r = 0.95 * np.sqrt(rng.random(n))
    t = 2 * np.pi * rng.random(n)
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    rows = {}
    for name in ("numba", "numpy"):
        if name == "numba" and not _accel.HAVE_NUMBA:
            continue
        with _accel.backend(name):
            ext(pts[:10])
            rows[name] = best_of(lambda: ext(pts), repeat)
    return rows


def report(label, rows, same):
    base = rows.get("numpy", (float("nan"),))[0]
    for name, (sec, _) in rows.items():
        print(f"{label:<16} {name:<6} {sec * 1e3:10.2f} ms   speedup x{base / sec:6.1f}")
    print(f"{label:<16} outputs identical across backends: {same}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", default="1/32")
    ap.add_argument("--walks", type=int, default=2000)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    eps = float(Fraction(args.eps))
    m = odmap.generate_square(odmap.Disk(0.0, 0.0, 1.0), eps)
    net = network.build_network(m, check=False)
    print(f"unit disk, square lattice, eps={args.eps}: {net.n} primal vertices")

    rows = bench_walks(m, net, args.walks, args.repeat)
    outs = [o for _, o in rows.values()]
    same = all(all(np.array_equal(a, b) for a, b in zip(outs[0], o)) for o in outs[1:])
    report(f"walks x{args.walks}", rows, same)

    h = network.solve_dirichlet(net, lambda p: p[:, 0] ** 2 - p[:, 1] ** 2)
    ext = mollify.extend(m, h)
    rows = bench_locate(ext, args.points, args.repeat)
    outs = [o for _, o in rows.values()]
    same = all(np.array_equal(outs[0], o, equal_nan=True) for o in outs[1:])
    report(f"locate x{args.points}", rows, same)


if __name__ == "__main__":
    main()
