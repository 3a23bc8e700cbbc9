"""Compiled vs pure-numpy kernels: agreement and wall time.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import time

import numpy as np

from nlkg import _kernels_py
from nlkg.grid import make_grid
from nlkg.soliton import ModelParams
from nlkg.spectral import assemble_L, lambda_quadrature

try:
    from nlkg import _kernels
except ImportError:  # extension not built
    _kernels = None


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    g = make_grid(40.0, 2048)
    op = assemble_L("plus", ModelParams(7.0), g)
    _, (s, v1, v2) = op.outward_path
    lam, _ = lambda_quadrature(400.0)
    lam = lam[:256]
    y0 = np.tile([1.0, 0.0], (lam.size, 1))
    u = np.linspace(-2.0, 2.0, 1_000_000)
    return [
        ("magnus_sweep (256 x 2048)", lambda k: k.magnus_sweep(v1, v2, s, lam, y0, True, False)),
        ("power_nonlinearity (1e6, p=7)", lambda k: k.power_nonlinearity(u, 7.0)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the numpy kernels are available")
    print(f"{'kernel':32s} {'numpy [s]':>10s} {'compiled [s]':>13s} {'speedup':>8s} {'max diff':>10s}")
    for name, call in cases():
        tp, ref = _best(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:32s} {tp:10.4f} {'-':>13s} {'-':>8s} {'-':>10s}")
            continue
        tc, out = _best(lambda: call(_kernels), args.repeat)
        diff = float(np.max(np.abs(out - ref)) / max(1.0, np.max(np.abs(ref))))
        print(f"{name:32s} {tp:10.4f} {tc:13.4f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
