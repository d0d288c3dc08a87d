"""Compare the compiled kernels with the NumPy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed on
both backends at a few sizes and the results are checked to agree; the
last section times a full denoising solve under each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ipdfp import kernels


def _time(fn, repeat=5, number=None):
    t = timeit.Timer(fn)
    if number is None:
        number, _ = t.autorange()
    return min(t.repeat(repeat, number)) / number, number


def bench_kernels(sizes):
    rng = np.random.default_rng(0)
    names = kernels.available_backends()
    print(f"backends: {', '.join(names)}")
    print(f"{'kernel':<16}{'n':>9}" + "".join(f"{b + ' (us)':>14}" for b in names) + f"{'ext speedup':>13}")
    for n in sizes:
        side = int(np.sqrt(n))
        u = rng.normal(size=n)
        a, b = rng.normal(size=n), rng.normal(size=n)
        y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        img = rng.normal(size=side * side)
        g = rng.normal(size=2 * side * side)
        cases = {
            "soft_threshold": lambda k: k.soft_threshold(u, 0.3),
            "group_shrink": lambda k: k.group_shrink(a, b, 0.3),
            "logistic_prox": lambda k: k.logistic_prox(u, 0.7, y, 0.25),
            "diff2d": lambda k: k.diff2d(img, side, side),
            "diff2d_adjoint": lambda k: k.diff2d_adjoint(g, side, side),
        }
        for name, call in cases.items():
            outs, times = [], []
            for bname in names:
                k = kernels.get_backend(bname)
                outs.append(call(k))
                times.append(_time(lambda: call(k))[0])
            _check_agree(name, outs)
            speed = times[-1] / times[0] if len(times) > 1 else float("nan")
            print(f"{name:<16}{n:>9}" + "".join(f"{1e6 * t:>14.1f}" for t in times) + f"{speed:>13.2f}")


def _check_agree(name, outs):
    ref = outs[0]
    for o in outs[1:]:
        for r, x in zip(ref if isinstance(ref, tuple) else (ref,), o if isinstance(o, tuple) else (o,)):
            if not np.allclose(r, x, rtol=1e-10, atol=1e-10):
                raise SystemExit(f"{name}: backends disagree")


SOLVE_SNIPPET = """
import time
from ipdfp import kernels, precond
from ipdfp.problems import build_l1tv, impulse_noise_image
from ipdfp.solver import SolveOptions, run, suggest_schedule
_, noisy = impulse_noise_image({side}, {side}, 0.2, 0)
p = build_l1tv(noisy, 10.0)
m = precond.build_diagonal(p.operators, s=1.0, zero_rows="unit")
t = time.perf_counter()
r = run(p, m, suggest_schedule(0.0), SolveOptions(max_iter={iters}, tol=1e-300))
dt = time.perf_counter() - t
print(kernels.BACKEND, r.iterations, dt, r.records[-1].objective)
"""


def bench_solve(side, iters):
    print(f"\ndenoising solve, {side}x{side} image, {iters} iterations")
    for bname in kernels.available_backends():
        env = dict(os.environ, IPDFP_KERNELS=bname)
        out = subprocess.run(
            [sys.executable, "-c", SOLVE_SNIPPET.format(side=side, iters=iters)],
            env=env, capture_output=True, text=True, check=True,
        ).stdout.split()
        print(f"  {out[0]:<8} {float(out[2]):8.3f} s  ({1e6 * float(out[2]) / int(out[1]):7.1f} us/iter)  objective {float(out[3]):.10g}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", default="256,4096,65536")
    ap.add_argument("--side", type=int, default=64)
    ap.add_argument("--iters", type=int, default=2000)
    args = ap.parse_args(argv)
    bench_kernels([int(s) for s in args.sizes.split(",")])
    bench_solve(args.side, args.iters)


if __name__ == "__main__":
    main()
