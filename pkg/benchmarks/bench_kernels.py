"""Compare the compiled MPFR kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--prec 256] [--gamma 0.5,1,2] [--repeat 5]

Each row is the best-of-repeat time per call in microseconds for both
backends, plus the speed-up.  Results of the two backends are also checked
to be bit-identical.
"""

import argparse
import time

from mpgame.kernels import available_backends
from mpgame.numerics import hp, precision


def _cases(br, prec):
    with precision(prec):
        y = br.r1 + (1 - br.r1) * hp("0.37", prec)
    sigma = (3, 1, 7, 2)
    return {
        "left_inv": (lambda: br.left_inv(y), 200),
        "right_inv": (lambda: br.right_inv(y), 200),
        "extend_r(64)": (lambda: br.extend_r(br.r1, 64), 5),
        "pullback(3,1,7,2)": (lambda: br.pullback(sigma, y), 20),
        "chart_step(5)": (lambda: br.chart_step(5, y), 50),
        "forward(20)": (lambda: br.forward(br.phi(20, y), 20), 20),
    }


def _best(fn, n, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(n):
            fn()
        best = min(best, (time.perf_counter() - t0) / n)
    return best * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--prec", type=int, default=256)
    ap.add_argument("--gamma", default="0.5,1,2")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; only the Python kernels are available")
    print(f"{'gamma':>6} {'kernel':<18} {'python us':>10} {'compiled us':>12} {'speed-up':>9}")
    for g in args.gamma.split(","):
        gamma = hp(g, args.prec)
        impls = {name: cls(gamma, args.prec) for name, cls in backends.items()}
        py_cases = _cases(impls["python"], args.prec)
        c_cases = _cases(impls["compiled"], args.prec) if "compiled" in impls else {}
        for name, (fn, n) in py_cases.items():
            tp = _best(fn, n, args.repeat)
            if name in c_cases:
                cfn = c_cases[name][0]
                if fn() != cfn():
                    raise SystemExit(f"backends disagree on {name} at gamma={g}")
                tc = _best(cfn, n, args.repeat)
                print(f"{g:>6} {name:<18} {tp:10.2f} {tc:12.2f} {tp / tc:8.1f}x")
            else:
                print(f"{g:>6} {name:<18} {tp:10.2f} {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
