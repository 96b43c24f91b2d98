"""Compiled vs pure-Python frequency kernel.

    python3 benchmarks/bench_kernel.py [--repeat N]

Times one 60 s disturbance (with and without recording the trajectory) and
one full FFR sizing bisection on each backend, then checks that both
backends return the same nadir.
"""
import argparse
import statistics
import timeit

from hvdc_cba import _kernel_py, kernel
from hvdc_cba.frequency import Action, Disturbance, FrequencyModel, default_epc, default_ffr, nadir, simulate, size_action

try:
    from hvdc_cba import _kernel
except ImportError:
    _kernel = None

MODEL = FrequencyModel(120.0, 2400.0)
DIST = Disturbance(1450.0)


def use(backend):
    kernel.integrate = backend.integrate


def cases():
    return {
        "nadir": lambda: nadir(MODEL, DIST, default_ffr(150), default_epc(100)),
        "simulate": lambda: simulate(MODEL, DIST, default_ffr(150), default_epc(100)),
        "size ffr": lambda: size_action(MODEL, DIST, Action.FFR),
    }


def bench(fn, repeat):
    fn()
    return statistics.median(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timed runs per case (default 5)")
    args = ap.parse_args()

    backends = [("python", _kernel_py)]
    if _kernel is not None:
        backends.insert(0, ("cython", _kernel))
    else:
        print("compiled kernel not built; timing the Python fallback only")

    original = kernel.integrate
    rows, nadirs = {}, {}
    try:
        for name, mod in backends:
            use(mod)
            nadirs[name] = cases()["nadir"]()
            for case, fn in cases().items():
                rows.setdefault(case, {})[name] = bench(fn, args.repeat)
    finally:
        kernel.integrate = original

    names = [n for n, _ in backends]
    print(f"{'case':<18}" + "".join(f"{n + ' [s]':>14}" for n in names) + ("   speed-up" if len(names) == 2 else ""))
    for case, t in rows.items():
        line = f"{case:<18}" + "".join(f"{t[n]:>14.4f}" for n in names)
        if len(names) == 2:
            line += f"{t['python'] / t['cython']:>10.1f}x"
        print(line)
    if len(nadirs) == 2:
        print(f"nadir difference between backends: {abs(nadirs['cython'] - nadirs['python']):.2e} Hz")


if __name__ == "__main__":
    main()
