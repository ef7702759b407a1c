"""Compare the compiled and pure-Python solver kernels.

Usage::

    python benchmarks/bench_kernels.py [--size 16] [--repeat 3]

Times a full array scan and a batch of raw ``apply_switches`` calls with
each backend. The backend is swapped by rebinding the kernel functions on
``edramcap.kernels``, which is how the netlist solver looks them up.
"""

import argparse
import time

import numpy as np

from edramcap import kernels
from edramcap.calibration import build_abacus
from edramcap.converter import ConverterParams
from edramcap.diagnosis import scan_array
from edramcap.netlist import CellMatrix, apply_switches, build_macro_cell
from edramcap.protocol import build_schedule

NAMES = ("component_labels", "component_charge", "assemble")


def use(backend):
    for name in NAMES:
        setattr(kernels, name, getattr(backend, name))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=16, help="array is size x size")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    n = args.size
    params = ConverterParams()
    abacus = build_abacus(params)
    cells = CellMatrix.from_values(np.random.default_rng(0).normal(32, 5, (n, n)).clip(0))
    net = build_macro_cell(n, n, cells)
    phases = build_schedule((n, n), (n // 2, n // 2)).phases[:4]

    def scan():
        scan_array(cells, params, abacus)

    def solves():
        for _ in range(50):
            st = None
            for ph in phases:
                st = apply_switches(net, ph, st)

    backends = [("python", kernels.python_backend)]
    if kernels.compiled_backend is not None:
        backends.insert(0, ("cython", kernels.compiled_backend))
    else:
        print("compiled backend not available; timing the fallback only")

    rows = []
    for name, mod in backends:
        use(mod)
        rows.append((name, best_of(scan, args.repeat), best_of(solves, args.repeat)))
    use(kernels.compiled_backend or kernels.python_backend)

    print(f"{'backend':<8} {f'scan {n}x{n} (s)':>16} {'200 solves (s)':>16}")
    for name, t_scan, t_solve in rows:
        print(f"{name:<8} {t_scan:>16.3f} {t_solve:>16.3f}")
    if len(rows) == 2:
        print(f"speed-up: scan x{rows[1][1] / rows[0][1]:.2f}, solves x{rows[1][2] / rows[0][2]:.2f}")


if __name__ == "__main__":
    main()
