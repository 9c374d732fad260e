"""Compare the compiled kernel with the pure-Python fallback.

Run with ``python benchmarks/bench_core.py [--repeat N]``.  For each catalog
state one time-domain trajectory (two radial periods) and one classical
orbit are integrated on both backends; the table lists wall time per run,
the speed-up and the difference between the first event times of the two
backends.  Event bisection stops at ``event_refine_tol``, so the backends
agree on events to about that level; later samples drift apart slowly
because the motion amplifies the offset near turning points.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from qhj import (CATALOG_STATES, ClassicalParams, HiddenVariables, IntegratorConfig, TrajectoryState,
                 classical_orbit, integrate_time_trajectory)
from qhj.core import available_backends
from qhj.quantum_dynamics import zone_roots

HIDDEN = HiddenVariables(1.3, -0.4, 0.7, 0.3, -1.1, 0.5)


def _time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    base = IntegratorConfig(t_end=1e4, radial_periods=2)
    for st in CATALOG_STATES:
        r1, r2 = zone_roots(st)
        init = TrajectoryState(r=0.5 * (r1 + r2) if r1 else 1.0)
        yield f"time {st.label}", lambda cfg, st=st, init=init: integrate_time_trajectory(st, HIDDEN, init, cfg), base
    p = ClassicalParams.figure1()
    yield "classical fig1", lambda cfg: classical_orbit(p, None, cfg), replace(base, radial_periods=5)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if "compiled" not in available_backends():
        print("compiled kernel not built; only the Python backend is available")
        return 1
    print(f"{'case':<18}{'samples':>9}{'compiled [s]':>14}{'python [s]':>12}{'speed-up':>10}{'d t_event':>12}")
    for name, fn, cfg in cases():
        tc, a = _time(lambda: fn(replace(cfg, backend="compiled")), args.repeat)
        tp, b = _time(lambda: fn(replace(cfg, backend="python")), max(1, args.repeat // 3))
        diff = abs(a.events[0].t - b.events[0].t) if a.events and b.events else float("nan")
        print(f"{name:<18}{len(a.t):>9}{tc:>14.4f}{tp:>12.4f}{tp / tc:>10.1f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
