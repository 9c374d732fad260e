"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``QHJ_PURE_PYTHON=1`` to force the fallback.  States outside the
closed-form catalog always run on the Python kernel because their basis
functions are Python callables.
"""

from __future__ import annotations

import os

from . import _engine
from ._engine import (DONE, EVENT, MAX_STEPS, MODE_ANGULAR, MODE_CLASSICAL, MODE_SPATIAL, MODE_TIME, N_PARAMS,
                      NONFINITE, STALL)

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

__all__ = ["integrate", "available_backends", "default_backend", "DONE", "EVENT", "STALL", "MAX_STEPS",
           "NONFINITE", "MODE_TIME", "MODE_SPATIAL", "MODE_ANGULAR", "MODE_CLASSICAL", "N_PARAMS"]


def available_backends() -> tuple:
    return ("compiled", "python") if _ckernel is not None else ("python",)


def default_backend() -> str:
    if _ckernel is None or os.environ.get("QHJ_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
        return "python"
    return "compiled"


def integrate(mode, params, x0, y0, x_end, rtol, atol, h0, hmax, max_steps, ev_idx, ev_val, ev_dir, refine_tol,
              radial_fn=None, polar_fn=None, dvdr=None, backend=None):
    """Dispatch one integration segment to the selected kernel."""
    backend = backend or default_backend()
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    needs_python = radial_fn is not None or polar_fn is not None or dvdr is not None
    if backend == "compiled" and _ckernel is not None and not needs_python:
        return _ckernel.integrate(int(mode), params, float(x0), y0, float(x_end), float(rtol), float(atol),
                                  float(h0), float(hmax), int(max_steps), ev_idx, ev_val, ev_dir,
                                  float(refine_tol))
    if backend == "compiled" and _ckernel is None:
        raise RuntimeError("compiled kernel requested but the extension is not built")
    return _engine.integrate(mode, params, x0, y0, x_end, rtol, atol, h0, hmax, max_steps, ev_idx, ev_val, ev_dir,
                             refine_tol, radial_fn, polar_fn, dvdr)
