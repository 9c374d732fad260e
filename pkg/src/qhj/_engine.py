"""Pure-Python integration kernel (fallback for the compiled ``_ckernel``).

Dormand-Prince 5(4) with linear event functions ``y[idx] - value`` located by
bisection on the cubic Hermite interpolant.  The right-hand sides work in
regularizing coordinates: logit maps of r and theta on the intervals between
turning points and singular ends, so that exponential approaches to turning
points become linear drifts.  See ``quantum_dynamics`` for the driver.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expi as _expi

MODE_TIME, MODE_SPATIAL, MODE_ANGULAR, MODE_CLASSICAL = 0, 1, 2, 3
DONE, EVENT, STALL, MAX_STEPS, NONFINITE = 0, 1, 2, 3, 4

(P_E, P_LAM, P_MQ, P_RID, P_PID, P_AR, P_BR, P_SR, P_AT, P_BT, P_ST, P_R1, P_R2, P_RREG, P_RLO, P_RHI,
 P_PREG, P_TLO, P_THI, P_SLO, P_CLO, P_SHI, P_CHI, P_TSTAR, P_UBASE, P_RFIX) = range(26)
N_PARAMS = 26

_C = (0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


def _sig(u):
    if u >= 0.0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def _sinc(d):
    return math.sin(d) / d if d != 0.0 else 1.0


def radial_catalog(rid, r):
    if rid == 0:
        em, ep, ei = math.exp(-r), math.exp(r), float(_expi(2.0 * r))
        return r * em, (1.0 - r) * em, -ep + 2.0 * r * em * ei, ep + 2.0 * (1.0 - r) * em * ei
    em, ep, ei = math.exp(-0.5 * r), math.exp(0.5 * r), float(_expi(r))
    if rid == 1:
        v1 = (2.0 * r - r * r) * em
        d1 = (2.0 - 3.0 * r + 0.5 * r * r) * em
        return v1, d1, 0.5 * v1 * ei + 0.5 * (r - 1.0) * ep, 0.5 * d1 * ei + ep * (1.25 - 0.25 * r)
    v1 = r * r * em
    d1 = (2.0 * r - 0.5 * r * r) * em
    return (v1, d1, ep * (-1.0 / (3.0 * r) - 1.0 / 6.0 - r / 6.0) + v1 * ei / 6.0,
            ep * (1.0 / (3.0 * r * r) - 1.0 / (6.0 * r) - 0.25 + r / 12.0) + d1 * ei / 6.0)


def polar_catalog(pid, s, c, lg):
    sq = math.sqrt(s)
    if pid == 0:
        return sq, 0.5 * c / sq, sq * lg, 0.5 * c / sq * lg + 1.0 / sq
    if pid == 1:
        w = 1.0 + c + c * lg
        return sq * c, (0.5 * c * c - s * s) / sq, sq * w, (0.5 * c * w - s * s * (1.0 + lg) + c) / sq
    return (s * sq, 1.5 * sq * c, -c / (2.0 * sq) + 0.5 * s * sq * lg,
            sq + 0.25 * c * c / (s * sq) + 0.75 * sq * c * lg)


class QuantumRHS:
    """Right-hand sides of the quantum modes.

    ``radial_fn(r)`` and ``polar_fn(theta)`` return (s1, s1', s2, s2') and
    replace the catalog closed forms when the catalog ids are negative.
    """

    def __init__(self, mode, P, radial_fn=None, polar_fn=None):
        self.mode = mode
        self.P = [float(v) for v in P]
        self.radial_fn = radial_fn
        self.polar_fn = polar_fn

    def radial(self, u):
        """Return (r, u_dot * r^2) for the radial logit coordinate u."""
        P = self.P
        reg = int(P[P_RREG])
        E, r1, r2 = P[P_E], P[P_R1], P[P_R2]
        if reg == 1:
            e = math.exp(u)
            r = r2 + e
        else:
            lo, hi = P[P_RLO], P[P_RHI]
            w = hi - lo
            dl, dh = w * _sig(u), w * _sig(-u)
            r = lo + dl if dl <= dh else hi - dh
        rid = int(P[P_RID])
        if rid >= 0:
            s1, d1, s2, d2 = radial_catalog(rid, r)
        else:
            s1, d1, s2, d2 = self.radial_fn(r)
        y = P[P_AR] * s2 + P[P_BR] * s1
        zp = P[P_SR] * P[P_AR] / (s1 * s1 + y * y)
        if reg == 0:
            ud = -2.0 * E * (P[P_RHI] - P[P_RLO]) / zp
        elif reg == 1:
            ud = 2.0 * E * ((r2 - r1) + e) / zp
        else:
            ud = -2.0 * E * (-(r2 - r1) - dh) * r1 / (r * zp)
        return r, ud

    def polar(self, w):
        """Return (theta, sin, cos, L', w_dot * r^2, dtheta/dw)."""
        P = self.P
        lo, hi = P[P_TLO], P[P_THI]
        width = hi - lo
        dl, dh = width * _sig(w), width * _sig(-w)
        if dl <= dh:
            th = lo + dl
            cd, sd = math.cos(dl), math.sin(dl)
            s = P[P_SLO] * cd + P[P_CLO] * sd
            c = P[P_CLO] * cd - P[P_SLO] * sd
        else:
            th = hi - dh
            cd, sd = math.cos(dh), math.sin(dh)
            s = P[P_SHI] * cd - P[P_CHI] * sd
            c = P[P_CHI] * cd + P[P_SHI] * sd
        pid = int(P[P_PID])
        if pid >= 0:
            lg = math.log(s / (1.0 + c)) if c >= 0.0 else math.log((1.0 - c) / s)
            t1, e1, t2, e2 = polar_catalog(pid, s, c, lg)
        else:
            t1, e1, t2, e2 = self.polar_fn(th)
        y = P[P_AT] * t2 + P[P_BT] * t1
        lp = P[P_ST] * P[P_AT] / (t1 * t1 + y * y)
        lam, mq = P[P_LAM], P[P_MQ]
        reg = int(P[P_PREG])
        s2 = s * s
        if reg == 0:
            wd = (lam * s2 - mq) / s2 * width / (dl * dh * lp)
        elif reg == 1:
            wd = -lam * _sinc(dh) * math.sin(th + P[P_TSTAR]) * width / (dl * s2 * lp)
        elif reg == 2:
            wd = lam * _sinc(dl) * _sinc(dh) * width / (s2 * lp)
        else:
            wd = -lam * math.sin(th - P[P_TSTAR]) * _sinc(dl) * width / (dh * s2 * lp)
        return th, s, c, lp, wd, dl * dh / width

    def __call__(self, x, y):
        P = self.P
        mode = self.mode
        if mode == MODE_TIME:
            r, ud = self.radial(y[0])
            _, s, _, _, wd, _ = self.polar(y[1])
            ir2 = 1.0 / (r * r)
            return [ud * ir2, wd * ir2, P[P_MQ] * ir2 / (s * s)]
        if mode == MODE_ANGULAR:
            r = P[P_RFIX]
            _, s, _, _, wd, _ = self.polar(y[0])
            ir2 = 1.0 / (r * r)
            return [wd * ir2, P[P_MQ] * ir2 / (s * s)]
        if mode == MODE_SPATIAL:
            r, ud = self.radial(P[P_UBASE] + x)
            _, s, _, lp, wd, dtdw = self.polar(y[0])
            inv = 1.0 / ud
            dw = wd * inv
            bracket = 1.0 / (P[P_LAM] * s * s / P[P_MQ] - 1.0)
            return [dw, P[P_MQ] / (s * s) * inv, r * r * inv, bracket * lp * dw * dtdw]
        raise ValueError(f"unknown quantum mode {mode}")


class ClassicalRHS:
    """Hamiltonian form of the classical central-force motion.

    State (r, p_r, theta, p_theta, phi); ``P[0]`` is the signed p_phi and
    ``dvdr`` an optional potential derivative (Coulomb when omitted).
    """

    def __init__(self, P, dvdr=None):
        self.pf = float(P[0])
        self.dvdr = dvdr

    def __call__(self, x, y):
        r, pr, th, pt = y[0], y[1], y[2], y[3]
        s, c = math.sin(th), math.cos(th)
        pf = self.pf
        ir2 = 1.0 / (r * r)
        dv = ir2 if self.dvdr is None else self.dvdr(r)
        return [pr, (pt * pt + pf * pf / (s * s)) * ir2 / r - dv, pt * ir2, pf * pf * c * ir2 / (s * s * s),
                pf * ir2 / (s * s)]


def make_rhs(mode, P, radial_fn=None, polar_fn=None, dvdr=None):
    raw = ClassicalRHS(P, dvdr) if mode == MODE_CLASSICAL else QuantumRHS(mode, P, radial_fn, polar_fn)

    def rhs(x, y):
        # domain errors play the role of the NaNs the compiled kernel produces
        try:
            return raw(x, y)
        except (ValueError, ZeroDivisionError, OverflowError):
            return [math.nan] * len(y)

    return rhs


def _stage_step(rhs, x, y, f0, h):
    n = len(y)
    k = [f0]
    for i in range(1, 7):
        a = _A[i]
        yi = [y[j] + h * sum(a[m] * k[m][j] for m in range(i)) for j in range(n)]
        if i == 6:
            ynew = yi
        k.append(rhs(x + _C[i] * h, yi))
    err = [h * sum(_E[m] * k[m][j] for m in range(7)) for j in range(n)]
    return ynew, k[6], err


def _hermite(y0, y1, f0, f1, h, th, j):
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th * th * (3 - 2 * th)
    h11 = th * th * (th - 1)
    return h00 * y0[j] + h10 * h * f0[j] + h01 * y1[j] + h11 * h * f1[j]


def _finite(v):
    for a in v:
        if not math.isfinite(a):
            return False
    return True


def integrate(mode, params, x0, y0, x_end, rtol, atol, h0, hmax, max_steps, ev_idx, ev_val, ev_dir,
              refine_tol, radial_fn=None, polar_fn=None, dvdr=None):
    """Integrate from ``x0`` toward ``x_end`` until the end or the first event.

    Returns (xs, ys, f_left, f_right, status, event_index).  The last sample
    of an event return sits exactly on the event surface.
    """
    rhs = make_rhs(mode, params, radial_fn, polar_fn, dvdr)
    n = len(y0)
    y = [float(v) for v in y0]
    x = float(x0)
    x_end = float(x_end)
    direction = 1.0 if x_end >= x else -1.0
    nev = len(ev_idx)
    ev_idx = [int(v) for v in ev_idx]
    ev_val = [float(v) for v in ev_val]
    ev_dir = [int(v) for v in ev_dir]
    f = rhs(x, y)
    xs, ys, fl, fr = [x], [list(y)], [list(f)], [list(f)]
    if not _finite(f):
        return _pack(xs, ys, fl, fr, NONFINITE, -1)
    if x == x_end:
        return _pack(xs, ys, fl, fr, DONE, -1)
    span = abs(x_end - x)
    hmax = span if hmax <= 0.0 else min(hmax, span)
    if h0 > 0.0:
        h = min(h0, hmax)
    else:
        h = _initial_step(rhs, x, y, f, rtol, atol, hmax)
    g_old = [y[ev_idx[j]] - ev_val[j] for j in range(nev)]
    steps = 0
    last_rejected = False
    while True:
        if steps >= max_steps:
            return _pack(xs, ys, fl, fr, MAX_STEPS, -1)
        steps += 1
        remaining = abs(x_end - x)
        final = False
        if h >= remaining:
            h = remaining
            final = True
        hs = direction * h
        if x + hs == x:
            return _pack(xs, ys, fl, fr, STALL, -1)
        ynew, fnew, err = _stage_step(rhs, x, y, f, hs)
        ok = _finite(ynew) and _finite(fnew)
        if ok:
            acc = 0.0
            for j in range(n):
                q = abs(err[j]) / (atol + rtol * max(abs(y[j]), abs(ynew[j])))
                if q > 1e150:
                    acc = math.inf
                    break
                acc += q * q
            en = math.sqrt(acc / n)
        else:
            en = math.inf
        if en > 1.0:
            fac = 0.2 if not math.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
            h *= fac
            last_rejected = True
            continue
        xnew = x_end if final else x + hs
        hit, best = -1, 2.0
        g_new = [ynew[ev_idx[j]] - ev_val[j] for j in range(nev)]
        for j in range(nev):
            a, b = g_old[j], g_new[j]
            d = ev_dir[j]
            crossed = (d >= 0 and a < 0.0 <= b) or (d <= 0 and a > 0.0 >= b)
            if not crossed:
                continue
            lo_t, hi_t = 0.0, 1.0
            k = ev_idx[j]
            # bracket both x and the state change across it to refine_tol
            span = h * max(1.0, max(abs(v) for v in f), max(abs(v) for v in fnew))
            while (hi_t - lo_t) * span > refine_tol and hi_t - lo_t > 1e-15:
                mid = 0.5 * (lo_t + hi_t)
                gm = _hermite(y, ynew, f, fnew, hs, mid, k) - ev_val[j]
                if (gm < 0.0) == (a < 0.0) and gm != 0.0:
                    lo_t = mid
                else:
                    hi_t = mid
            if hi_t < best:
                best, hit = hi_t, j
        if hit >= 0:
            hstar = hs * best
            if best < 1.0:
                ystar, _, _ = _stage_step(rhs, x, y, f, hstar)
                xstar = x + hstar
            else:
                ystar, xstar = ynew, xnew
            ystar[ev_idx[hit]] = ev_val[hit]
            fstar = rhs(xstar, ystar)
            xs.append(xstar)
            ys.append(list(ystar))
            fl.append(list(fstar))
            fr.append(list(fstar))
            return _pack(xs, ys, fl, fr, EVENT, hit)
        x, y, f, g_old = xnew, ynew, fnew, g_new
        xs.append(x)
        ys.append(list(y))
        fl.append(list(f))
        fr.append(list(f))
        if final:
            return _pack(xs, ys, fl, fr, DONE, -1)
        fac = min(10.0, max(0.2, 0.9 * en ** -0.2)) if en > 0.0 else 10.0
        if last_rejected:
            fac = min(fac, 1.0)
        last_rejected = False
        h = min(h * fac, hmax)


def _initial_step(rhs, x, y, f, rtol, atol, hmax):
    n = len(y)
    sc = [atol + rtol * abs(v) for v in y]
    d0 = math.sqrt(sum((y[j] / sc[j]) ** 2 for j in range(n)) / n)
    d1 = math.sqrt(sum((f[j] / sc[j]) ** 2 for j in range(n)) / n)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, hmax)
    y1 = [y[j] + h0 * f[j] for j in range(n)]
    f1 = rhs(x + h0, y1)
    if not _finite(f1):
        return h0 * 1e-3
    d2 = math.sqrt(sum(((f1[j] - f[j]) / sc[j]) ** 2 for j in range(n)) / n) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, hmax)


def _pack(xs, ys, fl, fr, status, event):
    return (np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), np.asarray(fl, dtype=float),
            np.asarray(fr, dtype=float), int(status), int(event))
