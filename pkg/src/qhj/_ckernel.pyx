# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel; same algorithm and interface as ``_engine``.

Only the closed-form catalog states and the Coulomb classical field are
handled here.  Anything needing Python callbacks runs on ``_engine``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, pow, sin, cos, sqrt, fabs, isfinite, INFINITY, NAN
from scipy.special.cython_special cimport expi

cnp.import_array()

DEF NMAX = 8

cdef enum:
    MODE_TIME = 0
    MODE_SPATIAL = 1
    MODE_ANGULAR = 2
    MODE_CLASSICAL = 3

cdef enum:
    DONE = 0
    EVENT = 1
    STALL = 2
    MAX_STEPS = 3
    NONFINITE = 4

cdef enum:
    P_E, P_LAM, P_MQ, P_RID, P_PID, P_AR, P_BR, P_SR, P_AT, P_BT, P_ST, P_R1, P_R2, P_RREG, P_RLO, P_RHI, \
    P_PREG, P_TLO, P_THI, P_SLO, P_CLO, P_SHI, P_CHI, P_TSTAR, P_UBASE, P_RFIX

cdef double C2 = 0.2, C3 = 0.3, C4 = 0.8, C5 = 8.0 / 9.0
cdef double A21 = 0.2
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0, A75 = -2187.0 / 6784.0
cdef double A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0, E7 = -1.0 / 40.0


cdef inline double _sig(double u) noexcept nogil:
    cdef double e
    if u >= 0.0:
        return 1.0 / (1.0 + exp(-u))
    e = exp(u)
    return e / (1.0 + e)


cdef inline double _sinc(double d) noexcept nogil:
    if d == 0.0:
        return 1.0
    return sin(d) / d


cdef struct Pair:
    double s1, d1, s2, d2


cdef Pair _radial_catalog(int rid, double r) noexcept nogil:
    cdef Pair p
    cdef double em, ep, ei
    if rid == 0:
        em = exp(-r)
        ep = exp(r)
        ei = expi(2.0 * r)
        p.s1 = r * em
        p.d1 = (1.0 - r) * em
        p.s2 = -ep + 2.0 * r * em * ei
        p.d2 = ep + 2.0 * (1.0 - r) * em * ei
        return p
    em = exp(-0.5 * r)
    ep = exp(0.5 * r)
    ei = expi(r)
    if rid == 1:
        p.s1 = (2.0 * r - r * r) * em
        p.d1 = (2.0 - 3.0 * r + 0.5 * r * r) * em
        p.s2 = 0.5 * p.s1 * ei + 0.5 * (r - 1.0) * ep
        p.d2 = 0.5 * p.d1 * ei + ep * (1.25 - 0.25 * r)
        return p
    p.s1 = r * r * em
    p.d1 = (2.0 * r - 0.5 * r * r) * em
    p.s2 = ep * (-1.0 / (3.0 * r) - 1.0 / 6.0 - r / 6.0) + p.s1 * ei / 6.0
    p.d2 = ep * (1.0 / (3.0 * r * r) - 1.0 / (6.0 * r) - 0.25 + r / 12.0) + p.d1 * ei / 6.0
    return p


cdef Pair _polar_catalog(int pid, double s, double c, double lg) noexcept nogil:
    cdef Pair p
    cdef double sq = sqrt(s), w
    if pid == 0:
        p.s1 = sq
        p.d1 = 0.5 * c / sq
        p.s2 = sq * lg
        p.d2 = 0.5 * c / sq * lg + 1.0 / sq
    elif pid == 1:
        w = 1.0 + c + c * lg
        p.s1 = sq * c
        p.d1 = (0.5 * c * c - s * s) / sq
        p.s2 = sq * w
        p.d2 = (0.5 * c * w - s * s * (1.0 + lg) + c) / sq
    else:
        p.s1 = s * sq
        p.d1 = 1.5 * sq * c
        p.s2 = -c / (2.0 * sq) + 0.5 * s * sq * lg
        p.d2 = sq + 0.25 * c * c / (s * sq) + 0.75 * sq * c * lg
    return p


cdef struct Rad:
    double r, ud


cdef struct Pol:
    double th, s, c, lp, wd, dtdw


cdef Rad _radial(const double* P, double u) noexcept nogil:
    cdef Rad out
    cdef int reg = <int>P[P_RREG]
    cdef double E = P[P_E], r1 = P[P_R1], r2 = P[P_R2]
    cdef double e = 0.0, lo, hi, w, dl = 0.0, dh = 0.0, r, y, zp
    cdef Pair p
    if reg == 1:
        e = exp(u)
        r = r2 + e
    else:
        lo = P[P_RLO]
        hi = P[P_RHI]
        w = hi - lo
        dl = w * _sig(u)
        dh = w * _sig(-u)
        r = lo + dl if dl <= dh else hi - dh
    p = _radial_catalog(<int>P[P_RID], r)
    y = P[P_AR] * p.s2 + P[P_BR] * p.s1
    zp = P[P_SR] * P[P_AR] / (p.s1 * p.s1 + y * y)
    if reg == 0:
        out.ud = -2.0 * E * (P[P_RHI] - P[P_RLO]) / zp
    elif reg == 1:
        out.ud = 2.0 * E * ((r2 - r1) + e) / zp
    else:
        out.ud = -2.0 * E * (-(r2 - r1) - dh) * r1 / (r * zp)
    out.r = r
    return out


cdef Pol _polar(const double* P, double w) noexcept nogil:
    cdef Pol o
    cdef double lo = P[P_TLO], hi = P[P_THI], width, dl, dh, cd, sd, s, c, lg, y, lp, lam, mq, s2
    cdef int reg
    cdef Pair p
    width = hi - lo
    dl = width * _sig(w)
    dh = width * _sig(-w)
    if dl <= dh:
        o.th = lo + dl
        cd = cos(dl)
        sd = sin(dl)
        s = P[P_SLO] * cd + P[P_CLO] * sd
        c = P[P_CLO] * cd - P[P_SLO] * sd
    else:
        o.th = hi - dh
        cd = cos(dh)
        sd = sin(dh)
        s = P[P_SHI] * cd - P[P_CHI] * sd
        c = P[P_CHI] * cd + P[P_SHI] * sd
    if c >= 0.0:
        lg = log(s / (1.0 + c))
    else:
        lg = log((1.0 - c) / s)
    p = _polar_catalog(<int>P[P_PID], s, c, lg)
    y = P[P_AT] * p.s2 + P[P_BT] * p.s1
    lp = P[P_ST] * P[P_AT] / (p.s1 * p.s1 + y * y)
    lam = P[P_LAM]
    mq = P[P_MQ]
    reg = <int>P[P_PREG]
    s2 = s * s
    if reg == 0:
        o.wd = (lam * s2 - mq) / s2 * width / (dl * dh * lp)
    elif reg == 1:
        o.wd = -lam * _sinc(dh) * sin(o.th + P[P_TSTAR]) * width / (dl * s2 * lp)
    elif reg == 2:
        o.wd = lam * _sinc(dl) * _sinc(dh) * width / (s2 * lp)
    else:
        o.wd = -lam * sin(o.th - P[P_TSTAR]) * _sinc(dl) * width / (dh * s2 * lp)
    o.s = s
    o.c = c
    o.lp = lp
    o.dtdw = dl * dh / width
    return o


cdef void _rhs(int mode, const double* P, double x, const double* y, double* f) noexcept nogil:
    cdef Rad rd
    cdef Pol pl
    cdef double ir2, inv, dw, bracket, r, s, c, pf
    if mode == MODE_TIME:
        rd = _radial(P, y[0])
        pl = _polar(P, y[1])
        ir2 = 1.0 / (rd.r * rd.r)
        f[0] = rd.ud * ir2
        f[1] = pl.wd * ir2
        f[2] = P[P_MQ] * ir2 / (pl.s * pl.s)
    elif mode == MODE_ANGULAR:
        pl = _polar(P, y[0])
        ir2 = 1.0 / (P[P_RFIX] * P[P_RFIX])
        f[0] = pl.wd * ir2
        f[1] = P[P_MQ] * ir2 / (pl.s * pl.s)
    elif mode == MODE_SPATIAL:
        rd = _radial(P, P[P_UBASE] + x)
        pl = _polar(P, y[0])
        inv = 1.0 / rd.ud
        dw = pl.wd * inv
        bracket = 1.0 / (P[P_LAM] * pl.s * pl.s / P[P_MQ] - 1.0)
        f[0] = dw
        f[1] = P[P_MQ] / (pl.s * pl.s) * inv
        f[2] = rd.r * rd.r * inv
        f[3] = bracket * pl.lp * dw * pl.dtdw
    else:
        r = y[0]
        s = sin(y[2])
        c = cos(y[2])
        pf = P[0]
        ir2 = 1.0 / (r * r)
        f[0] = y[1]
        f[1] = (y[3] * y[3] + pf * pf / (s * s)) * ir2 / r - ir2
        f[2] = y[3] * ir2
        f[3] = pf * pf * c * ir2 / (s * s * s)
        f[4] = pf * ir2 / (s * s)


cdef void _step(int mode, const double* P, int n, double x, const double* y, const double* f0, double h,
                double* ynew, double* fnew, double* err) noexcept nogil:
    cdef double k2[NMAX]
    cdef double k3[NMAX]
    cdef double k4[NMAX]
    cdef double k5[NMAX]
    cdef double k6[NMAX]
    cdef double yt[NMAX]
    cdef int j
    for j in range(n):
        yt[j] = y[j] + h * A21 * f0[j]
    _rhs(mode, P, x + C2 * h, yt, k2)
    for j in range(n):
        yt[j] = y[j] + h * (A31 * f0[j] + A32 * k2[j])
    _rhs(mode, P, x + C3 * h, yt, k3)
    for j in range(n):
        yt[j] = y[j] + h * (A41 * f0[j] + A42 * k2[j] + A43 * k3[j])
    _rhs(mode, P, x + C4 * h, yt, k4)
    for j in range(n):
        yt[j] = y[j] + h * (A51 * f0[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
    _rhs(mode, P, x + C5 * h, yt, k5)
    for j in range(n):
        yt[j] = y[j] + h * (A61 * f0[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j])
    _rhs(mode, P, x + h, yt, k6)
    for j in range(n):
        ynew[j] = y[j] + h * (A71 * f0[j] + A73 * k3[j] + A74 * k4[j] + A75 * k5[j] + A76 * k6[j])
    _rhs(mode, P, x + h, ynew, fnew)
    for j in range(n):
        err[j] = h * (E1 * f0[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * fnew[j])


cdef inline double _hermite(double y0, double y1, double f0, double f1, double h, double th) noexcept nogil:
    return ((1 + 2 * th) * (1 - th) * (1 - th) * y0 + th * (1 - th) * (1 - th) * h * f0
            + th * th * (3 - 2 * th) * y1 + th * th * (th - 1) * h * f1)


cdef inline bint _finite(const double* v, int n) noexcept nogil:
    cdef int j
    for j in range(n):
        if not isfinite(v[j]):
            return False
    return True


cdef class _Buffer:
    cdef public object xs, ys, fl, fr
    cdef double[::1] vx
    cdef double[:, ::1] vy, vl, vr
    cdef int n, size, dim

    def __init__(self, int dim, int size):
        self.dim = dim
        self.size = size
        self.n = 0
        self._alloc(size)

    cdef _alloc(self, int size):
        xs = np.empty(size)
        ys = np.empty((size, self.dim))
        fl = np.empty((size, self.dim))
        fr = np.empty((size, self.dim))
        if self.n:
            xs[:self.n] = self.xs[:self.n]
            ys[:self.n] = self.ys[:self.n]
            fl[:self.n] = self.fl[:self.n]
            fr[:self.n] = self.fr[:self.n]
        self.xs, self.ys, self.fl, self.fr = xs, ys, fl, fr
        self.vx, self.vy, self.vl, self.vr = xs, ys, fl, fr
        self.size = size

    cdef void push(self, double x, const double* y, const double* f) except *:
        cdef int j
        if self.n == self.size:
            self._alloc(2 * self.size)
        self.vx[self.n] = x
        for j in range(self.dim):
            self.vy[self.n, j] = y[j]
            self.vl[self.n, j] = f[j]
            self.vr[self.n, j] = f[j]
        self.n += 1

    def result(self, int status, int event):
        n = self.n
        return (self.xs[:n].copy(), self.ys[:n].copy(), self.fl[:n].copy(), self.fr[:n].copy(), status, event)


def integrate(int mode, params, double x0, y0, double x_end, double rtol, double atol, double h0, double hmax,
              long max_steps, ev_idx, ev_val, ev_dir, double refine_tol):
    """Integrate from ``x0`` toward ``x_end`` until the end or the first event.

    Returns (xs, ys, f_left, f_right, status, event_index) exactly like the
    pure-Python kernel.
    """
    cdef double[::1] Pv = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[::1] y0v = np.ascontiguousarray(y0, dtype=np.float64)
    cdef long[::1] eidx = np.ascontiguousarray(ev_idx, dtype=np.int64)
    cdef double[::1] evalv = np.ascontiguousarray(ev_val, dtype=np.float64)
    cdef long[::1] edir = np.ascontiguousarray(ev_dir, dtype=np.int64)
    cdef int n = y0v.shape[0]
    cdef int nev = eidx.shape[0]
    if n > NMAX:
        raise ValueError("state dimension too large")
    cdef double y[NMAX]
    cdef double f[NMAX]
    cdef double ynew[NMAX]
    cdef double fnew[NMAX]
    cdef double err[NMAX]
    cdef double ys_[NMAX]
    cdef double fs_[NMAX]
    cdef double g_old[64]
    cdef double g_new[64]
    cdef const double* P = &Pv[0]
    cdef double x = x0, direction, span, h, hs, remaining, en, acc, q, fac, xnew, best, lo_t, hi_t, mid, gm
    cdef double a, b, d0, d1, d2, h1, hstar, xstar
    cdef int j, k, m, hit, d
    cdef double fspan
    cdef long steps = 0
    cdef bint final, last_rejected = False, ok, crossed
    if nev > 64:
        raise ValueError("too many events")
    for j in range(n):
        y[j] = y0v[j]
    _rhs(mode, P, x, y, f)
    buf = _Buffer(n, 256)
    buf.push(x, y, f)
    if not _finite(f, n):
        return buf.result(NONFINITE, -1)
    if x == x_end:
        return buf.result(DONE, -1)
    direction = 1.0 if x_end >= x else -1.0
    span = fabs(x_end - x)
    hmax = span if hmax <= 0.0 else min(hmax, span)
    if h0 > 0.0:
        h = min(h0, hmax)
    else:
        d0 = 0.0
        d1 = 0.0
        for j in range(n):
            q = atol + rtol * fabs(y[j])
            d0 += (y[j] / q) ** 2
            d1 += (f[j] / q) ** 2
        d0 = sqrt(d0 / n)
        d1 = sqrt(d1 / n)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h = min(h, hmax)
        for j in range(n):
            ynew[j] = y[j] + h * f[j]
        _rhs(mode, P, x + h, ynew, fnew)
        if not _finite(fnew, n):
            h = h * 1e-3
        else:
            d2 = 0.0
            for j in range(n):
                q = atol + rtol * fabs(y[j])
                d2 += ((fnew[j] - f[j]) / q) ** 2
            d2 = sqrt(d2 / n) / h
            if max(d1, d2) <= 1e-15:
                h1 = max(1e-6, h * 1e-3)
            else:
                h1 = pow(0.01 / max(d1, d2), 0.2)
            h = min(100.0 * h, min(h1, hmax))
    for j in range(nev):
        g_old[j] = y[eidx[j]] - evalv[j]
    while True:
        if steps >= max_steps:
            return buf.result(MAX_STEPS, -1)
        steps += 1
        remaining = fabs(x_end - x)
        final = False
        if h >= remaining:
            h = remaining
            final = True
        hs = direction * h
        if x + hs == x:
            return buf.result(STALL, -1)
        _step(mode, P, n, x, y, f, hs, ynew, fnew, err)
        ok = _finite(ynew, n) and _finite(fnew, n)
        en = INFINITY
        if ok:
            acc = 0.0
            for j in range(n):
                q = fabs(err[j]) / (atol + rtol * max(fabs(y[j]), fabs(ynew[j])))
                if q > 1e150 or not isfinite(q):
                    acc = INFINITY
                    break
                acc += q * q
            en = sqrt(acc / n)
        if en > 1.0:
            if not isfinite(en):
                fac = 0.2
            else:
                fac = max(0.2, 0.9 * pow(en, -0.2))
            h *= fac
            last_rejected = True
            continue
        xnew = x_end if final else x + hs
        hit = -1
        best = 2.0
        for j in range(nev):
            g_new[j] = ynew[eidx[j]] - evalv[j]
        for j in range(nev):
            a = g_old[j]
            b = g_new[j]
            d = <int>edir[j]
            crossed = (d >= 0 and a < 0.0 <= b) or (d <= 0 and a > 0.0 >= b)
            if not crossed:
                continue
            lo_t = 0.0
            hi_t = 1.0
            k = <int>eidx[j]
            fspan = 1.0
            for m in range(n):
                fspan = max(fspan, max(fabs(f[m]), fabs(fnew[m])))
            fspan *= h
            while (hi_t - lo_t) * fspan > refine_tol and hi_t - lo_t > 1e-15:
                mid = 0.5 * (lo_t + hi_t)
                gm = _hermite(y[k], ynew[k], f[k], fnew[k], hs, mid) - evalv[j]
                if ((gm < 0.0) == (a < 0.0)) and gm != 0.0:
                    lo_t = mid
                else:
                    hi_t = mid
            if hi_t < best:
                best = hi_t
                hit = j
        if hit >= 0:
            if best < 1.0:
                hstar = hs * best
                _step(mode, P, n, x, y, f, hstar, ys_, fs_, err)
                xstar = x + hstar
            else:
                for j in range(n):
                    ys_[j] = ynew[j]
                xstar = xnew
            ys_[eidx[hit]] = evalv[hit]
            _rhs(mode, P, xstar, ys_, fs_)
            buf.push(xstar, ys_, fs_)
            return buf.result(EVENT, hit)
        x = xnew
        for j in range(n):
            y[j] = ynew[j]
            f[j] = fnew[j]
        for j in range(nev):
            g_old[j] = g_new[j]
        buf.push(x, y, f)
        if final:
            return buf.result(DONE, -1)
        if en > 0.0:
            fac = min(10.0, max(0.2, 0.9 * pow(en, -0.2)))
        else:
            fac = 10.0
        if last_rejected:
            fac = min(fac, 1.0)
        last_rejected = False
        h = min(h * fac, hmax)
