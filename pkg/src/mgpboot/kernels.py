"""Hot numeric kernels: regularized incomplete beta and the standard Student-t tail.

Two interchangeable implementations live here. The numba one compiles scalar
loops with ``@njit``; the numpy one is a masked, vectorized translation of the
same iterations. ``MGPBOOT_BACKEND=numpy`` (or a missing numba install) selects
the numpy path at import time. Both accept float64 arrays and a scalar degrees
of freedom, and return a new array of the same shape.

Everything here works on the *standard* t law (location 0, scale 1) and on
upper-tail probabilities, which keeps precision in the far tails where the
exceedance pipeline spends its time. Accuracy is maintained while |t| stays
below about 1e150 (so that t*t is finite), which covers tail probabilities far
smaller than anything the pipeline produces.
"""

from __future__ import annotations

import math
import os

import numpy as np

BETACF_TOL = 1e-14
BETACF_MAXIT = 300
NEWTON_MAXIT = 100
_FPMIN = 1e-300
_TAIL_SWITCH = 0.1

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("MGPBOOT_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"MGPBOOT_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def _constants(nu):
    a = 0.5 * nu
    lbeta = math.lgamma(a) + math.lgamma(0.5) - math.lgamma(a + 0.5)
    # log of the density at zero
    logc = math.lgamma(a + 0.5) - math.lgamma(a) - 0.5 * math.log(nu * math.pi)
    return a, lbeta, logc


def _check_nu(nu):
    nu = float(nu)
    if not (nu > 0.0) or math.isinf(nu):
        raise ValueError(f"degrees of freedom must be finite and positive, got {nu}")
    return nu


# ---------------------------------------------------------------------------
# numba implementation
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _njit = numba.njit(cache=True, nogil=True)

    @_njit
    def _betacf_nb(a, b, x):
        qab = a + b
        qap = a + 1.0
        qam = a - 1.0
        c = 1.0
        d = 1.0 - qab * x / qap
        if abs(d) < _FPMIN:
            d = _FPMIN
        d = 1.0 / d
        h = d
        for m in range(1, BETACF_MAXIT + 1):
            m2 = 2.0 * m
            aa = m * (b - m) * x / ((qam + m2) * (a + m2))
            d = 1.0 + aa * d
            if abs(d) < _FPMIN:
                d = _FPMIN
            c = 1.0 + aa / c
            if abs(c) < _FPMIN:
                c = _FPMIN
            d = 1.0 / d
            h *= d * c
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
            d = 1.0 + aa * d
            if abs(d) < _FPMIN:
                d = _FPMIN
            c = 1.0 + aa / c
            if abs(c) < _FPMIN:
                c = _FPMIN
            d = 1.0 / d
            delta = d * c
            h *= delta
            if abs(delta - 1.0) < BETACF_TOL:
                break
        return h

    @_njit
    def _betainc_nb(a, b, x, y, lbeta):
        # y = 1 - x, supplied separately so callers keep full precision
        if x <= 0.0:
            return 0.0
        if y <= 0.0:
            return 1.0
        front = math.exp(a * math.log(x) + b * math.log(y) - lbeta)
        if x < (a + 1.0) / (a + b + 2.0):
            return front * _betacf_nb(a, b, x) / a
        return 1.0 - front * _betacf_nb(b, a, y) / b

    @_njit
    def _t_upper_tail_nb(t, nu, a, lbeta):
        # P(T > t) for t >= 0
        if t == 0.0:
            return 0.5
        if math.isinf(t):
            return 0.0
        if t > 1e150:
            x = nu / t / t
            y = 1.0
        else:
            t2 = t * t
            x = nu / (nu + t2)
            y = t2 / (nu + t2)
        return 0.5 * _betainc_nb(a, 0.5, x, y, lbeta)

    @_njit
    def _t_sf_scalar_nb(t, nu, a, lbeta):
        if math.isnan(t):
            return math.nan
        if t >= 0.0:
            return _t_upper_tail_nb(t, nu, a, lbeta)
        return 1.0 - _t_upper_tail_nb(-t, nu, a, lbeta)

    @_njit
    def _t_logpdf_nb(t, nu, logc):
        at = abs(t)
        if at > 1e100:
            return logc - 0.5 * (nu + 1.0) * (2.0 * math.log(at) - math.log(nu))
        return logc - 0.5 * (nu + 1.0) * math.log1p(t * t / nu)

    @_njit
    def _t_pdf_nb(t, nu, logc):
        return math.exp(_t_logpdf_nb(t, nu, logc))

    @_njit
    def _t_isf_upper_nb(p, nu, a, lbeta, logc):
        # root of P(T > t) = p for 0 < p < 0.5, so t > 0
        tail = p < _TAIL_SWITCH
        if tail:
            t = math.exp((logc + 0.5 * (nu - 1.0) * math.log(nu) - math.log(p)) / nu)
        else:
            t = (0.5 - p) / math.exp(logc)
        lo = 0.0
        hi = math.inf
        logp = math.log(p)
        for _ in range(NEWTON_MAXIT):
            s = _t_upper_tail_nb(t, nu, a, lbeta)
            if s > p:
                lo = t
            elif s < p:
                hi = t
            else:
                return t
            # Halley steps: on log P(T > t) against log t in the tail, on P(T > t)
            # against t near the centre
            curv = (nu + 1.0) * t * t / (nu + t * t)
            if s <= 0.0:
                t_new = -1.0
            elif tail:
                r = math.exp(_t_logpdf_nb(t, nu, logc) + math.log(t) - math.log(s))
                h = math.log(s) - logp
                g1 = -r
                g2 = -r * (1.0 - curv) - r * r
                den = 2.0 * g1 * g1 - h * g2
                step = -2.0 * h * g1 / den if den != 0.0 else -h / g1
                t_new = t * math.exp(step) if r > 0.0 else -1.0
            else:
                f = _t_pdf_nb(t, nu, logc)
                h = s - p
                g1 = -f
                g2 = f * curv / t
                den = 2.0 * g1 * g1 - h * g2
                t_new = t - (2.0 * h * g1 / den if den != 0.0 else h / g1)
            if abs(t_new - t) <= 1e-9 * t:
                return t_new
            if not (t_new > lo and t_new < hi):
                t_new = 0.5 * (lo + hi) if hi < math.inf else 2.0 * max(t, 1.0)
            t = t_new
        return t

    @_njit
    def _t_isf_scalar_nb(p, nu, a, lbeta, logc):
        if math.isnan(p):
            return math.nan
        if p <= 0.0:
            return math.inf
        if p >= 1.0:
            return -math.inf
        if p == 0.5:
            return 0.0
        if p > 0.5:
            return -_t_isf_upper_nb(1.0 - p, nu, a, lbeta, logc)
        return _t_isf_upper_nb(p, nu, a, lbeta, logc)

    @_njit
    def _t_sf_loop_nb(t, nu, a, lbeta, out):
        for i in range(t.size):
            out[i] = _t_sf_scalar_nb(t[i], nu, a, lbeta)

    @_njit
    def _t_isf_loop_nb(p, nu, a, lbeta, logc, out):
        for i in range(p.size):
            out[i] = _t_isf_scalar_nb(p[i], nu, a, lbeta, logc)

    @_njit
    def _betainc_loop_nb(a, b, x, lbeta, out):
        for i in range(x.size):
            out[i] = _betainc_nb(a, b, x[i], 1.0 - x[i], lbeta)


def _t_sf_numba(t, nu):
    nu = _check_nu(nu)
    a, lbeta, _ = _constants(nu)
    t = np.asarray(t, dtype=np.float64)
    flat = np.ascontiguousarray(t).ravel()
    out = np.empty_like(flat)
    _t_sf_loop_nb(flat, nu, a, lbeta, out)
    return out.reshape(t.shape)


def _t_isf_numba(p, nu):
    nu = _check_nu(nu)
    a, lbeta, logc = _constants(nu)
    p = np.asarray(p, dtype=np.float64)
    flat = np.ascontiguousarray(p).ravel()
    out = np.empty_like(flat)
    _t_isf_loop_nb(flat, nu, a, lbeta, logc, out)
    return out.reshape(p.shape)


def _betainc_numba(a, b, x):
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    x = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(x).ravel()
    out = np.empty_like(flat)
    _betainc_loop_nb(float(a), float(b), flat, lbeta, out)
    return out.reshape(x.shape)


# ---------------------------------------------------------------------------
# numpy implementation
# ---------------------------------------------------------------------------


def _betacf_np(a, b, x):
    a = np.broadcast_to(a, x.shape)
    b = np.broadcast_to(b, x.shape)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, BETACF_MAXIT + 1):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ai, bi, xi = a[idx], b[idx], x[idx]
        ci, di = c[idx], d[idx]
        m2 = 2.0 * m
        aa = m * (bi - m) * xi / ((qam[idx] + m2) * (ai + m2))
        di = 1.0 + aa * di
        di = np.where(np.abs(di) < _FPMIN, _FPMIN, di)
        ci = 1.0 + aa / ci
        ci = np.where(np.abs(ci) < _FPMIN, _FPMIN, ci)
        di = 1.0 / di
        hi = h[idx] * di * ci
        aa = -(ai + m) * (qab[idx] + m) * xi / ((ai + m2) * (qap[idx] + m2))
        di = 1.0 + aa * di
        di = np.where(np.abs(di) < _FPMIN, _FPMIN, di)
        ci = 1.0 + aa / ci
        ci = np.where(np.abs(ci) < _FPMIN, _FPMIN, ci)
        di = 1.0 / di
        delta = di * ci
        h[idx] = hi * delta
        c[idx] = ci
        d[idx] = di
        active[idx[np.abs(delta - 1.0) < BETACF_TOL]] = False
    return h


def _betainc_np(a, b, x, y, lbeta):
    out = np.empty_like(x)
    lo = x <= 0.0
    one = (y <= 0.0) & ~lo
    mid = ~(lo | one)
    out[lo] = 0.0
    out[one] = 1.0
    xm, ym = x[mid], y[mid]
    front = np.exp(a * np.log(xm) + b * np.log(ym) - lbeta)
    direct = xm < (a + 1.0) / (a + b + 2.0)
    res = np.empty_like(xm)
    if direct.any():
        res[direct] = front[direct] * _betacf_np(a, b, xm[direct]) / a
    flip = ~direct
    if flip.any():
        res[flip] = 1.0 - front[flip] * _betacf_np(b, a, ym[flip]) / b
    out[mid] = res
    return out


def _t_logpdf_np(t, nu, logc):
    at = np.abs(t)
    big = at > 1e100
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        near = np.log1p(t * t / nu)
        far = 2.0 * np.log(at) - math.log(nu)
    return logc - 0.5 * (nu + 1.0) * np.where(big, far, near)


def _t_upper_tail_np(t, nu, a, lbeta):
    # t >= 0 elementwise
    out = np.empty_like(t)
    zero = t == 0.0
    inf = np.isinf(t)
    out[zero] = 0.5
    out[inf] = 0.0
    rest = ~(zero | inf)
    tr = t[rest]
    huge = tr > 1e150
    with np.errstate(over="ignore", invalid="ignore"):
        t2 = tr * tr
        x = np.where(huge, nu / tr / tr, nu / (nu + t2))
        y = np.where(huge, 1.0, t2 / (nu + t2))
    out[rest] = 0.5 * _betainc_np(a, 0.5, x, y, lbeta)
    return out


def _t_sf_numpy(t, nu):
    nu = _check_nu(nu)
    a, lbeta, _ = _constants(nu)
    t = np.asarray(t, dtype=np.float64)
    flat = t.ravel()
    out = np.full(flat.shape, np.nan)
    ok = ~np.isnan(flat)
    tv = flat[ok]
    tail = _t_upper_tail_np(np.abs(tv), nu, a, lbeta)
    out[ok] = np.where(tv >= 0.0, tail, 1.0 - tail)
    return out.reshape(t.shape)


def _t_isf_upper_np(p, nu, a, lbeta, logc):
    tail = p < _TAIL_SWITCH
    t = np.where(
        tail,
        np.exp((logc + 0.5 * (nu - 1.0) * math.log(nu) - np.log(p)) / nu),
        (0.5 - p) / math.exp(logc),
    )
    lo = np.zeros_like(p)
    hi = np.full_like(p, np.inf)
    logp = np.log(p)
    active = np.ones(p.shape, dtype=bool)
    for _ in range(NEWTON_MAXIT):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ti, pi = t[idx], p[idx]
        s = _t_upper_tail_np(ti, nu, a, lbeta)
        lo[idx] = np.where(s > pi, ti, lo[idx])
        hi[idx] = np.where(s < pi, ti, hi[idx])
        exact = s == pi
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            logf = _t_logpdf_np(ti, nu, logc)
            curv = (nu + 1.0) * ti * ti / (nu + ti * ti)
            r = np.exp(logf + np.log(ti) - np.log(s))
            h_log = np.log(s) - logp[idx]
            g2_log = -r * (1.0 - curv) - r * r
            step_log = -2.0 * h_log * -r / (2.0 * r * r - h_log * g2_log)
            f = np.exp(logf)
            h_lin = s - pi
            g2_lin = f * curv / ti
            t_lin = ti - 2.0 * h_lin * -f / (2.0 * f * f - h_lin * g2_lin)
            t_new = np.where(tail[idx], ti * np.exp(step_log), t_lin)
        t_new = np.where(np.isfinite(t_new), t_new, -1.0)
        done = exact | (np.abs(t_new - ti) <= 1e-9 * ti)
        loi, hii = lo[idx], hi[idx]
        bad = ~((t_new > loi) & (t_new < hii)) & ~done
        fallback = np.where(np.isfinite(hii), 0.5 * (loi + hii), 2.0 * np.maximum(ti, 1.0))
        t_new = np.where(bad, fallback, t_new)
        t_new = np.where(exact, ti, t_new)
        t[idx] = t_new
        active[idx[done]] = False
    return t


def _t_isf_numpy(p, nu):
    nu = _check_nu(nu)
    a, lbeta, logc = _constants(nu)
    p = np.asarray(p, dtype=np.float64)
    flat = p.ravel()
    out = np.full(flat.shape, np.nan)
    out[flat <= 0.0] = np.inf
    out[flat >= 1.0] = -np.inf
    out[flat == 0.5] = 0.0
    upper = (flat > 0.0) & (flat < 0.5)
    lower = (flat > 0.5) & (flat < 1.0)
    if upper.any():
        out[upper] = _t_isf_upper_np(flat[upper], nu, a, lbeta, logc)
    if lower.any():
        out[lower] = -_t_isf_upper_np(1.0 - flat[lower], nu, a, lbeta, logc)
    return out.reshape(p.shape)


def _betainc_numpy(a, b, x):
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    return _betainc_np(float(a), float(b), flat, 1.0 - flat, lbeta).reshape(x.shape)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

IMPLEMENTATIONS = {
    "numpy": {"t_sf": _t_sf_numpy, "t_isf": _t_isf_numpy, "betainc": _betainc_numpy},
}
if HAVE_NUMBA:
    IMPLEMENTATIONS["numba"] = {"t_sf": _t_sf_numba, "t_isf": _t_isf_numba, "betainc": _betainc_numba}

_active = IMPLEMENTATIONS[BACKEND]


def t_sf(t, nu):
    """Upper-tail probability P(T > t) of the standard Student-t."""
    return _active["t_sf"](t, nu)


def t_isf(p, nu):
    """Inverse of :func:`t_sf`: the t with P(T > t) = p."""
    return _active["t_isf"](p, nu)


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    return _active["betainc"](a, b, x)


def t_logpdf(t, nu):
    nu = _check_nu(nu)
    _, _, logc = _constants(nu)
    return _t_logpdf_np(np.asarray(t, dtype=np.float64), nu, logc)
