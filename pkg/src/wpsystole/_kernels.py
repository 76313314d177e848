"""Compiled inner loops for the coset series.

Lifts of the curve are stored as endpoint pairs (a, b) in the frame where
the curve's own lift is the imaginary axis.  Row 0 is always that axis
itself and is stored as (0, inf).
"""

import math

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _lift_distance(x, y, a, b):
    c = 0.5 * (a + b)
    r = 0.5 * abs(b - a)
    dx = x - c
    return math.asinh(abs(dx * dx + y * y - r * r) / (2.0 * r * y))


@njit(cache=True, parallel=True)
def series_sum(xs, ys, la, lb, ldist, cell_of, cell_start, members, r_series, check_inside):
    """Theta and the envelope at each point, over lifts within r_series.

    For point k only the lifts listed for its cell are scanned.  They are
    sorted by distance to i, so the scan stops once that distance exceeds
    dist(i, z) + max(r_series, rho) where rho is the distance to the axis.

    Returns (theta_re, theta_im, envelope, nterms, inside).  When
    `check_inside` is set, a lift strictly closer than the axis marks the
    point as outside and its sums are left at zero.
    """
    n = xs.shape[0]
    tre = np.zeros(n)
    tim = np.zeros(n)
    env = np.zeros(n)
    cnt = np.zeros(n, dtype=np.int64)
    inside = np.ones(n, dtype=np.bool_)
    for k in prange(n):
        x = xs[k]
        y = ys[k]
        rho = math.asinh(abs(x) / y)
        r2 = x * x + y * y
        # d(i, z)
        d0 = math.acosh(max(1.0, 1.0 + (x * x + (y - 1.0) ** 2) / (2.0 * y)))
        stop = d0 + max(r_series, rho) + 1e-9
        c = cell_of[k]
        # axis term 1/z^2
        sr = (x * x - y * y) / (r2 * r2)
        si = -2.0 * x * y / (r2 * r2)
        h = y * y / r2
        m = 1
        ok = True
        for jj in range(cell_start[c], cell_start[c + 1]):
            j = members[jj]
            if j == 0:
                continue
            if ldist[j] > stop:
                break
            a = la[j]
            b = lb[j]
            d = _lift_distance(x, y, a, b)
            if check_inside and d < rho - 1e-12:
                ok = False
                break
            if d > r_series:
                continue
            # (a-b)^2 / ((z-a)(z-b))^2
            pr = (x - a) * (x - b) - y * y
            pi = y * ((x - a) + (x - b))
            den = pr * pr + pi * pi
            qr = pr / den
            qi = -pi / den
            wr = qr * qr - qi * qi
            wi = 2.0 * qr * qi
            ab2 = (a - b) * (a - b)
            sr += ab2 * wr
            si += ab2 * wi
            h += y * y * ab2 / den
            m += 1
        if ok:
            tre[k] = sr
            tim[k] = si
            env[k] = h
            cnt[k] = m
        else:
            inside[k] = False
    return tre, tim, env, cnt, inside


@njit(cache=True, parallel=True)
def nearest_lift_ok(xs, ys, la, lb, ldist, cell_of, cell_start, members):
    """True where no stored lift is strictly closer than the axis."""
    n = xs.shape[0]
    out = np.ones(n, dtype=np.bool_)
    for k in prange(n):
        x = xs[k]
        y = ys[k]
        rho = math.asinh(abs(x) / y)
        d0 = math.acosh(max(1.0, 1.0 + (x * x + (y - 1.0) ** 2) / (2.0 * y)))
        stop = d0 + rho + 1e-9
        c = cell_of[k]
        for jj in range(cell_start[c], cell_start[c + 1]):
            j = members[jj]
            if j == 0:
                continue
            if ldist[j] > stop:
                break
            if _lift_distance(x, y, la[j], lb[j]) < rho - 1e-12:
                out[k] = False
                break
    return out
