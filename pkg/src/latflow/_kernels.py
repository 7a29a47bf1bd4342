"""Compiled inner loops for the Monte Carlo estimators.

Both kernels sum a polynomial bump over the points of a diagonally flowed
block-triangular lattice.  Lattice points have the form

    v = ( e^{t_i} (p_i + (B q)_i) )_{i<=m}  concat  ( e^{-t_{m+j}} q_j )_{j<=n}

with integer p, q; for each q only the p within rounding distance of -(B q)
can land in the bump support, so the search is linear in the q-range.  The
accumulation order is fixed by the loop structure, never by thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def flow_bump_sums(B, et, emt, qgrid, y2, Ds, R2, power):
    """Bump sums over all (p, q) pairs, including the zero vector.

    B: (c, m, n) samples; et: (m,) expansion factors e^{t_i};
    emt: unused here except through y2, kept for signature symmetry;
    qgrid: (Q, n) float array of integer q vectors; y2: (Q,) squared
    contracted second-block norms; Ds: (m,) per-row offset ranges.
    """
    c = B.shape[0]
    m = B.shape[1]
    n = B.shape[2]
    Q = qgrid.shape[0]
    out = np.zeros(c)
    f = np.empty(m)
    delta = np.empty(m, np.int64)
    for s in range(c):
        acc = 0.0
        for iq in range(Q):
            yy = y2[iq]
            if yy >= R2:
                continue
            r2min = yy
            for i in range(m):
                g = 0.0
                for j in range(n):
                    g += B[s, i, j] * qgrid[iq, j]
                fi = g - np.rint(g)
                f[i] = fi
                x = et[i] * fi
                r2min += x * x
            if r2min >= R2:
                continue
            for i in range(m):
                delta[i] = -Ds[i]
            while True:
                r2 = yy
                for i in range(m):
                    x = et[i] * (delta[i] + f[i])
                    r2 += x * x
                w = 1.0 - r2 / R2
                if w > 0.0:
                    acc += w**power
                i = 0
                while i < m:
                    delta[i] += 1
                    if delta[i] <= Ds[i]:
                        break
                    delta[i] = -Ds[i]
                    i += 1
                if i == m:
                    break
        out[s] = acc
    return out


@njit(cache=True, nogil=True)
def flow_bump_sums_d2(B, et, emt, qmax, D, R2, power):
    """m = n = 1 specialization of flow_bump_sums; B is flat (c,)."""
    c = B.shape[0]
    out = np.zeros(c)
    for s in range(c):
        b = B[s]
        acc = 0.0
        for q in range(-qmax, qmax + 1):
            y = emt * q
            y2 = y * y
            if y2 >= R2:
                continue
            g = b * q
            f = g - np.rint(g)
            x = et * f
            # |d + f| >= |f| for every integer d, so no offset can land inside
            if y2 + x * x >= R2:
                continue
            for d in range(-D, D + 1):
                x = et * (d + f)
                w = 1.0 - (x * x + y2) / R2
                if w > 0.0:
                    acc += w**power
        out[s] = acc
    return out


@njit(cache=True, nogil=True)
def affine_bump_sums(B, o1c, o2, et, emt, qlo, qhi, D, R2, power):
    """Periodized bump over an affine 2-d lattice: sum over all p, q of
    rho(e^t (p + B q + o1c), o2 + e^{-t} q).  The first offset is passed
    already contracted (o1c = o1 / e^t) to keep the rounding well scaled;
    offsets vary per sample."""
    c = B.shape[0]
    out = np.zeros(c)
    for s in range(c):
        acc = 0.0
        b = B[s]
        u1 = o1c[s]
        for q in range(qlo, qhi + 1):
            y = o2[s] + emt * q
            y2 = y * y
            if y2 >= R2:
                continue
            g = b * q + u1
            f = g - np.rint(g)
            for d in range(-D, D + 1):
                x = et * (d + f)
                w = 1.0 - (x * x + y2) / R2
                if w > 0.0:
                    acc += w**power
        out[s] = acc
    return out
