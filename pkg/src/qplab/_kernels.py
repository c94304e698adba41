"""Compiled inner loops (numba) for bisection, eigenvectors and cocycle products."""

import math

import numpy as np
from numba import njit

PIVMIN = 1e-300
LN2 = math.log(2.0)


@njit(cache=True, nogil=True)
def _count(d, E):
    q = math.inf
    c = 0
    for k in range(d.size):
        q = (d[k] - E) - 1.0 / q
        if abs(q) < PIVMIN:
            q = -PIVMIN
        if q < 0:
            c += 1
    return c


@njit(cache=True, nogil=True)
def _pcount(d, E, corner):
    n = d.size
    q = math.inf
    c = 0
    logf = 0.0
    sgn = 1.0
    for k in range(n - 1):
        q = (d[k] - E) - 1.0 / q
        if abs(q) < PIVMIN:
            q = -PIVMIN
        if q < 0:
            c += 1
            sgn = -sgn
        logf += math.log(abs(q))
    r = math.inf
    for k in range(n - 2, -1, -1):
        r = (d[k] - E) - 1.0 / r
        if abs(r) < PIVMIN:
            r = -PIVMIN
    g1n = sgn * math.exp(-logf) if logf < 700 else 0.0
    schur = (d[n - 1] - E) - 1.0 / r + 2.0 * corner * g1n - 1.0 / q
    if schur < 0:
        c += 1
    return c


@njit(cache=True, nogil=True)
def bisect_all(diag, tol, periodic, corner):
    """All eigenvalues of each row's tridiagonal (or cyclic) matrix by bisection.

    Intervals are shared across indices: each bisection step records counts so
    one sweep of the index range reuses the brackets found for earlier indices.
    """
    B, n = diag.shape
    out = np.empty((B, n))
    for b in range(B):
        d = diag[b]
        lo0 = d.min() - 2.0 - 1e-9
        hi0 = d.max() + 2.0 + 1e-9
        lo = np.full(n, lo0)
        hi = np.full(n, hi0)
        for j in range(n):
            a = max(lo[j], lo0)
            h = hi[j]
            ch = -1  # eigenvalues below h, once known; above j + 1 means a cluster
            while True:
                if h - a <= tol:
                    # keep splitting a cluster down to rounding level
                    if ch < 0:
                        ch = _pcount(d, h, corner) if periodic else _count(d, h)
                    if ch <= j + 1 or h - a <= 4e-16 * max(abs(a), abs(h), 1.0):
                        break
                m = 0.5 * (a + h)
                c = _pcount(d, m, corner) if periodic else _count(d, m)
                # c eigenvalues lie below m: tighten brackets of later indices too
                if c > j:
                    h = m
                    ch = c
                    for i in range(j + 1, min(c, n)):
                        if hi[i] > m:
                            hi[i] = m
                else:
                    a = m
                for i in range(max(c, j + 1), n):
                    if lo[i] < m:
                        lo[i] = m
            out[b, j] = 0.5 * (a + h)
    return out


@njit(cache=True, nogil=True)
def twisted_vectors(diag, E):
    """Unit eigenvectors for eigenvalues E (B, K) from forward/backward determinant sequences."""
    B, n = diag.shape
    K = E.shape[1]
    out = np.zeros((B, K, n))
    lf = np.empty(n)
    sf = np.empty(n)
    lb = np.empty(n)
    sb = np.empty(n)
    for b in range(B):
        d = diag[b]
        for k in range(K):
            e = E[b, k]
            # forward: value at site i is f_{[1,i-1]}
            f1, f0, acc = 1.0, 0.0, 0.0
            for i in range(n):
                lf[i] = (math.log(abs(f1)) if f1 != 0 else -math.inf) + acc
                sf[i] = 1.0 if f1 >= 0 else -1.0
                fn = (d[i] - e) * f1 - f0
                top = max(abs(fn), abs(f1))
                if top > 0:
                    ex = math.frexp(top)[1] - 1
                    sc = 2.0 ** (-ex)
                    fn *= sc
                    f1 *= sc
                    acc += ex * LN2
                f0 = f1
                f1 = fn
            # backward: value at site i is f_{[i+1,n]}
            g1, g0, acc = 1.0, 0.0, 0.0
            for i in range(n - 1, -1, -1):
                lb[i] = (math.log(abs(g1)) if g1 != 0 else -math.inf) + acc
                sb[i] = 1.0 if g1 >= 0 else -1.0
                gn = (d[i] - e) * g1 - g0
                top = max(abs(gn), abs(g1))
                if top > 0:
                    ex = math.frexp(top)[1] - 1
                    sc = 2.0 ** (-ex)
                    gn *= sc
                    g1 *= sc
                    acc += ex * LN2
                g0 = g1
                g1 = gn
            c = 0
            best = -math.inf
            for i in range(n):
                v = lf[i] + lb[i]
                if v > best:
                    best = v
                    c = i
            norm = 0.0
            for i in range(n):
                if i <= c:
                    val = sf[i] * sf[c] * math.exp(min(lf[i] - lf[c], 0.0))
                else:
                    val = sb[i] * sb[c] * math.exp(min(lb[i] - lb[c], 0.0))
                out[b, k, i] = val
                norm += val * val
            norm = math.sqrt(norm)
            for i in range(n):
                out[b, k, i] /= norm
    return out


@njit(cache=True, nogil=True)
def qr_chunk(dvals, state_c, state_r, first, stop_rows, res_c, res_r, res_idx):
    """Advance QR-form products through rows of dvals (steps x batch).

    state_c holds (q00, q01, q10, q11, bh, dh) and state_r holds (s, t) per
    batch element; both are updated in place.  Rows listed in stop_rows are
    snapshotted into res_c/res_r at positions res_idx.  The scalar factors are
    multiplied up for a few steps before their logarithms are taken.
    """
    nsteps, B = dvals.shape
    for b in range(B):
        q00, q01, q10, q11 = state_c[0, b], state_c[1, b], state_c[2, b], state_c[3, b]
        bh, dh = state_c[4, b], state_c[5, b]
        s, t = state_r[0, b], state_r[1, b]
        ps, rs = 1.0, 1.0
        si = 0
        for r in range(nsteps):
            if first and r == 0:
                q00, q01, q10, q11 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
                bh, dh = 0j, 1.0 + 0j
                s, t = 0.0, 0.0
            dn = dvals[r, b]
            c00 = dn * q00 - q10
            c01 = dn * q01 - q11
            c10 = q00
            c11 = q01
            p = math.sqrt(c00.real * c00.real + c00.imag * c00.imag + c10.real * c10.real
                          + c10.imag * c10.imag)
            inv = 1.0 / p
            r12 = (c00.conjugate() * c01 + c10.conjugate() * c11) * inv
            r22 = (c00 * c11 - c10 * c01) * inv
            q00 = c00 * inv
            q10 = c10 * inv
            q01 = -q10.conjugate()
            q11 = q00.conjugate()
            ar = abs(r22)
            if t - s > -745.0:  # otherwise the update is below double resolution
                bh = bh + r12 * (math.exp(t - s) * rs / ps) * dh * inv
            ps *= p
            rs *= ar
            dh = dh * (r22 * (1.0 / ar))
            if (r & 31) == 31:
                s += math.log(ps)
                t += math.log(rs)
                ps, rs = 1.0, 1.0
            while si < stop_rows.size and stop_rows[si] == r:
                k = res_idx[si]
                res_c[k, 0, b] = q00
                res_c[k, 1, b] = q01
                res_c[k, 2, b] = q10
                res_c[k, 3, b] = q11
                res_c[k, 4, b] = bh
                res_c[k, 5, b] = dh
                res_r[k, 0, b] = s + math.log(ps)
                res_r[k, 1, b] = t + math.log(rs)
                si += 1
        state_c[0, b], state_c[1, b], state_c[2, b], state_c[3, b] = q00, q01, q10, q11
        state_c[4, b], state_c[5, b] = bh, dh
        state_r[0, b], state_r[1, b] = s + math.log(ps), t + math.log(rs)
