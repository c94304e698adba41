"""Finite-volume eigenproblems on lattice windows.

Eigenvalues come from Sturm-sequence bisection, where the Sturm sequence is the
Dirichlet determinant recursion written in ratio form.  Eigenvectors are built
from forward and backward determinant sequences glued at the localization peak.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CrossCheckError, DegenerateError
from . import _kernels
from .model import Potential, deriv_phase

log = logging.getLogger(__name__)

_PIVMIN = 1e-300


@dataclass
class SpectrumSample:
    x: float
    N: int
    bc: str
    window: tuple
    eigs: np.ndarray
    vecs: np.ndarray | None = None
    centers: np.ndarray | None = None
    residuals: np.ndarray | None = field(default=None, repr=False)

    def csv_rows(self):
        a = self.window[0]
        for j, E in enumerate(self.eigs):
            nu = "" if self.centers is None else int(self.centers[j])
            res = "" if self.residuals is None else repr(float(self.residuals[j]))
            yield (repr(float(self.x)), j, repr(float(E)), nu, res)


def site_potential(pot: Potential, x, omega: float, a: int, b: int) -> np.ndarray:
    """Real diagonal V(x + n omega), n = a..b, shape (..., b - a + 1)."""
    x = np.asarray(x, dtype=float)
    n = np.arange(a, b + 1)
    return pot.eval_phase(x[..., None] + n * omega)


def residual_scale(pot: Potential, E):
    return 1e-9 * (pot.sup_norm + np.abs(E) + 2.0)


# ---------------------------------------------------------------------------
# Sturm bisection


def sturm_count(diag: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Number of eigenvalues below E for each tridiagonal (off-diagonal -1).

    ``diag`` has shape (B, n); ``E`` has shape (B, K).  The ratio q_k =
    f_{[1,k]}/f_{[1,k-1]} is negative exactly at sign changes of the sequence.
    """
    diag = np.asarray(diag, dtype=float)
    E = np.asarray(E, dtype=float)
    cnt = np.zeros(E.shape, dtype=np.int64)
    q = np.full(E.shape, np.inf)  # f_{[1,0]} / f_{[1,-1]}
    for k in range(diag.shape[-1]):
        q = (diag[..., k, None] - E) - 1.0 / q
        q = np.where(np.abs(q) < _PIVMIN, -_PIVMIN, q)
        cnt += q < 0
    return cnt


def gershgorin(diag: np.ndarray):
    return diag.min(axis=-1) - 2.0, diag.max(axis=-1) + 2.0


def tridiag_eigvals(diag: np.ndarray, tol: float = 1e-12, index=None) -> np.ndarray:
    """All (or the selected) eigenvalues of tridiag(-1, diag, -1), batched over rows."""
    diag = np.atleast_2d(np.asarray(diag, dtype=float))
    B, n = diag.shape
    if index is None:
        return _kernels.bisect_all(np.ascontiguousarray(diag), tol, False, 0.0)
    # index is either shared (K,) or per row (B, K)
    idx = np.asarray(index)
    K = idx.shape[-1] if idx.ndim else 1
    idx = np.broadcast_to(idx.reshape(-1, K) if idx.ndim == 2 else idx.reshape(1, K), (B, K))
    lo, hi = gershgorin(diag)
    lo = np.repeat(lo[:, None] - 1e-9, K, axis=1)
    hi = np.repeat(hi[:, None] + 1e-9, K, axis=1)
    width = float(np.max(hi - lo)) if hi.size else 0.0
    iters = int(np.ceil(np.log2(max(width, tol) / tol))) + 1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = sturm_count(diag, mid) > idx
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    return 0.5 * (lo + hi)


def _det_sequences(diag, E):
    """Forward f_{[1,k]} (k=0..n) and backward f_{[k+2,n]} (k=0..n-1) in log-scaled form."""
    B, n = diag.shape
    K = E.shape[1]
    fm = np.empty((n + 1, B, K))
    fl = np.empty((n + 1, B, K))
    f1, f0, acc = np.ones((B, K)), np.zeros((B, K)), np.zeros((B, K))
    fm[0], fl[0] = f1, acc
    for k in range(n):
        fn = (diag[:, k, None] - E) * f1 - f0
        top = np.maximum(np.abs(fn), np.abs(f1))
        _, ex = np.frexp(np.where(top > 0, top, 1.0))
        f1, f0 = np.ldexp(fn, -ex), np.ldexp(f1, -ex)
        acc = acc + ex * np.log(2.0)
        fm[k + 1], fl[k + 1] = f1, acc
    bm = np.empty((n, B, K))
    bl = np.empty((n, B, K))
    g1, g0, acc = np.ones((B, K)), np.zeros((B, K)), np.zeros((B, K))
    bm[n - 1], bl[n - 1] = g1, acc
    for k in range(n - 2, -1, -1):
        gn = (diag[:, k + 1, None] - E) * g1 - g0
        top = np.maximum(np.abs(gn), np.abs(g1))
        _, ex = np.frexp(np.where(top > 0, top, 1.0))
        g1, g0 = np.ldexp(gn, -ex), np.ldexp(g1, -ex)
        acc = acc + ex * np.log(2.0)
        bm[k], bl[k] = g1, acc
    return fm, fl, bm, bl


def _logabs(m, l):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(m)) + l


def tridiag_eigvecs(diag: np.ndarray, E: np.ndarray):
    """Eigenvectors for eigenvalues E (B, K); returns array (B, K, n) of unit vectors.

    psi(k) is proportional to f_{[1,k-1]} left of the twist site and to
    f_{[k+1,n]} right of it; the twist is where the product peaks.
    """
    diag = np.atleast_2d(np.asarray(diag, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    return _kernels.twisted_vectors(np.ascontiguousarray(diag), np.ascontiguousarray(E))


def tridiag_eigvecs_reference(diag: np.ndarray, E: np.ndarray):
    """Vectorized numpy version of :func:`tridiag_eigvecs` (kept as an oracle)."""
    diag = np.atleast_2d(np.asarray(diag, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    B, n = diag.shape
    fm, fl, bm, bl = _det_sequences(diag, E)
    left = _logabs(fm[:n], fl[:n])  # |f_{[1,k-1]}| at site k (0-based k)
    right = _logabs(bm, bl)  # |f_{[k+1,n]}|
    twist = np.argmax(left + right, axis=0)  # (B, K)
    ks = np.arange(n)[:, None, None]
    lc = np.take_along_axis(left, twist[None], 0)
    rc = np.take_along_axis(right, twist[None], 0)
    sl = np.sign(np.take_along_axis(fm[:n], twist[None], 0))
    sr = np.sign(np.take_along_axis(bm, twist[None], 0))
    with np.errstate(under="ignore"):
        vl = np.sign(fm[:n]) * sl * np.exp(np.minimum(left - lc, 0.0))
        vr = np.sign(bm) * sr * np.exp(np.minimum(right - rc, 0.0))
    v = np.where(ks <= twist[None], vl, vr)
    v = np.moveaxis(v, 0, -1)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return v


def tridiag_residual(diag, E, vecs):
    """||(H - E) psi|| for each eigenpair."""
    hv = diag[:, None, :] * vecs - E[..., None] * vecs
    hv[..., 1:] -= vecs[..., :-1]
    hv[..., :-1] -= vecs[..., 1:]
    return np.linalg.norm(hv, axis=-1)


def _inverse_iteration(d, E, steps=3):
    n = d.size
    H = np.diag(d) - np.eye(n, k=1) - np.eye(n, k=-1)
    shift = E + 1e-13 * (1 + abs(E))
    v = np.ones(n) / np.sqrt(n)
    for _ in range(steps):
        v = np.linalg.solve(H - shift * np.eye(n), v)
        v /= np.linalg.norm(v)
    return v


def eigpairs(diag: np.ndarray, E: np.ndarray, rtol_scale: np.ndarray):
    """Vectors plus residuals, with inverse-iteration repair of any bad pair."""
    vecs = tridiag_eigvecs(diag, E)
    res = tridiag_residual(diag, E, vecs)
    bad = np.argwhere(res > rtol_scale)
    for b, k in bad:
        v = _inverse_iteration(diag[b], E[b, k])
        v *= np.sign(v[np.argmax(np.abs(v))])
        vecs[b, k] = v
    if bad.size:
        log.debug("inverse iteration repaired %d eigenvectors", len(bad))
        res = tridiag_residual(diag, E, vecs)
    return vecs, res


# ---------------------------------------------------------------------------
# public API


def _window(window) -> tuple[int, int]:
    a, b = (int(window[0]), int(window[1]))
    if b < a:
        raise ValueError("window must contain at least one site")
    return a, b


def dirichlet_eigs(pot: Potential, x: float, omega: float, window, vectors: bool = False,
                   tol: float = 1e-12) -> SpectrumSample:
    """All eigenvalues (and optionally eigenvectors) of H restricted to window with zero BC."""
    a, b = _window(window)
    diag = site_potential(pot, np.array([x]), omega, a, b)
    eigs = tridiag_eigvals(diag, tol)
    out = SpectrumSample(float(x), b - a + 1, "dirichlet", (a, b), eigs[0])
    if vectors:
        vecs, res = eigpairs(diag, eigs, residual_scale(pot, eigs))
        out.vecs = vecs[0]
        out.residuals = res[0]
        out.centers = a + np.argmax(np.abs(vecs[0]), axis=-1)
    return out


def eigenvector(pot: Potential, x: float, omega: float, window, E_j: float) -> np.ndarray:
    a, b = _window(window)
    diag = site_potential(pot, np.array([x]), omega, a, b)
    if b > a:
        near = tridiag_eigvals(diag, 1e-12)[0]
        gaps = np.abs(near - E_j)
        order = np.argsort(gaps)
        if gaps[order[1]] < 1e-13:
            raise DegenerateError("two eigenvalues within 1e-13")
    vecs, _ = eigpairs(diag, np.array([[E_j]]), residual_scale(pot, np.array([[E_j]])))
    return vecs[0, 0]


def localization_center(vec) -> int:
    """Index of the largest |psi(n)| (first on ties)."""
    v = np.abs(np.asarray(vec))
    if not np.any(v):
        raise ValueError("zero vector has no center")
    return int(np.argmax(v))


def decay_profile(vec, center: int) -> tuple[float, float]:
    """Least-squares slope of log|psi| against distance from center, and max deviation."""
    v = np.abs(np.asarray(vec, dtype=complex))
    n = np.arange(v.size)
    keep = (v > 1e-14) & (n != center)
    dist = np.abs(n - center)[keep].astype(float)
    y = np.log(v[keep])
    if dist.size < 2 or np.ptp(dist) == 0:
        return 0.0, 0.0
    A = np.vstack([dist, np.ones_like(dist)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    dev = float(np.max(np.abs(A @ coef - y)))
    return float(coef[0]), dev


def feynman_slope(pot: Potential, x, omega: float, a: int, vecs) -> np.ndarray:
    """d/dx E_j = sum_n V'(x + n omega) |psi_j(n)|^2 for vectors (..., K, n)."""
    x = np.asarray(x, dtype=float)
    n = np.arange(a, a + vecs.shape[-1])
    vp = deriv_phase(pot, x[..., None] + n * omega)
    return np.einsum("...n,...kn->...k", vp, np.abs(vecs) ** 2)


# ---------------------------------------------------------------------------
# periodic problems


def _log_trace_parts(diag, E):
    """log|.| and sign of f_{[1,n]} and f_{[2,n-1]} for real arrays diag (B, n), E (B, K)."""
    n = diag.shape[-1]

    def run(lo, hi):
        f1 = np.ones(E.shape)
        f0 = np.zeros(E.shape)
        acc = np.zeros(E.shape)
        for k in range(lo, hi):
            fn = (diag[:, k, None] - E) * f1 - f0
            top = np.maximum(np.abs(fn), np.abs(f1))
            _, ex = np.frexp(np.where(top > 0, top, 1.0))
            f1, f0 = np.ldexp(fn, -ex), np.ldexp(f1, -ex)
            acc = acc + ex * np.log(2.0)
        return f1, acc

    return run(0, n), run(1, n - 1)


def hill_real(diag, E):
    """h_n(E) = f_{[1,n]} - f_{[2,n-1]} as (mantissa, log-scale) pairs, real case."""
    (m1, l1), (m2, l2) = _log_trace_parts(diag, E)
    top = np.maximum(l1, l2)
    with np.errstate(under="ignore"):
        return m1 * np.exp(l1 - top) - m2 * np.exp(l2 - top), top


def _g_value(diag, E, target):
    m, l = hill_real(diag, E)
    with np.errstate(over="ignore"):
        big = l > 700
        val = np.where(big, np.sign(m) * np.inf, m * np.exp(np.minimum(l, 700)))
    val = np.where(np.isnan(val), 0.0, val)
    return val - target


def periodic_matrix(diag, sign: int = +1) -> np.ndarray:
    n = diag.size
    H = np.diag(diag) - np.eye(n, k=1) - np.eye(n, k=-1)
    H[0, n - 1] += -1.0 if sign > 0 else 1.0
    H[n - 1, 0] += -1.0 if sign > 0 else 1.0
    return H


def jacobi_eigvalsh(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations (round-robin order)."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    m = n + (n % 2)
    players = list(range(m))
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= tol * scale:
            break
        for _r in range(m - 1):
            pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
            pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
            p = np.array([pq[0] for pq in pairs])
            q = np.array([pq[1] for pq in pairs])
            apq = A[p, q]
            app, aqq = A[p, p], A[q, q]
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = (aqq - app) / (2 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta**2 + 1))
            t = np.where(apq == 0, 0.0, np.where(theta == 0, 1.0, t))
            c = 1 / np.sqrt(t**2 + 1)
            s = t * c
            J = np.eye(n)
            J[p, p] = c
            J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
            players = [players[0]] + [players[-1]] + players[1:-1]
    return np.sort(A.diagonal())


def periodic_count(diag: np.ndarray, E: np.ndarray, sign: int = +1) -> np.ndarray:
    """Number of (anti)periodic eigenvalues below E.

    Inertia of the cyclic matrix equals the Sturm count of the first n-1 sites
    plus the sign of the Schur complement of the last site.  The Schur
    complement has the same zeros as h_n(E) -/+ 2 and is strictly decreasing
    between its poles, so the count is monotone and exact up to rounding.
    """
    diag = np.asarray(diag, dtype=float)
    E = np.asarray(E, dtype=float)
    n = diag.shape[-1]
    corner = -1.0 if sign > 0 else 1.0
    cnt = np.zeros(E.shape, dtype=np.int64)
    q = np.full(E.shape, np.inf)
    logf = np.zeros(E.shape)
    sgnf = np.ones(E.shape)
    for k in range(n - 1):
        q = (diag[..., k, None] - E) - 1.0 / q
        q = np.where(np.abs(q) < _PIVMIN, -_PIVMIN, q)
        cnt += q < 0
        logf += np.log(np.abs(q))
        sgnf *= np.sign(q)
    r = np.full(E.shape, np.inf)
    for k in range(n - 2, -1, -1):
        r = (diag[..., k, None] - E) - 1.0 / r
        r = np.where(np.abs(r) < _PIVMIN, -_PIVMIN, r)
    g11 = 1.0 / r
    gnn = 1.0 / q
    with np.errstate(over="ignore", under="ignore"):
        g1n = sgnf * np.exp(-logf)
    schur = (diag[..., n - 1, None] - E) - g11 + 2 * corner * g1n - gnn
    return cnt + (schur < 0)


def periodic_eig_batch(diag: np.ndarray, sign: int = +1, tol: float = 1e-12) -> np.ndarray:
    """Periodic (+) or antiperiodic (-) eigenvalues, batched over rows of diag (B, n)."""
    diag = np.atleast_2d(np.asarray(diag, dtype=float))
    B, n = diag.shape
    if n < 2:
        raise ValueError("periodic problems need at least two sites")
    corner = -1.0 if sign > 0 else 1.0
    return _kernels.bisect_all(np.ascontiguousarray(diag), tol, True, corner)


def hill_minus_target(diag, E, sign: int = +1):
    """g = h_n(E) -/+ 2 evaluated through the determinant recursion (may be huge)."""
    return _g_value(np.atleast_2d(diag), np.atleast_2d(E), 2.0 if sign > 0 else -2.0)


def periodic_eigs(pot: Potential, x: float, omega: float, N: int, sign: int = +1,
                  crosscheck: bool = True, tol: float = 1e-7) -> SpectrumSample:
    """Eigenvalues of the N-site window [1, N] with (anti)periodic boundary conditions."""
    if N < 2:
        raise ValueError("N must be at least 2")
    diag = site_potential(pot, np.array([x]), omega, 1, N)
    eigs = periodic_eig_batch(diag, sign)[0]
    if crosscheck:
        ref = jacobi_eigvalsh(periodic_matrix(diag[0], sign))
        err = float(np.max(np.abs(ref - eigs)))
        if err > tol:
            raise CrossCheckError(f"periodic roots and dense solve differ by {err:.3e}")
    bc = "periodic" if sign > 0 else "antiperiodic"
    return SpectrumSample(float(x), N, bc, (1, N), eigs)
