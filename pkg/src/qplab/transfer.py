"""Transfer cocycle, log-scaled products and determinant recursions.

The one-step matrix at site n is [[V(z e(n w)) - E, -1], [1, 0]].  Products are
carried in QR form so that both singular directions keep full relative
precision; this keeps the determinant measurable over 10^5 steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import MismatchError, SingularError
from .model import Potential, e

LN2 = float(np.log(2.0))


# ---------------------------------------------------------------------------
# value types


def opnorm2(m):
    """Operator 2-norm of (..., 2, 2) matrices in closed form."""
    m = np.asarray(m)
    fro2 = np.sum(np.abs(m) ** 2, axis=(-2, -1))
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    disc = np.sqrt(np.maximum(fro2**2 - 4 * np.abs(det) ** 2, 0.0))
    return np.sqrt((fro2 + disc) / 2)


def random_sl2(rng: np.random.Generator, n: int, spread: float = 3.0) -> np.ndarray:
    """n real 2x2 matrices of determinant one, with log-normal singular values."""
    a = rng.normal(size=(n, 2, 2)) * np.exp(spread * rng.uniform(-1, 1, size=(n, 1, 1)))
    d = np.linalg.det(a)
    a[np.abs(d) < 1e-12] += np.eye(2)
    d = np.linalg.det(a)
    a[d < 0, :, 0] *= -1  # flip a column to make the determinant positive
    return a / np.sqrt(np.abs(np.linalg.det(a)))[:, None, None]


def trace_bound_slack(m) -> tuple[np.ndarray, np.ndarray]:
    """Slacks of ||M^2|| - 4 <= ||M|| |tr M| <= ||M^2|| + 2 for M in SL(2, R).

    Returns (lower, upper); both are nonnegative when the bounds hold.
    """
    m = np.asarray(m, float)
    n1 = opnorm2(m)
    n2 = opnorm2(m @ m)
    mid = n1 * np.abs(np.trace(m, axis1=-2, axis2=-1))
    return mid - (n2 - 4), (n2 + 2) - mid


@dataclass(frozen=True)
class ScaledMatrix2:
    """Matrix e^{logscale} * u with 1 <= ||u|| < 2; arrays broadcast over a batch."""

    u: np.ndarray
    logscale: np.ndarray
    logdet: np.ndarray | None = None  # complex log of the determinant, when tracked

    @classmethod
    def from_matrix(cls, m) -> "ScaledMatrix2":
        m = np.asarray(m, dtype=complex)
        nrm = opnorm2(m)
        if np.any(nrm == 0):
            raise ValueError("zero matrix has no log-scaled form")
        _, ex = np.frexp(nrm)  # nrm = mant * 2**ex with mant in [0.5, 1)
        ex = ex - 1
        u = np.ldexp(m.real, -ex[..., None, None]) + 1j * np.ldexp(m.imag, -ex[..., None, None])
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        with np.errstate(divide="ignore"):
            logdet = np.log(det.astype(complex))
        return cls(u, ex * LN2, logdet)

    def lognorm(self):
        return self.logscale + np.log(opnorm2(self.u))

    def det(self):
        if self.logdet is not None:
            return np.exp(self.logdet)
        u = self.u
        du = u[..., 0, 0] * u[..., 1, 1] - u[..., 0, 1] * u[..., 1, 0]
        return du * np.exp(2 * self.logscale)

    def matrix(self):
        return self.u * np.exp(self.logscale)[..., None, None]

    def trace(self) -> "LogComplex":
        return LogComplex.from_value(self.u[..., 0, 0] + self.u[..., 1, 1]).shift(self.logscale)

    def entry(self, i, j) -> "LogComplex":
        return LogComplex.from_value(self.u[..., i, j]).shift(self.logscale)

    def __matmul__(self, other: "ScaledMatrix2") -> "ScaledMatrix2":
        prod = ScaledMatrix2.from_matrix(self.u @ other.u)
        logdet = None
        if self.logdet is not None and other.logdet is not None:
            logdet = self.logdet + other.logdet
        return ScaledMatrix2(prod.u, prod.logscale + self.logscale + other.logscale, logdet)


@dataclass(frozen=True)
class LogComplex:
    """Complex number phase * exp(mag); mag = -inf encodes an exact zero."""

    mag: np.ndarray
    phase: np.ndarray

    @classmethod
    def from_value(cls, v) -> "LogComplex":
        v = np.asarray(v, dtype=complex)
        a = np.abs(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.log(a)
            phase = np.where(a > 0, v / np.where(a > 0, a, 1), 1.0 + 0j)
        return cls(mag, phase)

    def shift(self, dlog) -> "LogComplex":
        return LogComplex(self.mag + dlog, self.phase)

    def value(self):
        with np.errstate(over="ignore"):
            return self.phase * np.exp(self.mag)

    @property
    def real_sign(self):
        return np.where(np.isneginf(self.mag), 0.0, np.sign(self.phase.real))

    def __getitem__(self, idx) -> "LogComplex":
        return LogComplex(np.asarray(self.mag)[idx], np.asarray(self.phase)[idx])

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex(self.mag + other.mag, self.phase * other.phase)

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex(self.mag - other.mag, self.phase / other.phase)

    def __neg__(self) -> "LogComplex":
        return LogComplex(self.mag, -self.phase)

    def __add__(self, other: "LogComplex") -> "LogComplex":
        return lc_sum(self, other)

    def __sub__(self, other: "LogComplex") -> "LogComplex":
        return lc_sum(self, -other)


def lc_sum(a: LogComplex, b: LogComplex) -> LogComplex:
    am, bm = np.broadcast_arrays(np.asarray(a.mag, float), np.asarray(b.mag, float))
    top = np.maximum(am, bm)
    finite = np.isfinite(top)
    ref = np.where(finite, top, 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        s = a.phase * np.exp(am - ref) + b.phase * np.exp(bm - ref)
    out = LogComplex.from_value(s)
    mag = np.where(finite, out.mag + ref, -np.inf)
    return LogComplex(mag, out.phase)


def lc_const(c, like=None) -> LogComplex:
    v = LogComplex.from_value(c)
    if like is not None:
        shape = np.shape(like.mag)
        v = LogComplex(np.broadcast_to(v.mag, shape), np.broadcast_to(v.phase, shape))
    return v


# ---------------------------------------------------------------------------
# site values


def site_fn(pot: Potential, z, omega: float, E):
    """Return n -> V(z e(n omega)) - E, broadcasting z against E."""
    z = np.asarray(z, dtype=complex)
    pot.check_annulus(z)
    E = np.asarray(E, dtype=complex)
    z, E = np.broadcast_arrays(z, E)
    z = z.copy()
    E = E.copy()

    def d(n):
        return pot.eval(z * e(n * omega), check=False) - E

    return d


def site_deriv_z(pot: Potential, z, omega: float):
    """Return n -> d/dz V(z e(n omega))."""
    z = np.asarray(z, dtype=complex)

    def dd(n):
        w = e(n * omega)
        return pot.deriv_z(z * w) * w

    return dd


def transfer_step(pot: Potential, z, omega: float, E, n: int):
    v = pot.eval(complex(z) * complex(e(n * omega)))
    return np.array([[v - E, -1.0], [1.0, 0.0]], dtype=complex)


# ---------------------------------------------------------------------------
# monodromy products


def qr_product(d_fn, a: int, b: int, checkpoints=None, chunk: int = 1024):
    """Ordered product A_b ... A_a of [[d_n, -1], [1, 0]] in QR form.

    ``d_fn(n)`` returns the batch of diagonal entries at site n.  With
    ``checkpoints`` (site indices in [a, b]) the partial products ending at
    each checkpoint are returned as a list.
    """
    if b < a:
        raise ValueError("need a <= b")
    stops = np.array([b] if checkpoints is None else sorted(int(c) for c in checkpoints), np.int64)
    if stops[0] < a:
        raise ValueError("checkpoints must not precede a")
    shape = np.shape(d_fn(a))
    B = int(np.prod(shape))
    state_c = np.zeros((6, B), complex)
    state_r = np.zeros((2, B))
    res_c = np.zeros((stops.size, 6, B), complex)
    res_r = np.zeros((stops.size, 2, B))
    last = int(stops[-1])
    start = a
    while start <= last:
        end = min(last, start + chunk - 1)
        rows = np.arange(start, end + 1)
        dvals = np.empty((rows.size, B), complex)
        for i, n in enumerate(rows):
            dvals[i] = np.broadcast_to(d_fn(int(n)), shape).ravel()
        sel = np.nonzero((stops >= start) & (stops <= end))[0]
        _kernels.qr_chunk(dvals, state_c, state_r, start == a, stops[sel] - start, res_c, res_r, sel)
        start = end + 1
    out = []
    for i in range(stops.size):
        parts = [res_c[i, j].reshape(shape) for j in range(6)] + [res_r[i, j].reshape(shape) for j in range(2)]
        out.append(_assemble(*parts))
    return out if checkpoints is not None else out[0]


def _assemble(q00, q01, q10, q11, bh, dh, s, t):
    with np.errstate(under="ignore"):
        lo = np.exp(t - s) * dh
    r = np.stack([np.stack([np.ones_like(bh), bh], -1), np.stack([np.zeros_like(bh), lo], -1)], -2)
    q = np.stack([np.stack([q00, q01], -1), np.stack([q10, q11], -1)], -2)
    m = ScaledMatrix2.from_matrix(q @ r)
    detq = q00 * q11 - q01 * q10
    logdet = np.log(detq) + s + t + np.log(dh)
    return ScaledMatrix2(m.u, m.logscale + s, logdet)


def monodromy(pot: Potential, a: int, b: int, z, omega: float, E, checkpoints=None):
    """M_{[a,b]} = A_b ... A_a evaluated at phase variable z (arrays broadcast).

    With ``checkpoints`` the partial products ending at each listed site are
    returned as a list (one pass over the lattice).
    """
    return qr_product(site_fn(pot, z, omega, E), a, b, checkpoints)


# ---------------------------------------------------------------------------
# determinant recursions


def _rescale(*vals):
    top = np.abs(vals[0])
    for v in vals[1:]:
        top = np.maximum(top, np.abs(v))
    _, ex = np.frexp(np.where(top > 0, top, 1.0))
    ex = ex - 1
    scaled = tuple(np.ldexp(v.real, -ex) + 1j * np.ldexp(v.imag, -ex) if np.iscomplexobj(v)
                   else np.ldexp(v, -ex) for v in vals)
    return scaled, ex * LN2


def det_recursion(d_fn, a: int, b: int, dd_fn=None, sequence=False):
    """Three-term recursion f_{[a,n]} = d_n f_{[a,n-1]} - f_{[a,n-2]}.

    Returns LogComplex f_{[a,b]} (b >= a - 2).  With ``dd_fn`` the logarithmic
    derivative f'/f is returned as well.  With ``sequence`` the values for
    n = a-1 .. b are stacked along a new leading axis.
    """
    if b < a - 2:
        raise ValueError("need b >= a - 2")
    shape = np.shape(d_fn(a))
    if b == a - 2:
        z = LogComplex(np.full(shape, -np.inf), np.ones(shape, complex))
        return (z, np.full(shape, np.nan + 0j)) if dd_fn is not None else z
    f1 = np.ones(shape, complex)  # f_{[a,n-1]}
    f0 = np.zeros(shape, complex)  # f_{[a,n-2]}
    g1 = np.zeros(shape, complex)
    g0 = np.zeros(shape, complex)
    logs = np.zeros(shape)
    seq_m, seq_l = [f1.copy()], [logs.copy()]
    for n in range(a, b + 1):
        dn = d_fn(n)
        fn = dn * f1 - f0
        if dd_fn is not None:
            gn = dn * g1 + dd_fn(n) * f1 - g0
            (fn, f1s, gn, g1s), sh = _rescale(fn, f1, gn, g1)
            f1, f0, g1, g0 = fn, f1s, gn, g1s
        else:
            (fn, f1s), sh = _rescale(fn, f1)
            f1, f0 = fn, f1s
        logs = logs + sh
        if sequence:
            seq_m.append(f1.copy())
            seq_l.append(logs.copy())
    if sequence:
        m = np.stack(seq_m)
        lg = np.stack(seq_l)
        lc = LogComplex.from_value(m)
        return LogComplex(lc.mag + lg, lc.phase)
    lc = LogComplex.from_value(f1).shift(logs)
    if dd_fn is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            return lc, g1 / f1
    return lc


def dirichlet_det(pot: Potential, a: int, b: int, z, omega: float, E) -> LogComplex:
    """f_{[a,b]}(z, omega, E); f_{[a,a-1]} = 1 and f_{[a,a-2]} = 0."""
    return det_recursion(site_fn(pot, z, omega, E), a, b)


def entry_quadruple(pot: Potential, z, omega: float, E, N: int):
    """(f_{[1,N]}, f_{[1,N-1]}, f_{[2,N]}, f_{[2,N-1]})."""
    if N < 1:
        raise ValueError("N must be positive")
    d = site_fn(pot, z, omega, E)
    s1 = det_recursion(d, 1, N, sequence=True)
    s2 = det_recursion(d, 2, N, sequence=True) if N >= 2 else None
    f1N, f1N1 = s1[N], s1[N - 1]
    if N >= 2:
        f2N, f2N1 = s2[N - 1], s2[N - 2]
    else:
        f2N = lc_const(1.0, f1N)
        f2N1 = LogComplex(np.full(np.shape(f1N.mag), -np.inf), np.ones(np.shape(f1N.mag), complex))
    return f1N, f1N1, f2N, f2N1


def unimodular_defect(quad) -> np.ndarray:
    """Relative defect of -f1N f2N1 + f1N1 f2N = 1, computed in log form."""
    f1N, f1N1, f2N, f2N1 = quad
    a, b = f1N1 * f2N, f1N * f2N1
    diff = (a - b) - lc_const(1.0, a)
    scale = np.maximum(np.maximum(a.mag, b.mag), 0.0)
    with np.errstate(under="ignore"):
        return np.exp(diff.mag - scale)


def hill_trace(pot: Potential, z, omega: float, E, N: int, rtol: float = 1e-8) -> LogComplex:
    """h_N = tr M_N = f_{[1,N]} - f_{[2,N-1]}, cross-checked against the product."""
    f1N, _, _, f2N1 = entry_quadruple(pot, z, omega, E, N)
    h_det = f1N - f2N1
    h_mat = monodromy(pot, 1, N, z, omega, E).trace()
    scale = np.maximum(f1N.mag, f2N1.mag)
    diff = h_det - h_mat
    with np.errstate(invalid="ignore"):
        rel = np.exp(np.where(np.isneginf(diff.mag), -np.inf, diff.mag - scale))
    if np.any(rel > rtol):
        raise MismatchError(f"trace routes disagree (relative {np.max(rel):.3e})")
    return h_det


def periodic_det(pot: Potential, z, omega: float, E, N: int, sign: int = +1) -> LogComplex:
    """g_N^{(+)} = h_N - 2 (periodic), g_N^{(-)} = h_N + 2 (antiperiodic)."""
    h = hill_trace(pot, z, omega, E, N)
    return h - lc_const(2.0 if sign > 0 else -2.0, h)


def green_window(pot: Potential, x: float, omega: float, E, a: int, b: int, k: int, m: int,
                 threshold: float = 1e-13) -> complex:
    """(H_{[a,b]}(x) - E)^{-1}(k, m) by Cramer's rule."""
    if k > m:
        k, m = m, k
    if not a <= k <= m <= b:
        raise ValueError("need a <= k, m <= b")
    d = site_fn(pot, e(x), omega, E)
    full = det_recursion(d, a, b)
    ref = det_recursion(d, a, b - 1)
    if full.mag - max(float(ref.mag), 0.0) < np.log(threshold):
        raise SingularError("E is (numerically) an eigenvalue of the window")
    left = det_recursion(d, a, k - 1)
    right = det_recursion(d, m + 1, b)
    return complex((left * right / full).value())


def green_entry(pot: Potential, x: float, omega: float, E, N: int, k: int, m: int) -> complex:
    """Green function entry of the window [1, N]."""
    return green_window(pot, x, omega, E, 1, N, k, m)
