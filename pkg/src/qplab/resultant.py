"""Resultants, discriminants and the shifted zero-separation experiment."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import RootFindingError
from .model import Potential, e
from .zerocount import det_in_z, locate_in_annulus

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Poly:
    """Polynomial with coefficients listed from the leading term down."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coeffs)
        if not c or c[0] == 0:
            raise ValueError("leading coefficient must be nonzero")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def from_roots(cls, roots, lead=1.0) -> "Poly":
        return cls(tuple(lead * np.poly(np.asarray(roots, complex))))

    def __call__(self, z):
        return np.polyval(np.array(self.coeffs), z)

    def deriv(self) -> "Poly":
        return Poly(tuple(np.polyder(np.array(self.coeffs))))

    def __mul__(self, other: "Poly") -> "Poly":
        return Poly(tuple(np.polymul(self.coeffs, other.coeffs)))

    def roots(self) -> np.ndarray:
        return poly_roots(self)


def _as_poly(p) -> Poly:
    return p if isinstance(p, Poly) else Poly(tuple(p))


def sylvester_matrix(p, q) -> np.ndarray:
    p, q = _as_poly(p), _as_poly(q)
    m, n = p.degree, q.degree
    S = np.zeros((m + n, m + n), dtype=complex)
    for i in range(n):
        S[i, i:i + m + 1] = p.coeffs
    for i in range(m):
        S[n + i, i:i + n + 1] = q.coeffs
    return S


def _lu_det(A: np.ndarray) -> complex:
    """Determinant by Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    det = 1.0 + 0j
    for k in range(n):
        piv = k + int(np.argmax(np.abs(A[k:, k])))
        if A[piv, k] == 0:
            return 0j
        if piv != k:
            A[[k, piv]] = A[[piv, k]]
            det = -det
        det *= A[k, k]
        A[k + 1:, k:] -= np.outer(A[k + 1:, k] / A[k, k], A[k, k:])
    return complex(det)


def sylvester_resultant(p, q) -> complex:
    """det of the Sylvester matrix; equals lead(p)^n lead(q)^m prod(z_i - w_j)."""
    p, q = _as_poly(p), _as_poly(q)
    if p.degree < 1 or q.degree < 1:
        raise ValueError("degrees must be at least 1")
    return _lu_det(sylvester_matrix(p, q))


def poly_roots(p, max_degree: int = 12, tol: float = 1e-8) -> np.ndarray:
    """Roots from the (balanced) companion matrix, with a relative residual check."""
    p = _as_poly(p)
    if p.degree > max_degree:
        raise RootFindingError(f"degree {p.degree} exceeds the oracle cap {max_degree}")
    if p.degree == 0:
        return np.array([], dtype=complex)
    r = np.roots(np.array(p.coeffs))
    scale = np.polyval(np.abs(np.array(p.coeffs)), np.abs(r))
    res = np.abs(p(r)) / np.maximum(scale, np.finfo(float).tiny)
    if np.any(res > tol):
        raise RootFindingError(f"companion residual {res.max():.2e} exceeds {tol}")
    return r


def root_product_resultant(p, q) -> complex:
    """lead(p)^deg q * lead(q)^deg p * prod over root pairs (z_i - w_j)."""
    p, q = _as_poly(p), _as_poly(q)
    zs, ws = poly_roots(p), poly_roots(q)
    prod = np.prod(zs[:, None] - ws[None, :]) if zs.size and ws.size else 1.0
    return complex(p.coeffs[0] ** q.degree * q.coeffs[0] ** p.degree * prod)


def discriminant(p) -> complex:
    """prod_{i != j} (z_i - z_j) for a monic polynomial of degree >= 2."""
    p = _as_poly(p)
    if p.degree < 2:
        raise ValueError("degree must be at least 2")
    if abs(p.coeffs[0] - 1) > 1e-14:
        raise ValueError("polynomial must be monic")
    z = poly_roots(p)
    diff = z[:, None] - z[None, :]
    off = ~np.eye(z.size, dtype=bool)
    return complex(np.prod(diff[off]))


def discriminant_via_resultant(p) -> complex:
    """Res(p, p') for monic p.

    Res(p, p') = prod_i p'(z_i) = prod_{i != j} (z_i - z_j), the same product as
    :func:`discriminant`; the textbook discriminant prod_{i<j} (z_i - z_j)^2
    differs from both by (-1)^{n(n-1)/2}.
    """
    p = _as_poly(p)
    if p.degree < 2:
        raise ValueError("degree must be at least 2")
    return sylvester_resultant(p, p.deriv())


def is_zero(v, scale: float = 1.0, tol: float = 1e-10) -> bool:
    return abs(v) <= tol * max(scale, 1.0)


# ---------------------------------------------------------------------------
# bivariate polynomials and Bezout counts


def _y_coeffs(c: np.ndarray, x: complex) -> np.ndarray:
    """Coefficients in y (leading first) of sum c[i, j] x^i y^j at fixed x."""
    xs = x ** np.arange(c.shape[0])
    col = xs @ c
    return col[::-1]


def _trim(col, tol=1e-14):
    col = np.asarray(col, complex)
    nz = np.nonzero(np.abs(col) > tol * max(1.0, np.max(np.abs(col))))[0]
    return col[nz[0]:] if nz.size else col[-1:]


def total_degree(c: np.ndarray) -> int:
    i, j = np.nonzero(np.abs(c) > 0)
    return int(np.max(i + j)) if i.size else 0


def common_zeros(f: np.ndarray, g: np.ndarray, tol: float = 1e-6):
    """Common zeros of bivariate polynomials f, g (coefficient grids c[i, j] of x^i y^j).

    x-coordinates are the roots of R(x) = Res_y(f, g)(x), recovered by sampling R
    on a circle and interpolating with the FFT; the y-coordinates are then
    matched between the roots of f(x0, .) and g(x0, .).
    """
    f = np.asarray(f, complex)
    g = np.asarray(g, complex)
    bound = total_degree(f) * total_degree(g)
    K = bound + 1
    rad = 1.0
    xs = rad * np.exp(2j * np.pi * np.arange(K) / K)
    vals = np.array([sylvester_resultant(_trim(_y_coeffs(f, x)), _trim(_y_coeffs(g, x)))
                     for x in xs])
    coef = np.fft.fft(vals) / K  # coef[k] multiplies (x / rad)^k
    coef = coef / rad ** np.arange(K)
    poly = _trim(coef[::-1], 1e-10)
    out = []
    if poly.size < 2:
        return out
    for x0 in np.roots(poly):
        yf = np.roots(_trim(_y_coeffs(f, x0)))
        for y0 in yf:
            gy = np.polyval(_trim(_y_coeffs(g, x0)), y0)
            sc = np.polyval(np.abs(_trim(_y_coeffs(g, x0))), abs(y0))
            if abs(gy) <= tol * max(sc, 1.0):
                if not any(abs(x0 - a) < 1e-7 and abs(y0 - b) < 1e-7 for a, b in out):
                    out.append((complex(x0), complex(y0)))
    return out


# ---------------------------------------------------------------------------
# zero separation


def zero_separation_experiment(pot: Potential, omega: float, E, l1: int, l2: int, t: int,
                               R1: float | None = None, R2: float | None = None) -> float:
    """Min distance between zeros of f_{[1,l1]}(z) and of z -> f_{[1,l2]}(z e(t omega)).

    Only zeros in the annulus R1 < |z| < R2 count; returns inf when either set is empty.
    """
    if not (l1 >= l2 >= 1 and t >= 0):
        raise ValueError("need l1 >= l2 >= 1 and t >= 0")
    R1 = 1 - pot.rho0 / 2 if R1 is None else R1
    R2 = 1 + pot.rho0 / 2 if R2 is None else R2
    f1, d1 = det_in_z(pot, omega, E, 1, l1)
    z1 = np.array(locate_in_annulus(f1, d1, R1, R2))
    if l2 == l1:
        z2 = z1
    else:
        f2, d2 = det_in_z(pot, omega, E, 1, l2)
        z2 = np.array(locate_in_annulus(f2, d2, R1, R2))
    if z1.size == 0 or z2.size == 0:
        return math.inf
    z2 = z2 * e(-t * omega)  # zeros of z -> f(z e(t omega)) are rotated back
    return float(np.min(np.abs(z1[:, None] - z2[None, :])))
