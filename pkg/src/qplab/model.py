"""Trigonometric-polynomial potentials and frequency utilities."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import OutOfAnnulus, RationalInput

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0


def e(x):
    """Unit-circle exponential exp(2*pi*i*x)."""
    return np.exp(2j * np.pi * np.asarray(x))


@dataclass(frozen=True)
class Potential:
    """V(z) = sum_k a_k z^k, analytic on the annulus 1 - rho0 < |z| < 1 + rho0.

    ``coeffs`` is stored as a sorted tuple of (k, a_k) pairs with a_{-k} = conj(a_k).
    """

    coeffs: tuple = ()
    rho0: float = 0.5

    def __post_init__(self):
        items = dict(self.coeffs) if not isinstance(self.coeffs, dict) else dict(self.coeffs)
        clean = {}
        for k, a in items.items():
            a = complex(a)
            if a != 0:
                clean[int(k)] = a
        scale = sum(abs(a) for a in clean.values()) or 1.0
        for k, a in clean.items():
            b = clean.get(-k, 0j)
            if abs(b - a.conjugate()) > 1e-12 * scale:
                raise ValueError(f"coefficients are not Hermitian at k={k}")
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        object.__setattr__(self, "coeffs", tuple(sorted(clean.items())))

    # -- basic quantities -------------------------------------------------
    @property
    def degree(self) -> int:
        return max((abs(k) for k, _ in self.coeffs), default=0)

    @property
    def coeff_l1(self) -> float:
        return float(sum(abs(a) for _, a in self.coeffs))

    @property
    def sup_norm(self) -> float:
        """Upper bound for sup |V| on the unit circle (sum of |a_k|)."""
        return self.coeff_l1

    @property
    def lipschitz(self) -> float:
        """Upper bound for sup |d/dx V(e(x))|."""
        return float(sum(2 * np.pi * abs(k) * abs(a) for k, a in self.coeffs))

    @property
    def phase_constant(self) -> float:
        """C(V) = sup|V'| + 1, the phase-motion constant for eigenvalues."""
        return self.lipschitz + 1.0

    def is_constant(self) -> bool:
        return all(k == 0 for k, _ in self.coeffs)

    # -- evaluation -------------------------------------------------------
    def check_annulus(self, z):
        r = np.abs(np.asarray(z))
        if np.any(r <= 1 - self.rho0) or np.any(r >= 1 + self.rho0):
            raise OutOfAnnulus(f"|z| outside ({1 - self.rho0}, {1 + self.rho0})")

    def eval(self, z, check=True):
        z = np.asarray(z, dtype=complex)
        if check:
            self.check_annulus(z)
        out = np.zeros(z.shape, dtype=complex)
        for k, a in self.coeffs:
            out = out + a * z**k
        return out if out.ndim else complex(out)

    def eval_phase(self, x):
        """Real values V(e(x)) for real phases x."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for k, a in self.coeffs:
            if k < 0:
                continue
            if k == 0:
                out = out + a.real
            else:
                ang = 2 * np.pi * k * x
                out = out + 2 * (a.real * np.cos(ang) - a.imag * np.sin(ang))
        return out if out.ndim else float(out)

    def deriv_z(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for k, a in self.coeffs:
            if k != 0:
                out = out + k * a * z ** (k - 1)
        return out

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {"coeffs": [[k, a.real, a.imag] for k, a in self.coeffs], "rho0": self.rho0}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Potential":
        coeffs = {int(k): complex(re, im) for k, re, im in d["coeffs"]}
        return cls(tuple(coeffs.items()), float(d.get("rho0", 0.5)))

    @classmethod
    def from_json(cls, s: str) -> "Potential":
        return cls.from_dict(json.loads(s))


def make_amo(lam: float, rho0: float = 0.5) -> Potential:
    """Almost Mathieu potential 2*lam*cos(2*pi*x)."""
    lam = float(lam)
    if not math.isfinite(lam):
        raise ValueError("lambda must be finite")
    return Potential(((1, lam), (-1, lam)), rho0)


def constant(c: float, rho0: float = 0.5) -> Potential:
    return Potential(((0, complex(c)),), rho0)


def deriv_phase(pot: Potential, x):
    """d/dx V(e(x)) for real x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for k, a in pot.coeffs:
        if k <= 0:
            continue
        ang = 2 * np.pi * k * x
        # derivative of 2 Re(a e(kx))
        out = out - 4 * np.pi * k * (a.real * np.sin(ang) + a.imag * np.cos(ang))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# frequencies


@dataclass(frozen=True)
class Frequency:
    omega: float
    quotients: tuple
    convergents: tuple  # (p_k, q_k) pairs
    dioph: tuple | None = field(default=None)

    @property
    def denominators(self) -> list[int]:
        return [q for _, q in self.convergents]


# Partial quotients beyond this size only reflect the binary rounding of omega.
_ARTIFACT_QUOTIENT = 10**8


def _expand(omega: float, depth: int):
    rem = Fraction(omega)
    quotients, convergents = [], []
    p_prev, q_prev, p, q = 1, 0, 0, 1  # convergents p_{-1}/q_{-1}, p_0/q_0
    for _ in range(depth):
        if rem == 0:
            break
        inv = 1 / rem
        a = int(inv)
        if a > _ARTIFACT_QUOTIENT:
            break
        rem = inv - a
        quotients.append(a)
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        convergents.append((p, q))
    return quotients, convergents


def continued_fraction(omega: float, depth: int) -> Frequency:
    """Partial quotients a_1..a_depth of omega and convergents p_k/q_k."""
    if not 0 < omega < 1:
        raise ValueError("omega must lie in (0, 1)")
    if depth > 40 or depth < 1:
        raise ValueError("depth must lie in [1, 40]")
    quotients, convergents = _expand(omega, depth)
    if len(quotients) < depth:
        raise RationalInput(f"expansion of {omega} terminates at depth {len(quotients)}")
    return Frequency(float(omega), tuple(quotients), tuple(convergents))


def frac_dist(x):
    """Distance to the nearest integer."""
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.round(x))


def min_shift_distance(omega: float, N: int) -> tuple[float, int]:
    """Smallest ||t*omega|| over 1 <= t <= N, with the attaining t."""
    if N < 1:
        raise ValueError("N must be positive")
    t = np.arange(1, N + 1)
    d = frac_dist(t * omega)
    i = int(np.argmin(d))  # argmin returns the first minimum, i.e. smallest t
    return float(d[i]), int(t[i])


def find_shift_hitting_interval(omega: float, y1: float, y2: float, m_lo: int, m_hi: int,
                                chunk: int = 1 << 16):
    """Smallest m in [m_lo, m_hi] with frac(m*omega) in (y1, y2), or None."""
    if not (0 <= y1 < y2 <= 1) or m_lo > m_hi:
        raise ValueError("need 0 <= y1 < y2 <= 1 and m_lo <= m_hi")
    start = m_lo
    while start <= m_hi:
        m = np.arange(start, min(m_hi, start + chunk - 1) + 1)
        f = np.mod(m * omega, 1.0)
        hit = np.nonzero((f > y1) & (f < y2))[0]
        if hit.size:
            return int(m[hit[0]])
        start += chunk
    return None


def parse_omega(text) -> float:
    s = str(text).strip().lower()
    if s == "golden":
        return GOLDEN
    if s == "silver":
        return SILVER
    w = float(s)
    if not 0 < w < 1:
        raise ValueError("omega must lie in (0, 1)")
    return w


def fibonacci_denominators(omega: float, lo: int, count: int) -> list[int]:
    """First ``count`` continued-fraction denominators of omega exceeding lo."""
    _, convergents = _expand(omega, 40)
    return [q for _, q in convergents if q > lo][:count]
