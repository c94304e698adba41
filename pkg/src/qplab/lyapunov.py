"""Finite-scale Lyapunov exponents and related diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import HypothesisError, OutOfAnnulus
from .model import Potential, e
from .transfer import LN2, ScaledMatrix2, monodromy, opnorm2


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    N: int
    y: float
    grid_size: int
    spread: float
    E: complex = 0.0

    def csv_row(self):
        E = self.E
        Es = repr(float(E.real)) if isinstance(E, complex) and E.imag == 0 else repr(E)
        return (Es, self.N, repr(float(self.y)), repr(self.value), repr(self.spread))


def phase_grid(grid_size: int, y: float = 0.0) -> np.ndarray:
    """Points e(x + iy) for equispaced x in [0, 1)."""
    x = np.arange(grid_size) / grid_size
    return e(x) * np.exp(-2 * np.pi * y)


def _check_y(pot: Potential, y: float):
    if abs(y) >= pot.rho0:
        raise OutOfAnnulus(f"|y| = {abs(y)} is not below rho0 = {pot.rho0}")
    pot.check_annulus(np.exp(-2 * np.pi * y))


def lognorms(pot: Potential, omega: float, E, N: int, y: float = 0.0, grid_size: int = 1024,
             checkpoints=None):
    """log ||M_N(e(x + iy), E)|| on the phase grid; shape (len(E), grid) per checkpoint."""
    _check_y(pot, y)
    z = phase_grid(grid_size, y)
    E = np.atleast_1d(np.asarray(E, dtype=complex))
    Z, EE = np.meshgrid(z, E)
    if checkpoints is None:
        return monodromy(pot, 1, N, Z, omega, EE).lognorm()
    return [m.lognorm() for m in monodromy(pot, 1, N, Z, omega, EE, checkpoints=checkpoints)]


def _mean(row) -> float:
    return math.fsum(row) / len(row)


def _std(row) -> float:
    m = _mean(row)
    return math.sqrt(math.fsum((v - m) ** 2 for v in row) / len(row))


def lyapunov_many(pot: Potential, omega: float, Es, N: int, y: float = 0.0,
                  grid_size: int = 1024) -> list[LyapunovEstimate]:
    """finite_lyapunov for several energies in one pass over the lattice."""
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    Es = np.atleast_1d(np.asarray(Es, dtype=complex))
    ln = lognorms(pot, omega, Es, N, y, grid_size) / N
    out = []
    for E, row in zip(Es, ln):
        row = [float(v) for v in row]
        out.append(LyapunovEstimate(_mean(row), N, float(y), grid_size, _std(row), complex(E)))
    return out


def finite_lyapunov(pot: Potential, omega: float, E, N: int, y: float = 0.0,
                    grid_size: int = 1024) -> LyapunovEstimate:
    """Phase average of N^{-1} log ||M_N||."""
    return lyapunov_many(pot, omega, [E], N, y, grid_size)[0]


# ---------------------------------------------------------------------------
# avalanche principle


class AvalancheResult(NamedTuple):
    expansion: float
    direct: float
    residual: float


def _single(m: ScaledMatrix2) -> ScaledMatrix2:
    u = np.asarray(m.u)
    if u.ndim != 2:
        raise ValueError("avalanche blocks must be single 2x2 matrices")
    return m


def avalanche_expand(blocks, mu: float, check: bool = True) -> AvalancheResult:
    """Compare log||A_n...A_1|| with the pairwise expansion of the avalanche principle."""
    blocks = [_single(b) for b in blocks]
    n = len(blocks)
    if n < 2:
        raise ValueError("need at least two blocks")
    singles = [float(b.lognorm()) for b in blocks]
    pairs = [blocks[j + 1] @ blocks[j] for j in range(n - 1)]
    pair_logs = [float(p.lognorm()) for p in pairs]
    if check:
        if not mu > n:
            raise HypothesisError(f"need mu > n (mu={mu}, n={n})")
        logmu = math.log(mu)
        for j, s in enumerate(singles):
            if s < logmu:
                raise HypothesisError(f"block {j} has norm below mu", j)
        for j in range(n - 1):
            if singles[j + 1] + singles[j] - pair_logs[j] >= 0.5 * logmu:
                raise HypothesisError(f"pair ({j}, {j + 1}) violates the angle condition", j)
    total = blocks[0]
    for b in blocks[1:]:
        total = b @ total
    direct = float(total.lognorm())
    expansion = math.fsum(pair_logs) - math.fsum(singles[1:-1])
    return AvalancheResult(expansion, direct, _unit_residual(blocks))


def _unit_residual(blocks) -> float:
    """|direct - expansion| with the block log-scales cancelled symbolically.

    Each log-scale enters direct once and the expansion once (two pairs minus
    one single), so only the bounded unit parts u_j need combining.  The
    running product of the u_j is renormalized by exact powers of two.
    """
    us = [np.asarray(b.u, complex) for b in blocks]
    terms = [-math.log(float(opnorm2(us[j + 1] @ us[j]))) for j in range(len(us) - 1)]
    terms += [math.log(float(opnorm2(u))) for u in us[1:-1]]
    acc, shift = us[0], 0
    for u in us[1:]:
        acc = u @ acc
        ex = math.frexp(float(opnorm2(acc)))[1] - 1
        acc = np.ldexp(acc.real, -ex) + 1j * np.ldexp(acc.imag, -ex)
        shift += ex
    terms += [math.log(float(opnorm2(acc))), shift * LN2]
    return abs(math.fsum(terms))


# ---------------------------------------------------------------------------
# convergence and deviation diagnostics


class RateProbe(NamedTuple):
    L_n: float
    L_2n: float
    L_4n: float
    defect: float
    second_difference: float
    subadditivity: float


def rate_convergence_probe(pot: Potential, omega: float, E, n: int,
                           grid_size: int = 1024) -> RateProbe:
    """L_n, L_2n, L_4n and the disagreement of the extrapolants 2L_2n - L_n and 2L_4n - L_2n."""
    if n < 32:
        raise ValueError("n must be at least 32")
    rows = lognorms(pot, omega, [E], 4 * n, 0.0, grid_size, checkpoints=[n, 2 * n, 4 * n])
    Ls = [_mean([float(v) for v in r[0]]) / k for r, k in zip(rows, (n, 2 * n, 4 * n))]
    L1, L2, L4 = Ls
    defect = abs((2 * L2 - L1) - (2 * L4 - L2))
    return RateProbe(L1, L2, L4, defect, abs(L1 - 2 * L2 + L4), L1 - L4)


def deviation_profile(pot: Potential, omega: float, E, N: int, H_list,
                      grid_size: int = 1024) -> list[tuple[float, float]]:
    """Grid fraction of phases with |log||M_N|| - N L_N| > H, for each H."""
    if grid_size < 256:
        raise ValueError("grid_size must be at least 256")
    row = [float(v) for v in lognorms(pot, omega, [E], N, 0.0, grid_size)[0]]
    mean = _mean(row)
    dev = np.abs(np.array(row) - mean)
    return [(float(H), float(np.count_nonzero(dev > H)) / grid_size) for H in H_list]


def uniform_upper_probe(pot: Potential, omega: float, E, N: int, grid_size: int = 1024) -> float:
    """sup over the grid of log||M_N|| - N L_N."""
    if grid_size < 256:
        raise ValueError("grid_size must be at least 256")
    row = [float(v) for v in lognorms(pot, omega, [E], N, 0.0, grid_size)[0]]
    return max(row) - _mean(row)
