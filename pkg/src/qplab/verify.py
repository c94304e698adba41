"""Quick identity and property suite run by ``qplab verify``.

Each check is a self-contained task seeded from (seed, check name), so results
do not depend on how tasks are spread over threads.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .eigen import periodic_eig_batch, periodic_matrix, site_potential, tridiag_eigvals
from .model import GOLDEN, Potential, constant, make_amo
from .parallel import run_tasks
from .resultant import Poly, is_zero, root_product_resultant, sylvester_resultant
from .transfer import (
    entry_quadruple,
    monodromy,
    opnorm2,
    random_sl2,
    trace_bound_slack,
    unimodular_defect,
)
from .zerocount import count_zeros


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool

    def row(self):
        return (self.name, self.value, self.limit, "pass" if self.passed else "FAIL")


def _worst(current, values) -> float:
    """Running maximum in which a NaN counts as an infinite error."""
    v = np.asarray(values, float)
    v = np.where(np.isnan(v), np.inf, v)
    return max(current, float(np.max(v)))


def _rng(seed, name):
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def check_sl2_det(seed, n=2000, samples=60):
    rng = _rng(seed, "sl2_det")
    worst = 0.0
    for lam in (0.5, 1.0, 3.0):
        pot = make_amo(lam)
        z = np.exp(2j * np.pi * rng.uniform(size=samples))
        E = rng.uniform(-2 - 2 * lam, 2 + 2 * lam, size=samples)
        d = monodromy(pot, 1, n, z, GOLDEN, E).det()
        worst = _worst(worst, np.abs(d - 1) / n)
    return Check("sl2_det_per_step", worst, 1e-12, worst <= 1e-12)


def check_mondet(seed, samples=100, N_max=300):
    rng = _rng(seed, "mondet")
    pot = make_amo(3.0)
    worst = 0.0
    for _ in range(samples):
        N = int(rng.integers(2, N_max + 1))
        z = np.exp(2j * np.pi * rng.uniform())
        E = rng.uniform(-8, 8)
        M = monodromy(pot, 1, N, z, GOLDEN, E)
        f1N, f1N1, f2N, f2N1 = entry_quadruple(pot, z, GOLDEN, E, N)
        pairs = ((M.entry(0, 0), f1N), (M.entry(0, 1), -f2N),
                 (M.entry(1, 0), f1N1), (M.entry(1, 1), -f2N1))
        scale = float(M.lognorm())
        for a, b in pairs:
            diff = a - b
            worst = _worst(worst, 0.0 if np.isneginf(diff.mag) else np.exp(diff.mag - scale))
        worst = _worst(worst, unimodular_defect((f1N, f1N1, f2N, f2N1)))
    return Check("mondet_relative", worst, 1e-9, worst <= 1e-9)


def check_trace_bounds(seed, samples=10000):
    m = random_sl2(_rng(seed, "trace"), samples)
    lo, hi = trace_bound_slack(m)
    tol = 1e-9 * opnorm2(m) ** 2
    bad = int(np.sum((lo < -tol) | (hi < -tol)))
    return Check("trace_bound_violations", float(bad), 0.0, bad == 0)


def check_free_laplacian(seed):
    worst = 0.0
    for N in (1, 2, 7, 50, 200):
        E = tridiag_eigvals(np.zeros((1, N)))[0]
        k = np.arange(1, N + 1)
        ref = np.sort(-2 * np.cos(np.pi * k / (N + 1)))
        worst = _worst(worst, np.abs(E - ref))
    return Check("free_laplacian_abs", worst, 1e-10, worst <= 1e-10)


def check_periodic(seed, samples=20):
    rng = _rng(seed, "periodic")
    pot = make_amo(3.0)
    worst = 0.0
    for N in (2, 3, 8, 21, 64):
        diag = site_potential(pot, rng.uniform(size=samples), GOLDEN, 1, N)
        for sign in (+1, -1):
            E = periodic_eig_batch(diag, sign)
            ref = np.stack([np.linalg.eigvalsh(periodic_matrix(d, sign)) for d in diag])
            worst = _worst(worst, np.abs(E - ref))
    return Check("periodic_vs_dense_abs", worst, 1e-7, worst <= 1e-7)


def check_resultants(seed, pairs=100):
    rng = _rng(seed, "resultant")
    worst = 0.0
    self_res = 0.0
    for _ in range(pairs):
        p = Poly.from_roots(rng.normal(size=rng.integers(1, 9)) + 1j * rng.normal(size=1))
        q = Poly.from_roots(rng.normal(size=rng.integers(1, 9)))
        a, b = sylvester_resultant(p, q), root_product_resultant(p, q)
        worst = _worst(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
        r = sylvester_resultant(p, p)
        self_res = max(self_res, 0.0 if is_zero(r, 1.0) else abs(r))
    ok = worst <= 1e-8 and self_res == 0.0
    return Check("resultant_relative", worst, 1e-8, ok)


def check_zero_counts(seed, samples=50):
    rng = _rng(seed, "zeros")
    miss = 0
    for _ in range(samples):
        deg = int(rng.integers(1, 9))
        roots = rng.uniform(-1.5, 1.5, deg) + 1j * rng.uniform(-1.5, 1.5, deg)
        p = Poly.from_roots(roots)
        c = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
        R = float(rng.uniform(0.5, 1.5))
        d = np.abs(roots - c)
        while np.any(np.abs(d - R) < 1e-3):
            R += 2e-3  # keep the contour off the roots
        truth = int(np.sum(np.abs(roots - c) < R))
        miss += count_zeros(p, c, R).count != truth
    return Check("zero_count_mismatches", float(miss), 0.0, miss == 0)


def check_constant_bands(seed):
    pot: Potential = constant(0.7)
    diag = site_potential(pot, np.array([0.1, 0.6]), GOLDEN, 1, 9)
    E = tridiag_eigvals(diag)
    ref = 0.7 - 2 * np.cos(np.pi * np.arange(9, 0, -1) / 10)
    err = float(np.max(np.abs(E - np.sort(ref))))
    return Check("constant_potential_abs", err, 1e-10, err <= 1e-10)


CHECKS = (check_sl2_det, check_mondet, check_trace_bounds, check_free_laplacian,
          check_periodic, check_resultants, check_zero_counts, check_constant_bands)


def run_verify(seed: int = 0, threads: int = 1) -> list[Check]:
    return run_tasks(lambda fn: fn(seed), CHECKS, threads)
