import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qplab.model import GOLDEN, constant, make_amo
from qplab.resultant import Poly
from qplab.zerocount import (
    annulus_density,
    count_in_annulus,
    count_zeros,
    count_zeros_in_E,
    det_in_z,
    jensen_average,
    scale_stability,
    trapezoid_count,
)

AMO3 = make_amo(3.0)


def test_count_examples():
    assert count_zeros(lambda z: z * z - 0.25, 0, 1).count == 2
    assert count_zeros(lambda z: z - 0.5, 0, 0.4).count == 0


def test_count_and_locate_with_log_derivative():
    p = Poly.from_roots([0.1, 0.5j, -0.7])
    r = count_zeros(p, 0, 0.6, lambda z: p.deriv()(z) / p(z), locate=True)
    assert r.count == 2
    assert np.allclose(sorted(r.zeros, key=abs), [0.1, 0.5j], atol=1e-10)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_counts_match_companion_roots(seed):
    rng = np.random.default_rng(seed)
    deg = int(rng.integers(1, 9))
    p = Poly(tuple(rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)))
    roots = np.roots(p.coeffs)
    c, R = 0.1 + 0.2j, 1.0
    if np.min(np.abs(np.abs(roots - c) - R)) < 1e-3:
        return
    assert count_zeros(p, c, R).count == int(np.sum(np.abs(roots - c) < R))


def test_trapezoid_count_is_integer():
    p = Poly.from_roots([0.2, -0.3 + 0.1j, 2.0])
    v = trapezoid_count(lambda z: p.deriv()(z) / p(z), 0, 1.0, 256)
    assert v == pytest.approx(2, abs=1e-10)


def test_jensen_zero_free_is_mean_value():
    f = lambda z: np.exp(z) + 3
    assert abs(jensen_average(f, 0.1, 0.5, 0.2)) <= 1e-8


def test_jensen_single_zero():
    r1, r2 = 0.5, 0.2
    assert jensen_average(lambda z: z, 0, r1, r2) == pytest.approx(r2**2 / (4 * r1**2), abs=1e-9)


def test_jensen_sandwich_random_polynomials():
    rng = np.random.default_rng(11)
    for _ in range(5):
        deg = int(rng.integers(1, 9))
        p = Poly.from_roots(rng.uniform(-1, 1, deg) + 1j * rng.uniform(-1, 1, deg))
        r1, r2 = 0.8, 0.25
        s = 4 * r1**2 / r2**2 * jensen_average(p, 0, r1, r2)
        lo, hi = count_zeros(p, 0, r1 - r2).count, count_zeros(p, 0, r1 + r2).count
        assert lo - 1e-6 <= s <= hi + 1e-6


def test_annulus_count_for_planted_roots():
    p = Poly.from_roots([0.5, 1.0 * np.exp(0.3j), 1.02j, 1.5])
    assert count_in_annulus(p, 0.95, 1.1).count == 2


def test_e_plane_count_free_two_sites():
    assert count_zeros_in_E(constant(0.0), 0.0, GOLDEN, (1, 2), 0.0, 1.5).count == 2
    assert count_zeros_in_E(constant(0.0), 0.0, GOLDEN, (1, 2), 0.0, 0.5).count == 0


def test_e_plane_count_matches_eigensolver():
    res = count_zeros_in_E(AMO3, 0.3, GOLDEN, (1, 30), 0.0, 2.0)
    assert res.count > 0  # the cross-check against eigenvalues runs inside


def test_density_upper_bound_amo():
    for E in (-3.0, 0.0, 2.2):
        M, _ = annulus_density(AMO3, GOLDEN, E, 40, 0.6, 1.4)
        assert M <= 2 + 1 / 40


def test_density_far_from_spectrum_vanishes():
    E = AMO3.sup_norm + 3
    M, res = annulus_density(AMO3, GOLDEN, E, 40, 0.995, 1.005)
    assert M == 0 and res.count == 0


def test_density_mid_spectrum_lower_bound():
    N = 60
    M, _ = annulus_density(AMO3, GOLDEN, 0.3, N, 0.6, 1.4)
    assert M >= 1 - 2 / math.sqrt(N)


def test_scale_stability_free_and_degenerate():
    Mn, MN, d = scale_stability(constant(0.0), GOLDEN, 3.0, 40, 80, 0.9, 1.1)
    assert Mn == MN == 0 and d <= 0
    _, _, d = scale_stability(AMO3, GOLDEN, 0.3, 40, 40, 0.9, 1.1)
    assert d <= 0


def test_scale_stability_amo():
    n = 40
    _, _, d = scale_stability(AMO3, GOLDEN, 0.3, n, 120, 0.9, 1.1)
    assert d <= n ** -0.25


def test_det_in_z_log_derivative_consistent():
    f, dlog = det_in_z(AMO3, GOLDEN, 0.4, 1, 12)
    z, h = 1.05 * np.exp(0.7j), 1e-6
    fd = (f(np.array([z + h])).value() - f(np.array([z - h])).value()) / (2 * h)
    assert dlog(np.array([z]))[0] == pytest.approx(fd[0] / f(np.array([z])).value()[0], rel=1e-6)
