import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qplab.errors import RootFindingError
from qplab.model import GOLDEN, constant, make_amo
from qplab.resultant import (
    Poly,
    common_zeros,
    discriminant,
    discriminant_via_resultant,
    is_zero,
    poly_roots,
    root_product_resultant,
    sylvester_matrix,
    sylvester_resultant,
    zero_separation_experiment,
)


def test_resultant_of_two_quadratics():
    p, q = Poly((1, 0, -1)), Poly((1, 0, -4))
    assert sylvester_resultant(p, q) == pytest.approx(9)
    assert root_product_resultant(p, q) == pytest.approx(9)


@pytest.mark.parametrize("a,b", [(0.0, 1.0), (2.5, -1.0), (1j, 3.0)])
def test_linear_resultant(a, b):
    p, q = Poly((1, -a)), Poly((1, -b))
    assert sylvester_resultant(p, q) == pytest.approx(a - b)
    assert root_product_resultant(p, q) == pytest.approx(a - b)


def test_self_resultant_vanishes():
    p = Poly((2.0, -1.0, 0.5, 3.0))
    assert is_zero(sylvester_resultant(p, p))


def test_sylvester_matrix_shape():
    S = sylvester_matrix(Poly((1, 2, 3)), Poly((4, 5)))
    assert np.allclose(S, [[1, 2, 3], [4, 5, 0], [0, 4, 5]])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_sylvester_agrees_with_root_product(seed):
    rng = np.random.default_rng(seed)
    p = Poly.from_roots(rng.normal(size=rng.integers(1, 9)) + 1j * rng.normal(), lead=1.5)
    q = Poly.from_roots(rng.normal(size=rng.integers(1, 9)), lead=-0.7)
    a, b = sylvester_resultant(p, q), root_product_resultant(p, q)
    assert abs(a - b) <= 1e-8 * max(abs(a), abs(b))


def test_discriminant_examples():
    assert discriminant(Poly((1, 0, -1))) == pytest.approx(-4)
    assert abs(discriminant(Poly((1, -2, 1)))) < 1e-12
    assert discriminant_via_resultant(Poly((1, 0, -1))) == pytest.approx(-4)


def test_discriminant_routes_agree_cubic():
    p = Poly.from_roots([0.3, -1.2, 2.0 + 0.5j])
    assert discriminant_via_resultant(p) == pytest.approx(discriminant(p), rel=1e-10)


def test_repeated_root_against_derivative():
    p = Poly.from_roots([0.5, 0.5, -1.0])
    assert is_zero(sylvester_resultant(p, p.deriv()))


def test_root_oracle_degree_cap():
    with pytest.raises(RootFindingError):
        poly_roots(Poly(tuple(np.ones(14))))


def test_common_zeros_of_circle_and_line():
    f = np.zeros((3, 3), complex)  # x^2 + y^2 - 1
    f[0, 0], f[2, 0], f[0, 2] = -1, 1, 1
    g = np.zeros((3, 3), complex)  # x - y
    g[1, 0], g[0, 1] = 1, -1
    pts = common_zeros(f, g)
    s = 1 / math.sqrt(2)
    assert len(pts) == 2
    assert sorted(round(p[0].real, 8) for p in pts) == [round(-s, 8), round(s, 8)]
    assert all(abs(x - y) < 1e-8 for x, y in pts)


def test_zero_separation_examples():
    pot = make_amo(3.0)
    assert zero_separation_experiment(pot, GOLDEN, 0.3, 12, 12, 0) == 0.0
    assert zero_separation_experiment(constant(0.0), GOLDEN, 3.0, 12, 12, 5) == math.inf
    assert zero_separation_experiment(pot, GOLDEN, 0.3, 12, 12, 200) > 0
