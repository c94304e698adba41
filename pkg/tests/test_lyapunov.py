import math

import numpy as np
import pytest

from qplab.errors import HypothesisError, OutOfAnnulus
from qplab.lyapunov import (
    avalanche_expand,
    deviation_profile,
    finite_lyapunov,
    lyapunov_many,
    rate_convergence_probe,
    uniform_upper_probe,
)
from qplab.model import GOLDEN, constant, e, make_amo
from qplab.transfer import ScaledMatrix2, monodromy

FREE = constant(0.0)
AMO3 = make_amo(3.0)


def test_free_elliptic_energy_has_zero_exponent():
    assert abs(finite_lyapunov(FREE, GOLDEN, 0.0, 10_000, grid_size=64).value) <= 1e-3


def test_free_hyperbolic_energy_close_to_closed_form():
    # the finite-N average carries an O(1/N) bias; the N = 10^4 accuracy is
    # tracked by the acceptance suite
    L = finite_lyapunov(FREE, GOLDEN, 3.0, 10_000, grid_size=64).value
    assert L == pytest.approx(math.log((3 + math.sqrt(5)) / 2), abs=1e-4)


def test_herman_bound_at_zero_energy():
    L = finite_lyapunov(AMO3, GOLDEN, 0.0, 10_000, grid_size=1024).value
    assert L >= math.log(3) - 0.02


def test_many_matches_single():
    a = lyapunov_many(AMO3, GOLDEN, [0.5, 1.5], 300, grid_size=64)
    b = [finite_lyapunov(AMO3, GOLDEN, E, 300, grid_size=64) for E in (0.5, 1.5)]
    assert [x.value for x in a] == pytest.approx([x.value for x in b], rel=1e-12)


def test_complex_phase_must_stay_in_band():
    with pytest.raises(OutOfAnnulus):
        finite_lyapunov(AMO3, GOLDEN, 0.0, 50, y=0.6, grid_size=64)


def _diag(mu):
    return ScaledMatrix2.from_matrix(np.diag([mu, 1 / mu]))


def test_avalanche_equal_diagonal_blocks_exact():
    # binary entries make every rounding step exact
    assert avalanche_expand([_diag(2.0**20)] * 100, 2.0**20).residual == 0.0
    assert avalanche_expand([_diag(1e6)] * 100, 1e6).residual <= 1e-13


def test_avalanche_two_blocks():
    rng = np.random.default_rng(1)
    blocks = [ScaledMatrix2.from_matrix(rng.normal(size=(2, 2)) * 40) for _ in range(2)]
    r = avalanche_expand(blocks, 3.0, check=False)
    assert r.residual <= 1e-14
    assert r.expansion == pytest.approx(r.direct, abs=1e-12)


def test_avalanche_on_amo_blocks():
    n, length = 100, 30
    z = e(0.2134)
    rots = monodromy(AMO3, 1, n * length, z, GOLDEN, 0.4,
                     checkpoints=[length * (k + 1) for k in range(n)])
    blocks = [monodromy(AMO3, length * k + 1, length * (k + 1), z, GOLDEN, 0.4) for k in range(n)]
    mu = math.exp(min(float(b.lognorm()) for b in blocks))
    r = avalanche_expand(blocks, mu)
    assert r.residual <= 10 * n / mu
    assert r.direct == pytest.approx(float(rots[-1].lognorm()), abs=1e-8)


def test_avalanche_hypothesis_violations():
    with pytest.raises(HypothesisError):
        avalanche_expand([_diag(2.0)] * 5, 3.0)
    rot = ScaledMatrix2.from_matrix(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(HypothesisError) as info:
        avalanche_expand([_diag(1e4), rot @ _diag(1e4) @ rot, _diag(1e4)], 1e4)
    assert info.value.index == 0


def test_rate_probe_free():
    r = rate_convergence_probe(FREE, GOLDEN, 3.0, 64, grid_size=32)
    assert r.defect <= 1e-8
    r0 = rate_convergence_probe(FREE, GOLDEN, 0.0, 64, grid_size=32)
    assert max(abs(r0.L_n), abs(r0.L_2n), abs(r0.L_4n)) <= 0.05


def test_deviation_profile_properties():
    assert all(f == 0 for _, f in deviation_profile(FREE, GOLDEN, 3.0, 200, [0.1, 1.0], 256))
    N = 500
    L = finite_lyapunov(AMO3, GOLDEN, 0.3, N, grid_size=256).value
    prof = deviation_profile(AMO3, GOLDEN, 0.3, N, [1, 2, 5, N * L / 10], 256)
    fr = [f for _, f in prof]
    assert fr == sorted(fr, reverse=True)
    assert fr[-1] <= 0.05


def test_uniform_upper_probe():
    assert uniform_upper_probe(FREE, GOLDEN, 3.0, 300, 256) <= 1e-6
    vals = [uniform_upper_probe(AMO3, GOLDEN, 0.3, N, 256) for N in (200, 400, 800)]
    assert max(vals) < 0.1 * 200


def test_rate_probe_defect_shrinks_for_amo():
    d = [rate_convergence_probe(AMO3, GOLDEN, 0.3, n, grid_size=256).defect for n in (64, 128, 256)]
    assert d[0] > d[1] > d[2]
