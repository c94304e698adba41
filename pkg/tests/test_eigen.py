import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qplab.eigen import (
    decay_profile,
    dirichlet_eigs,
    eigenvector,
    jacobi_eigvalsh,
    localization_center,
    periodic_count,
    periodic_eig_batch,
    periodic_eigs,
    periodic_matrix,
    site_potential,
    sturm_count,
    tridiag_eigvals,
)
from qplab.model import GOLDEN, constant, make_amo

FREE = constant(0.0)


def _dense(d):
    n = d.size
    return np.diag(d) - np.eye(n, k=1) - np.eye(n, k=-1)


@pytest.mark.parametrize("n", [1, 2, 5, 50, 200])
def test_free_laplacian_closed_form(n):
    eigs = dirichlet_eigs(FREE, 0.1, GOLDEN, (1, n)).eigs
    k = np.arange(1, n + 1)
    assert np.max(np.abs(eigs - np.sort(-2 * np.cos(math.pi * k / (n + 1))))) <= 1e-10


def test_two_site_free():
    assert np.allclose(dirichlet_eigs(FREE, 0.0, GOLDEN, (1, 2)).eigs, [-1, 1])


def test_eigenvector_examples():
    assert np.allclose(np.abs(eigenvector(make_amo(2.0), 0.3, GOLDEN, (4, 4), 0.0)), [1.0])
    v = eigenvector(FREE, 0.0, GOLDEN, (1, 2), -1.0)
    assert np.allclose(np.abs(v), [1 / math.sqrt(2)] * 2)


@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
@settings(max_examples=30, deadline=None)
def test_bisection_matches_dense_solver(seed, n):
    d = np.random.default_rng(seed).uniform(-6, 6, (3, n))
    E = tridiag_eigvals(d)
    ref = np.stack([np.linalg.eigvalsh(_dense(r)) for r in d])
    assert np.max(np.abs(E - ref)) <= 1e-10


def test_sturm_count_is_eigenvalue_count():
    d = np.random.default_rng(5).uniform(-3, 3, (1, 30))
    ev = np.linalg.eigvalsh(_dense(d[0]))
    probes = np.linspace(-6, 6, 41)
    counts = sturm_count(d, np.broadcast_to(probes, (1, 41)))[0]
    assert list(counts) == [int(np.sum(ev < p)) for p in probes]


def test_periodic_free_closed_form():
    assert np.allclose(periodic_eigs(FREE, 0.0, GOLDEN, 6).eigs, [-2, -1, -1, 1, 1, 2])
    assert np.allclose(periodic_eigs(FREE, 0.0, GOLDEN, 2, -1).eigs, [0, 0], atol=1e-7)


@pytest.mark.parametrize("N", [2, 3, 8, 21, 64])
@pytest.mark.parametrize("sign", [1, -1])
def test_periodic_batch_matches_dense(N, sign):
    d = site_potential(make_amo(3.0), np.linspace(0, 1, 7, endpoint=False), GOLDEN, 1, N)
    E = periodic_eig_batch(d, sign)
    ref = np.stack([np.linalg.eigvalsh(periodic_matrix(r, sign)) for r in d])
    assert np.max(np.abs(E - ref)) <= 1e-7


def test_periodic_count_matches_inertia():
    d = site_potential(make_amo(1.5), np.array([0.2]), GOLDEN, 1, 13)
    ev = np.linalg.eigvalsh(periodic_matrix(d[0], +1))
    probes = np.linspace(-5, 5, 23)
    got = periodic_count(d, probes[None, :], +1)[0]
    assert list(got) == [int(np.sum(ev < p)) for p in probes]


def test_jacobi_matches_lapack():
    A = np.random.default_rng(2).normal(size=(8, 8))
    A = A + A.T
    assert np.allclose(jacobi_eigvalsh(A), np.linalg.eigvalsh(A), atol=1e-12)


def test_localization_center_examples():
    v = np.zeros(12)
    v[7] = 1
    assert localization_center(v) == 7
    v = np.zeros(12)
    v[3] = v[9] = 1
    assert localization_center(v) == 3


def test_decay_profile_examples():
    n = np.arange(-20, 21)
    rate, dev = decay_profile(np.exp(-np.abs(n)), 20)
    assert rate == pytest.approx(-1, abs=1e-6)
    assert decay_profile(np.ones(15), 7)[0] == pytest.approx(0, abs=1e-12)


def test_amo_eigenvector_localized():
    s = dirichlet_eigs(make_amo(3.0), 0.3, GOLDEN, (1, 200), vectors=True)
    j = 100
    v = s.vecs[j]
    c = localization_center(v)
    assert 20 < c < 180
    rate, _ = decay_profile(v, c)
    assert rate <= -0.9 * math.log(3)
    assert rate <= -math.log(3) + 0.15


def test_eigen_residuals_small():
    s = dirichlet_eigs(make_amo(3.0), 0.3, GOLDEN, (-50, 50), vectors=True)
    assert s.residuals.max() <= 1e-9
    assert np.min(np.diff(s.eigs)) > 0
