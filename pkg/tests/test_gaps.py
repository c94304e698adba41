import math

import numpy as np
import pytest

from qplab.errors import FrequencyError, NoSplitError
from qplab.gaps import (
    GapReport,
    RegularPair,
    Resonance,
    SpectrumFree,
    Undecided,
    build_pregap,
    complex_zero_sequence,
    conjugate_fraction,
    density_drop,
    dichotomy_scan,
    find_resonance,
    gap_survival,
    merge_intervals,
    ns_condition,
    pregap_from_branches,
    spectrum_free_check,
    spectrum_union,
    triple_resonance_scan,
    two_level_split,
    unconditional_check,
)
from qplab.model import GOLDEN, constant, make_amo
from qplab.rellich import RellichGraph, Segment, trace_graph

AMO3 = make_amo(3.0)
FREE = constant(0.0)


def _linear_graph(c, omega=0.25):
    xs = np.linspace(0, 1, 201)
    E = np.stack([xs, c - xs], axis=1)
    S = np.stack([np.ones_like(xs), -np.ones_like(xs)], axis=1)
    z = np.zeros(xs.size - 1, bool)
    return RellichGraph(omega, 10, xs, E, S, np.zeros(E.shape, int), z, z)


def test_find_resonance_linear_crossing():
    c, w = 1.2, 0.25
    g = _linear_graph(c, w)
    pos = Segment(0, 0.0, 1.0, (0.0, 1.0), 1, 1.0, True, (0, 200))
    neg = Segment(1, 0.0, 1.0, (0.2, 1.2), -1, 1.0, True, (0, 200))
    res = find_resonance(pos, neg, g, 1, 10, C=2.0, both_signs=False)
    assert res.m == 1
    assert res.x0 == pytest.approx((c - res.m * w) / 2, abs=1e-10)
    assert res.residual <= 1e-10


def test_find_resonance_short_segments():
    c, w = 1.2, 0.25
    g = _linear_graph(c, w)
    pos = Segment(0, 0.3, 0.7, (0.3, 0.7), 1, 1.0, True, (60, 140))
    neg = Segment(1, 0.5, 0.9, (0.3, 0.7), -1, 1.0, True, (100, 180))
    res = find_resonance(pos, neg, g, 1, 10, C=2.0)
    assert res.m == 1
    assert res.x0 == pytest.approx(0.475, abs=1e-10)
    assert res.margin > 0.5 * 0.4 / 2.0


def test_find_resonance_disjoint_ranges():
    g = _linear_graph(1.2)
    pos = Segment(0, 0.0, 0.3, (0.0, 0.3), 1, 1.0, True, (0, 60))
    neg = Segment(1, 0.0, 0.3, (0.9, 1.2), -1, 1.0, True, (0, 60))
    assert find_resonance(pos, neg, g, 1, 10, C=2.0) is None


def test_two_level_split_closed_forms():
    eps = 0.1
    plus, minus, gap = two_level_split(lambda x: -x, lambda x: x, lambda x: eps + 0 * x, (-1, 1))
    x = np.linspace(-1, 1, 5)
    assert np.allclose(plus(x), np.sqrt(x**2 + eps**2))
    assert np.allclose(minus(x), -np.sqrt(x**2 + eps**2))
    assert gap == pytest.approx(2 * eps, abs=1e-12)
    _, _, gap0 = two_level_split(lambda x: -x, lambda x: x, lambda x: 0 * x, (-1, 1))
    assert gap0 == pytest.approx(0, abs=1e-12)
    _, _, gap2 = two_level_split(lambda x: -x, lambda x: x, lambda x: eps * (1 + x**2), (-1, 1))
    assert gap2 == pytest.approx(2 * eps, abs=1e-12)


def test_pregap_from_synthetic_branches():
    eps, tol = 0.1, 1e-3
    plus, minus, _ = two_level_split(lambda x: -x, lambda x: x, lambda x: eps + 0 * x, (-1, 1))
    pg = pregap_from_branches(minus, plus, (-0.5, 0.5), tol=tol)
    assert pg.interval == pytest.approx((-eps + tol, eps - tol), abs=1e-12)
    assert pg.x_max == pytest.approx(0, abs=1e-6)
    assert pg.core(0.25) == pytest.approx((-0.5 * (eps - tol), 0.5 * (eps - tol)))


def test_pregap_without_split_raises():
    plus, minus, _ = two_level_split(lambda x: -x, lambda x: x, lambda x: 0 * x, (-1, 1))
    with pytest.raises(NoSplitError):
        pregap_from_branches(minus, plus, (-0.5, 0.5))


def test_merge_intervals():
    assert merge_intervals([0.0, 0.15, 1.0], 0.1) == [(-0.1, 0.25), (0.9, 1.1)]
    assert merge_intervals([], 0.1) == []


def test_spectrum_union_constant_potential():
    rep = spectrum_union(constant(0.5), GOLDEN, 4, grid_size=128)
    k = np.arange(1, 5)
    pts = np.sort(0.5 - 2 * np.cos(math.pi * k / 5))
    r = constant(0.5).phase_constant / 128
    assert np.allclose(rep.bands, [(p - r, p + r) for p in pts])
    assert len(rep.gaps) == 3


def test_spectrum_union_hull_within_norm_bound():
    rep = spectrum_union(AMO3, GOLDEN, 30, grid_size=256)
    bound = 2 + AMO3.sup_norm + AMO3.phase_constant / 256
    assert -bound <= rep.hull[0] < rep.hull[1] <= bound
    assert all(a < b for a, b in rep.bands)
    assert all(rep.bands[i][1] < rep.bands[i + 1][0] for i in range(len(rep.bands) - 1))


def test_gap_report_round_trip():
    rep = spectrum_union(AMO3, GOLDEN, 10, grid_size=128)
    d = rep.to_dict()
    assert d["kind"] == "gap_report"
    back = GapReport.from_dict(d)
    assert back.bands == rep.bands and back.gaps == rep.gaps


def test_gap_survival_synthetic():
    small = GapReport(10, "dirichlet", (0, 3), [(0, 1), (2, 3)], [(1, 2)])
    large = GapReport(20, "dirichlet", (0, 3), [(0, 1.2), (1.9, 3)], [(1.2, 1.9)])
    [(g, best, shrink)] = gap_survival(small, large)
    assert best == (1.2, 1.9)
    assert shrink == pytest.approx(0.3)


def test_spectrum_free_examples():
    assert spectrum_free_check(FREE, GOLDEN, (3, 4), [13, 21], grid_size=128)
    eig = -2 * math.cos(2 * math.pi / 13)  # a periodic eigenvalue at N = 13
    assert not spectrum_free_check(FREE, GOLDEN, (eig - 0.01, eig + 0.01), [13], grid_size=128,
                                   edge_filter=False)
    with pytest.raises(FrequencyError):
        spectrum_free_check(FREE, GOLDEN, (3, 4), [4, 7], grid_size=128)


def test_dichotomy_examples():
    assert isinstance(dichotomy_scan(FREE, GOLDEN, (3, 4), 2, grid_size=128), SpectrumFree)
    assert isinstance(dichotomy_scan(AMO3, GOLDEN, (1, 1), 2), Undecided)


def test_dichotomy_finds_regular_pair_mid_spectrum():
    r = dichotomy_scan(AMO3, GOLDEN, (-1.3, 1.3), 1, grid_size=256)
    assert isinstance(r, RegularPair)
    assert r.common[1] - r.common[0] >= 1e-4
    res = find_resonance(r.seg_pos, r.seg_neg, r.graph, 1, 50)
    assert res is not None
    assert res.residual <= 1e-9
    C = AMO3.lipschitz + 2
    width = r.common[1] - r.common[0]
    assert res.margin > 0.5 * width / C


def test_pregap_requires_large_scale():
    res = Resonance(0.1, 1, 0.0, 0, 1, 0.0, 0.1, 4)
    with pytest.raises(ValueError):
        build_pregap(AMO3, GOLDEN, res, 8)


def test_ns_condition_examples():
    assert ns_condition(FREE, 0.0, GOLDEN, 3.0, 6, 0.5)
    assert ns_condition(AMO3, 0.2, GOLDEN, 0.123456, 8, 1e-9)


def test_ns_condition_fails_at_common_eigenvalue():
    # with V = 0 and E = 0, the windows [1, 5], [1, 4], [2, 5], [2, 4] all contain
    # 0 in their spectra only for odd lengths; choose ell = 5 so that
    # f_[1,5] and f_[2,4] vanish at 0 but f_[1,4] does not: the condition holds
    assert ns_condition(FREE, 0.0, GOLDEN, 0.0, 5, 0.1)


def test_unconditional_check_infinite_radius():
    r = unconditional_check(AMO3, 0.3, GOLDEN, 20, 5, math.inf, grid_size=64)
    assert r.unconditional and bool(r)
    assert r.dist_left_trim >= 0 and r.dist_both_trim >= 0


def test_zero_sequence_outside_hull_is_empty():
    seq = complex_zero_sequence(AMO3, GOLDEN, 20.0, 10, 0.1, range(-3, 4))
    assert all(s.count == 0 for s in seq)
    assert conjugate_fraction(seq) == 0


def test_density_drop_outside_hull():
    dd = density_drop(AMO3, GOLDEN, 20.0, 20, 40)
    assert dd.wide == dd.narrow == dd.drop == 0


def test_triple_scan_constant_potential_is_resonant_everywhere():
    pot = constant(1.0)
    g = trace_graph(pot, GOLDEN, 3, 64, max_inserted=0)
    triples = triple_resonance_scan(pot, GOLDEN, g, range(1, 3), range(5, 7), 1e-8, tau=0.0)
    assert {t.x for t in triples} == set(g.xs[g.on_grid])


def test_triple_scan_zero_tolerance_empty():
    g = trace_graph(AMO3, GOLDEN, 3, 128, max_inserted=0)
    assert triple_resonance_scan(AMO3, GOLDEN, g, range(1, 20), range(50, 80), 0.0) == []
