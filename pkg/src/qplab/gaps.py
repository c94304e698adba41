"""Spectrum unions, gaps, resonances, pre-gaps and their zero-level diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .config import SCHEMA_VERSION
from .eigen import (
    eigpairs,
    periodic_eig_batch,
    periodic_matrix,
    residual_scale,
    site_potential,
    tridiag_eigvals,
)
from .errors import FrequencyError, NoSplitError
from .lyapunov import finite_lyapunov
from .model import Potential, e, find_shift_hitting_interval, frac_dist
from .rellich import RellichGraph, Segment, extract_segments, trace_graph
from .transfer import monodromy
from .zerocount import annulus_density, count_zeros, count_zeros_in_E, det_in_z

log = logging.getLogger(__name__)

_CHUNK = 256


# ---------------------------------------------------------------------------
# spectrum unions


@dataclass
class GapReport:
    N: int
    bc: str
    hull: tuple
    bands: list
    gaps: list
    resonances: list = field(default_factory=list)
    pregaps: list = field(default_factory=list)
    zero_sequences: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def wide_gaps(self, width: float):
        return [g for g in self.gaps if g[1] - g[0] > width]

    def to_dict(self):
        d = asdict(self)
        d["hull"] = list(self.hull)
        d["bands"] = [list(b) for b in self.bands]
        d["gaps"] = [list(g) for g in self.gaps]
        d["kind"] = "gap_report"
        d["schema"] = SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["N"]), d["bc"], tuple(d["hull"]), [tuple(b) for b in d["bands"]],
                   [tuple(g) for g in d["gaps"]], list(d.get("resonances", [])),
                   list(d.get("pregaps", [])), list(d.get("zero_sequences", [])),
                   dict(d.get("meta", {})))

    def intersects(self, interval) -> bool:
        lo, hi = interval
        return any(b[0] < hi and b[1] > lo for b in self.bands)


def merge_intervals(points, radius: float):
    """Union of [p - radius, p + radius] as sorted disjoint closed intervals."""
    p = np.sort(np.asarray(points, float).ravel())
    if p.size == 0:
        return []
    lo, hi = p - radius, p + radius
    # a new band starts wherever the next interval does not touch the running one
    run_hi = np.maximum.accumulate(hi)
    starts = np.concatenate([[0], np.nonzero(lo[1:] > run_hi[:-1])[0] + 1])
    ends = np.concatenate([starts[1:] - 1, [p.size - 1]])
    return [(float(lo[s]), float(run_hi[t])) for s, t in zip(starts, ends)]


def _gaps_of(bands):
    return [(bands[i][1], bands[i + 1][0]) for i in range(len(bands) - 1)]


def _bulk_mask(vecs, margin):
    """Eigenvectors whose peak sits at least ``margin`` sites from both window ends."""
    n = vecs.shape[-1]
    c = np.argmax(np.abs(vecs), axis=-1)
    return (c >= margin) & (c <= n - 1 - margin)


def _periodic_bulk_mask(diag, margin):
    """Periodic eigenpairs localized at least ``margin`` sites away from the seam.

    Vectors come from LAPACK on the dense cyclic matrices; both solvers sort
    eigenvalues ascending, so masks line up with the bisection output.
    """
    mats = np.stack([periodic_matrix(d, +1) for d in diag])
    _, vecs = np.linalg.eigh(mats)
    n = diag.shape[-1]
    c = np.argmax(np.abs(vecs), axis=-2)
    return (c >= margin) & (c <= n - 1 - margin)


def spectrum_union(pot: Potential, omega: float, N: int, bc: str = "dirichlet",
                   grid_size: int = 1024, edge_filter: bool = False) -> GapReport:
    """Union over phases x = i/grid_size of the spectra of H on [1, N].

    Each eigenvalue is fattened by C(V)/grid_size, C(V) = sup|V'| + 1, before
    unioning.  With ``edge_filter`` only eigenvalues whose eigenvector peaks at
    least sqrt(N) sites from the window edges (for periodic boundary
    conditions: from the seam) are kept, which removes boundary states.
    """
    if grid_size < 128:
        raise ValueError("grid_size must be at least 128")
    if bc not in ("dirichlet", "periodic"):
        raise ValueError("bc must be 'dirichlet' or 'periodic'")
    radius = pot.phase_constant / grid_size
    margin = int(math.ceil(math.sqrt(N)))
    keep = []
    for lo in range(0, grid_size, _CHUNK):
        xs = np.arange(lo, min(lo + _CHUNK, grid_size)) / grid_size
        diag = site_potential(pot, xs, omega, 1, N)
        if bc == "dirichlet":
            E = tridiag_eigvals(diag)
            if edge_filter:
                vecs, _ = eigpairs(diag, E, residual_scale(pot, E))
                E = E[_bulk_mask(vecs, margin)]
        else:
            E = periodic_eig_batch(diag, +1)
            if edge_filter:
                E = E[_periodic_bulk_mask(diag, margin)]
        keep.append(np.ravel(E))
    bands = merge_intervals(np.concatenate(keep), radius)
    hull = (bands[0][0], bands[-1][1]) if bands else (0.0, 0.0)
    return GapReport(int(N), bc, hull, bands, _gaps_of(bands),
                     meta={"grid_size": grid_size, "fatten": radius, "edge_filter": edge_filter})


def gap_survival(report_small: GapReport, report_large: GapReport, width: float = 0.05):
    """For each gap wider than ``width`` at the small scale: (gap, surviving part, shrink ratio).

    The surviving part is the widest gap of the larger scale inside the original
    one; shrink ratio is 1 - surviving width / original width (1 if none).
    """
    out = []
    for g in report_small.wide_gaps(width):
        inside = [(max(a, g[0]), min(b, g[1])) for a, b in report_large.gaps
                  if min(b, g[1]) > max(a, g[0])]
        best = max(inside, key=lambda v: v[1] - v[0]) if inside else None
        w = 0.0 if best is None else best[1] - best[0]
        out.append((g, best, 1.0 - w / (g[1] - g[0])))
    return out


# ---------------------------------------------------------------------------
# resonances


@dataclass(frozen=True)
class Resonance:
    x0: float
    m: int
    E0: float
    j1: int
    j2: int
    residual: float  # |E_{j1}(x0) - E_{j2}(x0 + m omega)| on re-evaluation
    margin: float  # distance from x0 to the ends of the positive segment
    scale: int

    def to_dict(self):
        return asdict(self)


def _band_value(graph: RellichGraph, j: int, x):
    """E_j(x); recomputed exactly when a potential is attached, else interpolated."""
    xw = np.mod(np.atleast_1d(np.asarray(x, float)), 1.0)
    if graph.pot is None:
        return np.interp(xw, graph.xs, graph.E[:, j])
    diag = site_potential(graph.pot, xw, graph.omega, -graph.N, graph.N)
    return tridiag_eigvals(diag, index=np.full((xw.size, 1), j))[:, 0]


def _inverse_branch(graph, seg: Segment, E, iters=60):
    """Phase in [x_lo, x_hi] with E_j(x) = E along a monotone segment (bisection)."""
    E = np.atleast_1d(np.asarray(E, float))
    lo = np.full(E.shape, seg.x_lo)
    hi = np.full(E.shape, seg.x_hi)
    for _ in range(iters):
        m = 0.5 * (lo + hi)
        v = _band_value(graph, seg.j, m)
        up = (v < E) if seg.slope_sign > 0 else (v > E)
        lo = np.where(up, m, lo)
        hi = np.where(up, hi, m)
        if np.max(hi - lo) < 1e-15:
            break
    return 0.5 * (lo + hi)


def find_resonance(seg_pos: Segment, seg_neg: Segment, graph: RellichGraph, m_lo: int,
                   m_hi: int, C: float | None = None, sep_scale: float = 0.5,
                   both_signs: bool = True):
    """(x0, m, E0) with E_{j1}(x0) = E_{j2}(x0 + m omega), or None if no m hits.

    h(E) = x2(E) - x1(E) is built from the inverse branches of the two
    segments over their common energy range, trimmed so that x0 keeps distance
    sep_scale * |I| / C from the ends of the positive segment.  Since slopes never
    exceed C, any sep_scale <= 1/2 leaves a nonempty trimmed range.  With
    ``both_signs`` the shifts -m_hi..-m_lo are searched too; the smallest |m|
    wins, positive first.
    """
    if seg_pos.slope_sign <= 0 or seg_neg.slope_sign >= 0:
        raise ValueError("need a positive-slope and a negative-slope segment")
    lo = max(seg_pos.I[0], seg_neg.I[0])
    hi = min(seg_pos.I[1], seg_neg.I[1])
    if not hi > lo:
        return None
    if C is None:
        C = (graph.pot.lipschitz + 2) if graph.pot is not None else 2.0
    width = hi - lo
    sep = sep_scale * width / C
    # trim the range so that x1(E) stays sep away from the positive segment's ends
    E_lo = max(lo, float(_band_value(graph, seg_pos.j, seg_pos.x_lo + sep)[0]))
    E_hi = min(hi, float(_band_value(graph, seg_pos.j, seg_pos.x_hi - sep)[0]))
    if not E_hi > E_lo:
        return None

    def h(E):
        return _inverse_branch(graph, seg_neg, E) - _inverse_branch(graph, seg_pos, E)

    # h decreases in E; {m omega} must land in its range taken mod 1
    h_hi, h_lo = (float(v) for v in h(np.array([E_lo, E_hi])))
    span = h_hi - h_lo
    if span >= 1.0:
        windows = [(0.0, 1.0)]
    else:
        y_a = h_lo % 1.0
        y_b = y_a + span
        windows = [(y_a, y_b)] if y_b <= 1.0 else [(y_a, 1.0), (0.0, y_b - 1.0)]
    m = _smallest_shift(graph.omega, windows, m_lo, m_hi, both_signs)
    if m is None:
        return None
    frac = float(np.mod(m * graph.omega, 1.0))
    target = frac + math.ceil(h_lo - frac)  # the lift of {m omega} inside [h_lo, h_hi]

    def g(E):
        return float(h(E)[0]) - target

    E0 = optimize.brentq(g, E_lo, E_hi, xtol=1e-14, rtol=1e-15)
    x0 = float(_inverse_branch(graph, seg_pos, E0)[0])
    E0 = float(_band_value(graph, seg_pos.j, x0)[0])
    E2 = float(_band_value(graph, seg_neg.j, x0 + m * graph.omega)[0])
    margin = min(x0 - seg_pos.x_lo, seg_pos.x_hi - x0)
    return Resonance(x0, int(m), E0, seg_pos.j, seg_neg.j, abs(E0 - E2), float(margin),
                     int(graph.N))


def _smallest_shift(omega, windows, m_lo, m_hi, both_signs):
    """Smallest |m| in [m_lo, m_hi] (or its negative) with {m omega} in one of the windows."""
    best = None
    for y1, y2 in windows:
        if y2 <= y1:
            continue
        hits = [find_shift_hitting_interval(omega, y1, y2, m_lo, m_hi)]
        if both_signs:
            # {-m omega} = 1 - {m omega}
            neg = find_shift_hitting_interval(omega, 1.0 - y2, 1.0 - y1, m_lo, m_hi)
            hits.append(None if neg is None else -neg)
        for m in hits:
            if m is not None and (best is None or (abs(m), -m) < (abs(best), -best)):
                best = m
    return best


# ---------------------------------------------------------------------------
# two-level model and pre-gaps


@dataclass(frozen=True)
class Pregap:
    interval: tuple
    x_max: float  # interior maximizer of the lower branch
    lower_max: float
    upper_min: float
    x_range: tuple
    scale: int = 0
    source: dict = field(default_factory=dict)

    @property
    def width(self):
        return self.interval[1] - self.interval[0]

    def core(self, fraction: float = 0.25):
        """The interval with ``fraction`` of its width removed at each end."""
        a, b = self.interval
        cut = fraction * (b - a)
        return (a + cut, b - cut)

    def to_dict(self):
        d = asdict(self)
        d["interval"] = list(self.interval)
        d["x_range"] = list(self.x_range)
        return d


def two_level_split(E1fn, E2fn, epsfn, x_range, samples: int = 2049):
    """Branches E+- = (E1 + E2)/2 +- sqrt((E1 - E2)^2/4 + eps^2) and their gap."""

    def plus(x):
        a, b, c = E1fn(x), E2fn(x), epsfn(x)
        return 0.5 * (a + b) + np.sqrt(0.25 * (a - b) ** 2 + c * c)

    def minus(x):
        a, b, c = E1fn(x), E2fn(x), epsfn(x)
        return 0.5 * (a + b) - np.sqrt(0.25 * (a - b) ** 2 + c * c)

    pg = pregap_from_branches(minus, plus, x_range, samples=samples, require_split=False)
    return plus, minus, pg.upper_min - pg.lower_max


def _bounded_extremum(fn, xs, vals, sign):
    """Refine the grid extremum of sign*fn (maximum for sign=+1) with Brent's method."""
    i = int(np.argmax(sign * vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, xs.size - 1)]
    best_x, best_v = xs[i], vals[i]
    if b > a:
        res = optimize.minimize_scalar(lambda t: -sign * float(np.asarray(fn(t)).ravel()[0]),
                                       bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-13})
        v = float(np.asarray(fn(res.x)).ravel()[0])
        if sign * v >= sign * best_v:
            best_x, best_v = float(res.x), v
    return float(best_x), float(best_v), i


def pregap_from_branches(lower, upper, x_range, samples: int = 257, tol: float = 0.0,
                         require_split: bool = True) -> Pregap:
    """Pre-gap (max lower + tol, min upper - tol) over x_range.

    The maximizer of the lower branch must be interior (not at a sampled end
    point); otherwise, or when the branches do not split, NoSplitError.
    """
    xa, xb = float(x_range[0]), float(x_range[1])
    xs = np.linspace(xa, xb, samples)
    lo_vals = np.asarray(lower(xs), float)
    up_vals = np.asarray(upper(xs), float)
    x_max, lmax, i_max = _bounded_extremum(lower, xs, lo_vals, +1)
    _, umin, _ = _bounded_extremum(upper, xs, up_vals, -1)
    gap = umin - lmax
    scale = max(1.0, abs(lmax), abs(umin))
    if require_split:
        if i_max in (0, samples - 1):
            raise NoSplitError("lower branch maximum sits on the window boundary")
        if gap <= 2 * tol + 1e-13 * scale:
            raise NoSplitError(f"branches do not split (gap {gap:.3e})")
    return Pregap((lmax + tol, umin - tol), x_max, lmax, umin, (xa, xb))


def pair_branches(pot: Potential, omega: float, N_bar: int, x0: float, E0: float):
    """Sort-order indices (j-, j+) of the two eigenvalues of H on [-N_bar, N_bar] around E0 at x0."""
    diag = site_potential(pot, np.array([x0]), omega, -N_bar, N_bar)
    E = tridiag_eigvals(diag)[0]
    jm = int(np.searchsorted(E, E0)) - 1
    jm = min(max(jm, 0), E.size - 2)
    # choose the adjacent pair closest to E0 on both sides
    cands = [j for j in (jm - 1, jm, jm + 1) if 0 <= j < E.size - 1]
    jm = min(cands, key=lambda j: abs(E[j] - E0) + abs(E[j + 1] - E0))
    return jm, jm + 1


def branch_fn(pot: Potential, omega: float, N_bar: int, j: int):
    def fn(x):
        x = np.atleast_1d(np.asarray(x, float))
        diag = site_potential(pot, x, omega, -N_bar, N_bar)
        return tridiag_eigvals(diag, index=np.full((x.size, 1), j))[:, 0]

    return fn


def build_pregap(pot: Potential, omega: float, resonance: Resonance, N_bar: int,
                 halfwidth: float | None = None, samples: int = 257, tol: float = 0.0) -> Pregap:
    """Pre-gap at scale N_bar from the two branches that split at the resonance.

    The branches are the sort-order neighbours around E0 at x0 for H on
    [-N_bar, N_bar].  The window is x0 +- halfwidth; by default the halfwidth
    is 4 * split / C(V) (split = E+ - E- at x0, C(V) = sup|V'| + 2), capped by
    the resonance's separation margin, so that unrelated eigenvalue curves stay
    out of the window.
    """
    if N_bar < 4 * resonance.scale:
        raise ValueError("N_bar must be at least 4 times the segment scale")
    jm, jp = pair_branches(pot, omega, N_bar, resonance.x0, resonance.E0)
    lower = branch_fn(pot, omega, N_bar, jm)
    upper = branch_fn(pot, omega, N_bar, jp)
    if halfwidth is None:
        split = float(upper(resonance.x0)[0] - lower(resonance.x0)[0])
        w = min(resonance.margin, 4 * split / (pot.lipschitz + 2))
    else:
        w = halfwidth
    pg = pregap_from_branches(lower, upper, (resonance.x0 - w, resonance.x0 + w), samples, tol)
    return Pregap(pg.interval, pg.x_max, pg.lower_max, pg.upper_min, pg.x_range, int(N_bar),
                  {"x0": resonance.x0, "m": resonance.m, "E0": resonance.E0, "j": [jm, jp]})


# ---------------------------------------------------------------------------
# zero-level diagnostics


@dataclass(frozen=True)
class ZeroSequenceEntry:
    k: int
    count: int
    zeros: tuple  # (x, y) phase coordinates of each zero z = e(x + iy)

    @property
    def conjugate_pair(self) -> bool:
        """Two zeros mirrored across the circle with |y| > 0."""
        ys = [y for _, y in self.zeros]
        return (self.count >= 2 and any(y > 0 for y in ys) and any(y < 0 for y in ys)
                and min(abs(y) for y in ys) > 0)


def _phase_coords(z):
    z = complex(z)
    x = (math.atan2(z.imag, z.real) / (2 * math.pi)) % 1.0
    y = -math.log(abs(z)) / (2 * math.pi)
    return (x, y)


def complex_zero_sequence(pot: Potential, omega: float, E: float, N: int, x0: float, k_range,
                          r: float = 1e-2) -> list[ZeroSequenceEntry]:
    """Zeros of z -> f_{[-N,N]}(z, omega, E) in the disks D(e(x0 + k omega), r).

    At phase x0 + k omega the sites near the resonant pair sit k places
    lower in the window, so the zeros near x0 recur as long as |k| leaves
    the pair inside [-N, N].
    """
    if r > 1e-2:
        raise ValueError("r must not exceed 1e-2")
    f, dlog = det_in_z(pot, omega, E, -N, N)
    out = []
    for k in k_range:
        c = e(x0 + k * omega)
        res = count_zeros(f, c, r, dlog, locate=True)
        out.append(ZeroSequenceEntry(int(k), res.count,
                                     tuple(_phase_coords(z) for z in res.zeros)))
    return out


def conjugate_fraction(seq) -> float:
    return sum(s.conjugate_pair for s in seq) / max(len(seq), 1)


@dataclass(frozen=True)
class DensityDrop:
    wide: float
    narrow: float
    drop: float
    wide_count: int
    narrow_count: int


def density_drop(pot: Potential, omega: float, E, N: int, N1: int,
                 annuli=((1 - 1e-2, 1 + 1e-2), (1 - 1e-4, 1 + 1e-4))) -> DensityDrop:
    """M_N(wide annulus) - M_{N1}(narrow annulus), raw counts kept alongside."""
    if N1 <= N:
        raise ValueError("need N1 > N")
    (a1, b1), (a2, b2) = annuli
    mw, rw = annulus_density(pot, omega, E, N, a1, b1)
    mn, rn = annulus_density(pot, omega, E, N1, a2, b2)
    return DensityDrop(mw, mn, mw - mn, rw.count, rn.count)


# ---------------------------------------------------------------------------
# (NS), unconditional values, spectrum-free intervals


def ns_condition(pot: Potential, x0: float, omega: float, E0, ell: int, r0: float) -> bool:
    """True iff one of f_{[1,l]}, f_{[1,l-1]}, f_{[2,l]}, f_{[2,l-1]} has no E-zero in D(E0, r0)."""
    if ell < 4:
        raise ValueError("ell must be at least 4")
    for window in ((1, ell), (1, ell - 1), (2, ell), (2, ell - 1)):
        if count_zeros_in_E(pot, x0, omega, window, E0, r0).count == 0:
            return True
    return False


@dataclass(frozen=True)
class UnconditionalResult:
    unconditional: bool
    E0: float
    dist_left_trim: float  # dist(spec H_[1,N-1], E0)
    dist_right_trim: float  # dist(spec H_[2,N], E0)
    dist_both_trim: float  # dist(spec H_[2,N-1], E0)
    norm_dip: float  # log||M_N(e(x0), E0)|| - N L_N(E0)

    def __bool__(self):
        return self.unconditional


def _dist_to_spec(pot, x0, omega, a, b, E0):
    diag = site_potential(pot, np.array([x0]), omega, a, b)
    return float(np.min(np.abs(tridiag_eigvals(diag)[0] - E0)))


def unconditional_check(pot: Potential, x0: float, omega: float, N: int, j0: int, r0: float,
                        L: float | None = None, grid_size: int = 256) -> UnconditionalResult:
    """Is E_{j0}(x0) on [1, N] within r0 of both one-site-trimmed spectra?"""
    diag = site_potential(pot, np.array([x0]), omega, 1, N)
    E0 = float(tridiag_eigvals(diag)[0, j0])
    d1 = _dist_to_spec(pot, x0, omega, 1, N - 1, E0)
    d2 = _dist_to_spec(pot, x0, omega, 2, N, E0)
    d3 = _dist_to_spec(pot, x0, omega, 2, N - 1, E0)
    if L is None:
        L = finite_lyapunov(pot, omega, E0, N, grid_size=grid_size).value
    lognorm = float(monodromy(pot, 1, N, e(x0), omega, E0).lognorm())
    flag = bool(d1 <= r0 and d2 <= r0)
    return UnconditionalResult(flag, E0, d1, d2, d3, lognorm - N * L)


def admissible_scales(omega: float, N_list, kappa: float = 0.25):
    return [int(N) for N in N_list if frac_dist(N * omega) <= kappa]


def spectrum_free_check(pot: Potential, omega: float, interval, N_list, grid_size: int = 512,
                        kappa: float = 0.25, edge_filter: bool = True) -> bool:
    """True iff periodic spectra at every admissible N avoid the interval.

    N is admissible when ||N omega|| <= kappa.  Periodic eigenvalues are
    fattened like in :func:`spectrum_union`; with ``edge_filter`` states pinned
    to the seam of the periodic window are ignored.
    """
    Ns = admissible_scales(omega, N_list, kappa)
    if not Ns:
        raise FrequencyError(f"no N in {list(N_list)} has ||N omega|| <= {kappa}")
    for N in Ns:
        rep = spectrum_union(pot, omega, N, "periodic", grid_size, edge_filter=edge_filter)
        if rep.intersects(interval):
            return False
    return True


def certify_pregap(pot: Potential, omega: float, pregap: Pregap, count: int = 2,
                   grid_size: int = 16384, fraction: float = 0.25):
    """Check the core of a pre-gap against the next ``count`` continued-fraction scales.

    Scales start at 2 N_bar + 1, the length of the window the pre-gap was
    built on; shorter periodic windows cannot hold the resonant pair.  The
    core drops ``fraction`` of the width at each end so that the fattening
    C(V)/grid_size does not reach it from the neighbouring bands.
    Returns (free, scales, core).
    """
    from .model import fibonacci_denominators

    qs = fibonacci_denominators(omega, 2 * pregap.scale, count)
    core = pregap.core(fraction)
    if pot.phase_constant / grid_size >= fraction * pregap.width:
        log.warning("fattening %.2e exceeds the core margin %.2e; raise grid_size",
                    pot.phase_constant / grid_size, fraction * pregap.width)
    return spectrum_free_check(pot, omega, core, qs, grid_size), qs, core


# ---------------------------------------------------------------------------
# dichotomy and triple resonances


@dataclass(frozen=True)
class SpectrumFree:
    interval: tuple


@dataclass(frozen=True)
class RegularPair:
    seg_pos: Segment
    seg_neg: Segment
    graph: RellichGraph
    common: tuple


@dataclass(frozen=True)
class Undecided:
    reason: str


def _best_pair(segs, min_width):
    pos = [s for s in segs if s.regular and s.slope_sign > 0]
    neg = [s for s in segs if s.regular and s.slope_sign < 0]
    best = None
    for p in pos:
        for q in neg:
            lo, hi = max(p.I[0], q.I[0]), min(p.I[1], q.I[1])
            if hi - lo >= min_width and (best is None or hi - lo > best[2][1] - best[2][0]):
                best = (p, q, (lo, hi))
    return best


def dichotomy_scan(pot: Potential, omega: float, interval, ell: int, tau: float = 1e-3,
                   grid_size: int = 512, min_width: float = 1e-4, max_scale: int | None = None,
                   free_scales=None):
    """RegularPair at some scale l^2 <= N <= l^4, else SpectrumFree, else Undecided."""
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        return Undecided("empty interval")
    top = ell**4 if max_scale is None else min(ell**4, max_scale)
    N = ell**2
    while N <= top:
        graph = trace_graph(pot, omega, N, grid_size, max_inserted=0)
        segs = extract_segments(graph, tau, (lo, hi))
        best = _best_pair(segs, min_width)
        if best is not None:
            return RegularPair(best[0], best[1], graph, best[2])
        N *= 2
    shrink = 0.25 * (hi - lo)
    sub = (lo + shrink, hi - shrink)
    scales = free_scales or [q for q in _denominators(omega) if q >= ell**2][:3]
    try:
        if spectrum_free_check(pot, omega, sub, scales):
            return SpectrumFree(sub)
    except FrequencyError as exc:
        return Undecided(str(exc))
    return Undecided("no regular segment pair and no spectrum-free subinterval")


def _denominators(omega):
    from .model import _expand

    return [q for _, q in _expand(omega, 40)[1]]


@dataclass(frozen=True)
class Triple:
    x: float
    j1: int
    j2: int
    j3: int
    m1: int
    m2: int


def _shift_matches(E0, E1, tol):
    """For sorted rows: index in E1 of the nearest eigenvalue to each E0 and the distance."""
    G, n = E0.shape
    # one flat search: offset each row so that rows occupy disjoint ranges
    span = max(np.ptp(E0), np.ptp(E1)) + abs(E0).max() + abs(E1).max() + 1.0
    off = (np.arange(G) * span)[:, None]
    flat = (E1 + off).ravel()
    p = np.searchsorted(flat, (E0 + off).ravel()).reshape(G, n) - np.arange(G)[:, None] * n
    p = np.clip(p, 1, n - 1)
    left = np.abs(E0 - np.take_along_axis(E1, p - 1, axis=1))
    right = np.abs(np.take_along_axis(E1, p, axis=1) - E0)
    idx = np.where(left <= right, p - 1, p)
    d = np.abs(np.take_along_axis(E1, idx, axis=1) - E0)
    return idx, d


def triple_resonance_scan(pot: Potential, omega: float, graph_small: RellichGraph, m1_range,
                          m2_range, tol: float, tau: float = 1e-3, limit: int = 10000):
    """All (x, j1, j2, j3, m1, m2) on the uniform grid with both shifted near-equalities.

    Only segment-valued branches count: |slope| >= tau at (x, j1).  Eigenvalues
    at shifted phases are recomputed exactly.  ``limit`` caps the list length.
    """
    nodes = np.nonzero(graph_small.on_grid)[0]
    xs = graph_small.xs[nodes]
    E0 = graph_small.E[nodes]
    ok = np.abs(graph_small.slopes[nodes]) >= tau
    N = graph_small.N

    def shifted(m):
        diag = site_potential(pot, np.mod(xs + m * omega, 1.0), omega, -N, N)
        return tridiag_eigvals(diag)

    hits1 = {}
    for m1 in m1_range:
        idx, d = _shift_matches(E0, shifted(m1), tol)
        mask = ok & (d < tol)
        if mask.any():
            hits1[m1] = (mask, idx)
    if not hits1:
        return []
    any1 = np.zeros(E0.shape, bool)
    for mask, _ in hits1.values():
        any1 |= mask
    out = []
    for m2 in m2_range:
        idx2, d2 = _shift_matches(E0, shifted(m2), tol)
        mask2 = any1 & (d2 < tol)
        if not mask2.any():
            continue
        for m1, (mask1, idx1) in hits1.items():
            for i, j in zip(*np.nonzero(mask1 & mask2)):
                out.append(Triple(float(xs[i]), int(j), int(idx1[i, j]), int(idx2[i, j]),
                                  int(m1), int(m2)))
                if len(out) >= limit:
                    return out
    return out
