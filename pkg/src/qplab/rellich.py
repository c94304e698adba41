"""Eigenvalue curves over the phase: slopes, I-segments, regularity, translations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import eigpairs, feynman_slope, residual_scale, site_potential, tridiag_eigvals
from .errors import PreconditionError
from .model import Potential

log = logging.getLogger(__name__)

_CHUNK = 64


@dataclass
class RellichGraph:
    """Sorted eigenvalues E[i, j] = E_j(xs[i]) of H restricted to [-N, N].

    ``refined[i]`` flags the cell (xs[i], xs[i+1]) as produced by local
    bisection; ``near_crossing[i]`` flags cells still unresolved at full depth.
    """

    omega: float
    N: int
    xs: np.ndarray
    E: np.ndarray
    slopes: np.ndarray
    centers: np.ndarray
    refined: np.ndarray
    near_crossing: np.ndarray
    pot: Potential | None = field(default=None, repr=False)
    on_grid: np.ndarray | None = None  # nodes of the original uniform grid

    def __post_init__(self):
        if self.on_grid is None:
            self.on_grid = np.ones(self.xs.size, bool)

    def clean_nodes(self) -> np.ndarray:
        """Uniform-grid nodes not touching a near-crossing cell."""
        near = np.zeros(self.xs.size, bool)
        near[:-1] |= self.near_crossing
        near[1:] |= self.near_crossing
        return np.nonzero(self.on_grid & ~near)[0]

    @property
    def window(self):
        return (-self.N, self.N)

    def band(self, j):
        return self.E[:, j]

    def csv_rows(self):
        for i, x in enumerate(self.xs):
            for j in range(self.E.shape[1]):
                yield (repr(float(x)), j, repr(float(self.E[i, j])), repr(float(self.slopes[i, j])),
                       int(self.centers[i, j]))

    def eval_band(self, x: float, j: int):
        """(E_j(x), slope, center) recomputed at an arbitrary phase."""
        if self.pot is None:
            raise ValueError("graph has no potential attached")
        E, s, c = _node_data(self.pot, np.array([x]), self.omega, self.N)
        return float(E[0, j]), float(s[0, j]), int(c[0, j])


def _node_data(pot: Potential, xs, omega, N):
    """Eigenvalues, Feynman slopes and absolute centers at phases xs (chunked)."""
    xs = np.asarray(xs, float)
    Es, Ss, Cs = [], [], []
    for lo in range(0, xs.size, _CHUNK):
        xc = xs[lo:lo + _CHUNK]
        diag = site_potential(pot, xc, omega, -N, N)
        E = tridiag_eigvals(diag)
        vecs, _ = eigpairs(diag, E, residual_scale(pot, E))
        Es.append(E)
        Ss.append(feynman_slope(pot, xc, omega, -N, vecs))
        Cs.append(np.argmax(np.abs(vecs), axis=-1) - N)
    return np.concatenate(Es), np.concatenate(Ss), np.concatenate(Cs)


def _local_gap(E):
    """min distance from each eigenvalue to its neighbours, shape like E."""
    d = np.diff(E, axis=-1)
    left = np.concatenate([np.full(E.shape[:-1] + (1,), np.inf), d], axis=-1)
    right = np.concatenate([d, np.full(E.shape[:-1] + (1,), np.inf)], axis=-1)
    return np.minimum(left, right)


def _cell_status(Ea, Eb, gap_floor):
    """(unresolved, hopeless) per cell.

    A cell is unresolved when some eigenvalue moves more than half its local
    gap; it is hopeless when that gap is already below ``gap_floor``, i.e. a
    near-crossing that bisection cannot separate.
    """
    motion = np.abs(Eb - Ea)
    gap = np.minimum(_local_gap(Ea), _local_gap(Eb))
    bad = motion > 0.5 * gap
    return np.any(bad, axis=-1), np.any(bad & (gap < gap_floor), axis=-1)


def trace_graph(pot: Potential, omega: float, N: int, grid_size: int = 256,
                max_depth: int = 10, gap_floor: float = 1e-9,
                max_inserted: int | None = None) -> RellichGraph:
    """Eigenvalue curves on a closed uniform phase grid of [0, 1], refined near crossings.

    Cells are bisected breadth-first (at most ``max_depth`` levels and
    ``max_inserted`` new nodes, default 4 * grid_size).  Cells that stay
    unresolved are flagged in ``near_crossing``.
    """
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    budget = 4 * grid_size if max_inserted is None else max_inserted
    xs = np.arange(grid_size + 1) / grid_size
    E, S, C = _node_data(pot, xs, omega, N)
    xs_l, E_l, S_l, C_l = list(xs), list(E), list(S), list(C)
    unres, hopeless = _cell_status(E[:-1], E[1:], gap_floor)
    stuck = {float(xs[i]) for i in np.nonzero(hopeless)[0]}
    cells = [(xs[i], xs[i + 1]) for i in np.nonzero(unres & ~hopeless)[0]]
    lookup = dict(zip(map(float, xs), E))
    depth = 0
    while cells and depth < max_depth and budget >= len(cells):
        mids = np.array([0.5 * (a + b) for a, b in cells])
        budget -= mids.size
        Em, Sm, Cm = _node_data(pot, mids, omega, N)
        xs_l.extend(mids)
        E_l.extend(Em)
        S_l.extend(Sm)
        C_l.extend(Cm)
        lookup.update(zip(map(float, mids), Em))
        halves = [h for (a, b), m in zip(cells, mids) for h in ((a, m), (m, b))]
        Ea = np.array([lookup[float(a)] for a, _ in halves])
        Eb = np.array([lookup[float(b)] for _, b in halves])
        unres, hopeless = _cell_status(Ea, Eb, gap_floor)
        stuck.update(float(halves[i][0]) for i in np.nonzero(hopeless)[0])
        cells = [halves[i] for i in np.nonzero(unres & ~hopeless)[0]]
        depth += 1
    stuck.update(float(a) for a, _ in cells)
    order = np.argsort(xs_l, kind="stable")
    xs_out = np.asarray(xs_l)[order]
    inserted = np.zeros(len(xs_l), bool)
    inserted[grid_size + 1:] = True
    ins = inserted[order]
    refined = ins[:-1] | ins[1:]
    near = np.array([float(x) in stuck for x in xs_out[:-1]])
    if near.any():
        log.info("%d cells left unresolved (near crossings)", int(near.sum()))
    return RellichGraph(float(omega), int(N), xs_out, np.asarray(E_l)[order],
                        np.asarray(S_l)[order], np.asarray(C_l)[order].astype(int),
                        refined, near, pot, ~ins)


def feynman_slopes(graph: RellichGraph, pot: Potential) -> np.ndarray:
    """Slopes dE_j/dx at every graph node from the Feynman sum over eigenvectors."""
    return _node_data(pot, graph.xs, graph.omega, graph.N)[1]


def finite_difference_slopes(graph: RellichGraph, pot: Potential, h: float = 1e-5) -> np.ndarray:
    """Central differences (E_j(x + h) - E_j(x - h)) / 2h at every graph node."""
    xs = graph.xs
    diag_p = site_potential(pot, xs + h, graph.omega, -graph.N, graph.N)
    diag_m = site_potential(pot, xs - h, graph.omega, -graph.N, graph.N)
    return (tridiag_eigvals(diag_p) - tridiag_eigvals(diag_m)) / (2 * h)


# ---------------------------------------------------------------------------
# segments


@dataclass
class Segment:
    j: int
    x_lo: float
    x_hi: float
    I: tuple
    slope_sign: int
    min_abs_slope: float
    regular: bool = False
    nodes: tuple = (0, 0)  # first and last graph node index inside the segment

    def to_dict(self):
        return {"j": self.j, "x_lo": self.x_lo, "x_hi": self.x_hi, "I": list(self.I),
                "slope_sign": self.slope_sign, "min_abs_slope": self.min_abs_slope,
                "regular": self.regular}


def _edge(x_in, x_out, v_in, v_out, target):
    """Linear interpolation for where v crosses target between two nodes."""
    if v_out == v_in:
        return x_in
    t = (target - v_in) / (v_out - v_in)
    return x_in + min(max(t, 0.0), 1.0) * (x_out - x_in)


def _band_data(pot, xs, omega, N, js):
    """E_{js[i]}(xs[i]) and its Feynman slope, one eigenvalue per phase."""
    xs = np.asarray(xs, float)
    js = np.asarray(js, int)
    diag = site_potential(pot, xs, omega, -N, N)
    E = tridiag_eigvals(diag, index=js[:, None])
    vecs, _ = eigpairs(diag, E, residual_scale(pot, E))
    return E[:, 0], feynman_slope(pot, xs, omega, -N, vecs)[:, 0]


def _bisect_edges(graph, edges, tau, lo_I, hi_I, tol=1e-6):
    """Batched bisection between admissible (x_in) and inadmissible (x_out) phases."""
    j = np.array([ed[0] for ed in edges], int)
    x_in = np.array([ed[1] for ed in edges], float)
    x_out = np.array([ed[2] for ed in edges], float)
    s0 = np.array([ed[3] for ed in edges], float)
    steps = int(np.ceil(np.log2(max(np.max(np.abs(x_out - x_in)), tol) / tol)))
    for _ in range(steps):
        m = 0.5 * (x_in + x_out)
        E, s = _band_data(graph.pot, m, graph.omega, graph.N, j)
        ok = (np.abs(s) >= tau) & (np.sign(s) == s0) & (E > lo_I) & (E < hi_I)
        x_in = np.where(ok, m, x_in)
        x_out = np.where(ok, x_out, m)
    E, _ = _band_data(graph.pot, x_in, graph.omega, graph.N, j)
    return x_in, E


def extract_segments(graph: RellichGraph, tau: float, I) -> list[Segment]:
    """Maximal runs of nodes with |slope| >= tau, constant sign and E_j inside I.

    Endpoints are pushed past the last admissible node: by bisection on the
    recomputed band when a potential is attached, else by linear interpolation.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    lo_I, hi_I = float(I[0]), float(I[1])
    xs = graph.xs
    n_nodes, n_bands = graph.E.shape
    runs = []
    for j in range(n_bands):
        Ej, Sj = graph.E[:, j], graph.slopes[:, j]
        good = (np.abs(Sj) >= tau) & (Ej > lo_I) & (Ej < hi_I)
        sign = np.sign(Sj)
        i = 0
        while i < n_nodes:
            if not good[i]:
                i += 1
                continue
            k = i
            while k + 1 < n_nodes and good[k + 1] and sign[k + 1] == sign[i]:
                k += 1
            runs.append((j, i, k, int(sign[i])))
            i = k + 1
    # endpoint per run side: (j, inner node, outer node or None)
    ends = {}
    edges, keys = [], []
    for r, (j, i, k, s0) in enumerate(runs):
        for side, inner, outer in ((0, i, i - 1), (1, k, k + 1)):
            if outer < 0 or outer >= n_nodes:
                ends[r, side] = (xs[inner], graph.E[inner, j])
            elif graph.pot is not None:
                edges.append((j, xs[inner], xs[outer], s0))
                keys.append((r, side))
            else:
                ends[r, side] = _interp_edge(graph, j, inner, outer, s0, tau, lo_I, hi_I)
    if edges:
        xe, Ee = _bisect_edges(graph, edges, tau, lo_I, hi_I)
        for key, x, E in zip(keys, xe, Ee):
            ends[key] = (x, E)
    out = []
    for r, (j, i, k, s0) in enumerate(runs):
        (x_lo, E_a), (x_hi, E_b) = ends[r, 0], ends[r, 1]
        vals = graph.E[i:k + 1, j]
        I_seg = (float(min(vals.min(), E_a, E_b)), float(max(vals.max(), E_a, E_b)))
        seg = Segment(j, float(x_lo), float(x_hi), I_seg, s0,
                      float(np.min(np.abs(graph.slopes[i:k + 1, j]))), False, (i, k))
        seg.regular = regularity_check(seg, graph)
        out.append(seg)
    return out


def _interp_edge(graph, j, inner, outer, s0, tau, lo_I, hi_I):
    xs, Ej, Sj = graph.xs, graph.E[:, j], graph.slopes[:, j]
    Eo, So = Ej[outer], Sj[outer]
    # whichever constraint fails at the outer node decides the interpolation target
    if not lo_I < Eo < hi_I:
        target = lo_I if Eo <= lo_I else hi_I
        x = _edge(xs[inner], xs[outer], Ej[inner], Eo, target)
    else:
        x = _edge(xs[inner], xs[outer], abs(Sj[inner]), abs(So) * (np.sign(So) == s0), tau)
    return x, float(np.interp(x, xs, Ej))


def regularity_check(segment: Segment, graph: RellichGraph) -> bool:
    """Centers at every sampled node stay within [-N + sqrt N, N - sqrt N]."""
    i, k = segment.nodes
    c = graph.centers[i:k + 1, segment.j]
    lim = graph.N - math.sqrt(graph.N)
    return bool(np.all(np.abs(c) <= lim))


# ---------------------------------------------------------------------------
# translations


@dataclass(frozen=True)
class TranslationErrors:
    err_E: float
    err_slope: float
    err_vec: float
    x: float
    k: int
    center: int


def _eigpair_at(pot, x, omega, N):
    diag = site_potential(pot, np.array([x]), omega, -N, N)
    E = tridiag_eigvals(diag)
    vecs, _ = eigpairs(diag, E, residual_scale(pot, E))
    slopes = feynman_slope(pot, np.array([x]), omega, -N, vecs)
    return E[0], vecs[0], slopes[0]


def segment_midpoint(segment: Segment, graph: RellichGraph):
    """The node closest to the middle of the segment's phase range."""
    i, k = segment.nodes
    mid = 0.5 * (segment.x_lo + segment.x_hi)
    idx = i + int(np.argmin(np.abs(graph.xs[i:k + 1] - mid)))
    return idx, float(graph.xs[idx])


def admissible_shifts(center: int, N: int) -> range:
    """Shifts k keeping the translated center nu - k inside (-N + sqrt N / 2, N - sqrt N / 2)."""
    lim = N - math.sqrt(N) / 2
    lo = math.floor(center - lim) + 1
    hi = math.ceil(center + lim) - 1
    return range(lo, hi + 1)


def translate_check(segment: Segment, graph: RellichGraph, k: int, pot: Potential | None = None):
    """Compare band j at the segment midpoint x with the spectrum at x + k omega.

    Under x -> x + k omega the eigenvector psi(n) moves to psi(n + k), so its
    center moves from nu to nu - k; that translated center must stay sqrt(N)/2
    away from the edges.
    """
    pot = pot or graph.pot
    if pot is None:
        raise ValueError("a potential is required")
    N, j = graph.N, segment.j
    _, x = segment_midpoint(segment, graph)
    E0, V0, S0 = _eigpair_at(pot, x, graph.omega, N)
    psi = V0[j]
    nu = int(np.argmax(np.abs(psi))) - N
    if k not in admissible_shifts(nu, N):
        raise PreconditionError(f"shifted center {nu - k} leaves the admissible window")
    if k == 0:
        return TranslationErrors(0.0, 0.0, 0.0, x, 0, nu)
    E1, V1, S1 = _eigpair_at(pot, x + k * graph.omega, graph.omega, N)
    jj = int(np.argmin(np.abs(E1 - E0[j])))
    shifted = np.zeros_like(psi)
    # shifted[m] = psi[m + k] in window coordinates
    if k > 0:
        shifted[:psi.size - k] = psi[k:]
    else:
        shifted[-k:] = psi[:psi.size + k]
    phi = V1[jj]
    if np.dot(phi, shifted) < 0:
        phi = -phi
    return TranslationErrors(float(abs(E1[jj] - E0[j])), float(abs(S1[jj] - S0[j])),
                             float(np.linalg.norm(phi - shifted)), x, int(k), nu)


# ---------------------------------------------------------------------------
# separation


def separation_profile(pot: Potential, omega: float, N: int, grid_size: int = 512,
                       exclude: float = 0.05):
    """Per-phase minimal eigenvalue gaps of H on [-N, N] and the trimmed minimum.

    Returns (gaps per phase, min gap after dropping the smallest ``exclude``
    fraction, threshold exp(-N^0.9)).
    """
    xs = np.arange(grid_size) / grid_size
    diag = site_potential(pot, xs, omega, -N, N)
    E = tridiag_eigvals(diag)
    gaps = np.min(np.diff(E, axis=-1), axis=-1)
    srt = np.sort(gaps)
    drop = int(math.floor(exclude * grid_size))
    return gaps, float(srt[drop]), math.exp(-(N ** 0.9))
