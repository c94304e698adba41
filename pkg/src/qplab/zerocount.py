"""Zero counting by the argument principle, Jensen averages, annulus densities.

Evaluators may return plain complex arrays or :class:`LogComplex` values, so
determinants of length 10^3 can be counted without overflow.  Log-derivative
evaluators return f'/f directly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .eigen import dirichlet_eigs
from .errors import ContourTooClose, CrossCheckError
from .model import Potential, e
from .transfer import LogComplex, det_recursion, site_deriv_z, site_fn

log = logging.getLogger(__name__)

MARGIN_MIN = 1e-12
MAX_STEP = math.pi / 4


@dataclass
class ZeroCountResult:
    count: int
    center: complex
    radius: float
    contour_margin: float
    zeros: list = field(default_factory=list)
    inner_radius: float | None = None  # set for annulus counts

    def to_dict(self):
        return {"count": self.count, "center": [self.center.real, self.center.imag],
                "radius": self.radius, "contour_margin": self.contour_margin,
                "zeros": [[complex(z).real, complex(z).imag] for z in self.zeros]}


def _as_log(v) -> LogComplex:
    if isinstance(v, LogComplex):
        return v
    return LogComplex.from_value(v)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def winding_on_path(f, path, t0: float, t1: float, nodes: int = 64, max_nodes: int = 1 << 21):
    """Change of arg f along path(t), t in [t0, t1], divided by 2 pi.

    Nodes are inserted wherever consecutive phases differ by more than pi/4, so
    each increment is resolved unambiguously.  Returns (winding, log-margin
    data (min mag, max mag)).
    """
    ts = np.linspace(t0, t1, nodes + 1)
    vals = _as_log(f(path(ts)))
    mags = np.asarray(vals.mag, float)
    angs = np.angle(vals.phase)
    while True:
        if np.any(~np.isfinite(mags)):
            raise ContourTooClose("f vanishes on the contour")
        d = _wrap(np.diff(angs))
        bad = np.nonzero(np.abs(d) > MAX_STEP)[0]
        if bad.size == 0:
            break
        if ts.size + bad.size > max_nodes:
            raise ContourTooClose("argument increments do not resolve (zero too close to contour)")
        tm = 0.5 * (ts[bad] + ts[bad + 1])
        if np.any(np.diff(np.concatenate([ts[bad], tm])) == 0) or np.any(tm <= ts[bad]):
            raise ContourTooClose("contour nodes collapsed next to a zero")
        vm = _as_log(f(path(tm)))
        ts = np.insert(ts, bad + 1, tm)
        mags = np.insert(mags, bad + 1, np.asarray(vm.mag, float))
        angs = np.insert(angs, bad + 1, np.angle(vm.phase))
    total = float(np.sum(_wrap(np.diff(angs))))
    return total / (2 * np.pi), (float(mags.min()), float(mags.max()))


def _circle(center, radius):
    return lambda t: center + radius * np.exp(1j * t)


def _circle_winding(f, center, radius, nodes):
    w, (lo, hi) = winding_on_path(f, _circle(center, radius), 0.0, 2 * np.pi, nodes)
    margin = math.exp(lo - hi)
    if margin < MARGIN_MIN:
        raise ContourTooClose(f"contour margin {margin:.2e} below {MARGIN_MIN}")
    k = int(round(w))
    if abs(w - k) > 1e-6:
        raise ContourTooClose(f"non-integer winding {w}")
    return k, margin


def _perturbed(radius, attempt):
    if attempt == 0:
        return radius
    sign = 1 if attempt % 2 else -1
    return radius * (1 + sign * 1e-3 * math.sqrt(2) * ((attempt + 1) // 2))


def trapezoid_count(dlog, center, radius, nodes: int):
    """(1/2 pi i) contour integral of f'/f by the trapezoid rule on ``nodes`` points."""
    th = 2 * np.pi * np.arange(nodes) / nodes
    z = center + radius * np.exp(1j * th)
    return complex(np.mean(dlog(z) * (z - center)))


def count_zeros(f, center, radius: float, dlog=None, locate: bool = False, nodes: int = 64,
                attempts: int = 5) -> ZeroCountResult:
    """Number of zeros of f in the open disk |z - center| < radius.

    With ``dlog`` (z -> f'(z)/f(z)) the integer is cross-checked against the
    trapezoid integral of f'/f, doubling nodes until it settles, and ``locate``
    refines the zero positions.
    """
    center = complex(center)
    last = None
    for attempt in range(attempts + 1):
        r = _perturbed(radius, attempt)
        try:
            k, margin = _circle_winding(f, center, r, nodes)
        except ContourTooClose as exc:
            last = exc
            continue
        if dlog is not None:
            _trapezoid_confirm(dlog, center, r, k)
        res = ZeroCountResult(k, center, r, margin)
        if locate and k > 0:
            res.zeros = locate_in_disk(f, dlog, center, r, k)
        return res
    raise ContourTooClose(f"no admissible radius near {radius}: {last}")


def _trapezoid_confirm(dlog, center, r, k, start=256, cap=1 << 16):
    m = start
    prev = None
    while m <= cap:
        v = trapezoid_count(dlog, center, r, m)
        if prev is not None and abs(v - prev) < 1e-8 and abs(v.real - k) < 1e-6:
            return
        prev = v
        m *= 2
    log.debug("trapezoid f'/f did not settle at %d nodes (count %d from arguments)", cap, k)


# ---------------------------------------------------------------------------
# zero location


def _newton(f, dlog, z, iters=50, tol=1e-14):
    for _ in range(iters):
        step = 1.0 / dlog(np.array([z]))[0]
        if not np.isfinite(step):
            break
        z = z - step
        if abs(step) <= tol * max(1.0, abs(z)):
            break
    return z


def _numeric_dlog(f, h=1e-7):
    def dlog(z):
        z = np.asarray(z, complex)
        fz = _as_log(f(z))
        fp = _as_log(f(z + h))
        fm = _as_log(f(z - h))
        # f'/f from the ratios f(z +- h)/f(z), which stay finite in log form
        rp = (fp / fz).value()
        rm = (fm / fz).value()
        return (rp - rm) / (2 * h)

    return dlog


def locate_in_disk(f, dlog, center, radius, count, nodes=None):
    """Zeros in a disk from contour moments (Newton identities), polished by Newton."""
    if dlog is None:
        dlog = _numeric_dlog(f, 1e-7 * max(radius, 1e-3))
    m = nodes or max(256, 32 * count)
    prev = None
    for _ in range(8):
        th = 2 * np.pi * np.arange(m) / m
        w = np.exp(1j * th)
        z = center + radius * w
        g = dlog(z) * (z - center)
        s = np.array([np.mean(g * w**p) for p in range(1, count + 1)])
        if prev is not None and np.max(np.abs(s - prev)) < 1e-10 * max(1, np.max(np.abs(s))):
            break
        prev = s
        m *= 2
    # Newton identities: power sums -> elementary symmetric polynomials
    ecoef = [1.0 + 0j]
    for k in range(1, count + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * ecoef[k - i] * s[i - 1]
        ecoef.append(acc / k)
    poly = [(-1) ** k * ecoef[k] for k in range(count + 1)]
    roots = np.roots(poly) if count > 0 else np.array([])
    out = []
    for w0 in roots:
        z0 = center + radius * w0
        out.append(complex(_newton(f, dlog, z0)))
    return sorted(out, key=lambda z: (round(z.real, 12), round(z.imag, 12)))


def merge_duplicates(zs, tol=1e-10):
    out = []
    for z in sorted(zs, key=lambda v: (v.real, v.imag)):
        if not any(abs(z - w) <= tol * max(1.0, abs(z)) for w in out):
            out.append(z)
    return out


# ---------------------------------------------------------------------------
# Jensen averages


def _lens_area(d, R, r):
    """Area of the intersection of disks of radii R >= r with centers d apart."""
    if d >= R + r:
        return 0.0
    if d <= R - r:
        return math.pi * r * r
    a1 = r * r * math.acos(max(-1.0, min(1.0, (d * d + r * r - R * R) / (2 * d * r))))
    a2 = R * R * math.acos(max(-1.0, min(1.0, (d * d + R * R - r * r) / (2 * d * R))))
    a3 = 0.5 * math.sqrt(max(0.0, (-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R)))
    return a1 + a2 - a3


def circle_mean_log(f, z0, rho, nodes=2048):
    """Mean of log|f| over the circle |z - z0| = rho (trapezoid rule)."""
    if rho == 0:
        return float(np.asarray(_as_log(f(np.array([complex(z0)]))).mag)[0])
    th = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
    mag = np.asarray(_as_log(f(z0 + rho * np.exp(1j * th))).mag, float)
    finite = np.isfinite(mag)
    if not np.all(finite):
        log.info("skipping %d nodes with f = 0", int(np.sum(~finite)))
    return math.fsum(mag[finite]) / max(int(np.sum(finite)), 1)


def jensen_average(f, z0, r1: float, r2: float, nodes: int = 2048, epsabs: float = 1e-11) -> float:
    """Average over z in D(z0, r1) of [mean of log|f| over D(z, r2) - log|f(z)|].

    Reduced to radial integrals of circle means: the double average weights the
    circle of radius rho about z0 by the lens area |D(z0, r1) cap D(zeta, r2)|.
    """
    if not 0 < r2 < r1:
        raise ValueError("need 0 < r2 < r1")
    z0 = complex(z0)

    def m(rho):
        return circle_mean_log(f, z0, rho, nodes)

    norm = (math.pi * r1 * r1) * (math.pi * r2 * r2)

    def outer(rho):
        return m(rho) * 2 * math.pi * rho * _lens_area(rho, r1, r2) / norm

    breaks = sorted({r1 - r2, r1, r1 + r2})
    pts = [0.0] + breaks
    first = math.fsum(integrate.quad(outer, a, b, epsabs=epsabs, epsrel=1e-12, limit=200)[0]
                      for a, b in zip(pts[:-1], pts[1:]))
    second = integrate.quad(lambda rho: m(rho) * rho, 0.0, r1, epsabs=epsabs, epsrel=1e-12,
                            limit=200)[0] * 2 / (r1 * r1)
    return first - second


# ---------------------------------------------------------------------------
# determinants as functions of z or E


def det_in_z(pot: Potential, omega: float, E, a: int, b: int):
    """Evaluator z -> f_{[a,b]}(z, omega, E) and its log-derivative in z."""

    def f(z):
        return det_recursion(site_fn(pot, z, omega, E), a, b)

    def dlog(z):
        z = np.asarray(z, complex)
        return det_recursion(site_fn(pot, z, omega, E), a, b, dd_fn=site_deriv_z(pot, z, omega))[1]

    return f, dlog


def det_in_E(pot: Potential, z, omega: float, a: int, b: int):
    """Evaluator E -> f_{[a,b]}(z, omega, E) and its log-derivative in E."""

    def f(E):
        E = np.asarray(E, complex)
        return det_recursion(site_fn(pot, np.full(E.shape, z), omega, E), a, b)

    def dlog(E):
        E = np.asarray(E, complex)
        return det_recursion(site_fn(pot, np.full(E.shape, z), omega, E), a, b,
                             dd_fn=lambda n: -np.ones(E.shape))[1]

    return f, dlog


def count_zeros_in_E(pot: Potential, x: float, omega: float, window, E0, radius: float,
                     locate: bool = False, crosscheck: bool = True) -> ZeroCountResult:
    """Zeros of E -> f_window(e(x), omega, E) in the disk D(E0, radius)."""
    a, b = int(window[0]), int(window[1])
    f, dlog = det_in_E(pot, e(x), omega, a, b)
    res = count_zeros(f, E0, radius, dlog, locate=locate)
    if crosscheck and np.isreal(x):
        eigs = dirichlet_eigs(pot, float(np.real(x)), omega, (a, b)).eigs
        expect = int(np.sum(np.abs(eigs - complex(E0)) < res.radius))
        if expect != res.count:
            raise CrossCheckError(f"E-plane count {res.count} but {expect} eigenvalues in disk")
    return res


# ---------------------------------------------------------------------------
# annuli


def count_in_annulus(f, R1: float, R2: float, dlog=None, nodes: int = 256, attempts: int = 5):
    """Zeros with R1 < |z| < R2 from the windings on both boundary circles."""
    last = None
    for attempt in range(attempts + 1):
        r1 = _perturbed(R1, attempt)
        r2 = _perturbed(R2, attempt)
        try:
            k2, m2 = _circle_winding(f, 0j, r2, nodes)
            k1, m1 = _circle_winding(f, 0j, r1, nodes)
        except ContourTooClose as exc:
            last = exc
            continue
        return ZeroCountResult(k2 - k1, 0j, r2, min(m1, m2), inner_radius=r1)
    raise ContourTooClose(f"annulus boundaries too close to zeros: {last}")


def _sector_winding(f, r0, r1, t0, t1, nodes=16):
    """Winding of f around the annular sector r0 < |z| < r1, t0 < arg z < t1."""
    total = 0.0
    lo_all, hi_all = np.inf, -np.inf
    pieces = [
        (lambda t: r1 * np.exp(1j * t), t0, t1),
        (lambda s: s * np.exp(1j * t1), r1, r0),
        (lambda t: r0 * np.exp(1j * t), t1, t0),
        (lambda s: s * np.exp(1j * t0), r0, r1),
    ]
    for path, a, b in pieces:
        w, (lo, hi) = winding_on_path(f, path, a, b, nodes)
        total += w
        lo_all, hi_all = min(lo_all, lo), max(hi_all, hi)
    if math.exp(lo_all - hi_all) < MARGIN_MIN:
        raise ContourTooClose("sector boundary too close to a zero")
    k = int(round(total))
    if abs(total - k) > 1e-6:
        raise ContourTooClose(f"non-integer sector winding {total}")
    return k


def locate_in_annulus(f, dlog, R1: float, R2: float, max_cell_count: int = 3,
                      cell_size: float | None = None, depth: int = 40):
    """All zeros in R1 < |z| < R2 by recursive subdivision into annular sectors.

    Cells with few zeros are covered by their circumscribed disk, located there
    from contour moments, and kept if they fall inside the cell; the union is
    merged for duplicates within 1e-10.
    """
    if cell_size is None:
        cell_size = min(R2 - R1, 0.1)
    found = []
    stack = [(R1, R2, 0.0, 2 * np.pi, 0)]
    while stack:
        r0, r1, t0, t1, lev = stack.pop()
        try:
            k = _sector_winding(f, r0, r1, t0, t1)
        except ContourTooClose:
            # shift the cut slightly and retry through the parent split
            k = None
        if k == 0:
            continue
        width = t1 - t0
        small = max(width * r1, r1 - r0) <= cell_size
        if (k is not None and k <= max_cell_count and small) or lev >= depth:
            zs = _locate_cell(f, dlog, r0, r1, t0, t1)
            found.extend(zs)
            continue
        # split the longer side; irrational offsets keep cuts away from symmetric zeros
        if width * 0.5 * (r0 + r1) >= (r1 - r0):
            tm = t0 + width * (0.5 + 0.0137 * math.sqrt(2))
            stack.append((r0, r1, tm, t1, lev + 1))
            stack.append((r0, r1, t0, tm, lev + 1))
        else:
            rm = r0 + (r1 - r0) * (0.5 + 0.0113 * math.sqrt(3))
            stack.append((rm, r1, t0, t1, lev + 1))
            stack.append((r0, rm, t0, t1, lev + 1))
    return merge_duplicates(found)


def _locate_cell(f, dlog, r0, r1, t0, t1):
    tc = 0.5 * (t0 + t1)
    rc = 0.5 * (r0 + r1)
    c = rc * np.exp(1j * tc)
    corners = [r * np.exp(1j * t) for r in (r0, r1) for t in (t0, t1)]
    rad = max(abs(z - c) for z in corners) * 1.05
    res = count_zeros(f, c, rad, dlog, locate=True)
    keep = []
    for z in res.zeros:
        rr, tt = abs(z), np.angle(z) % (2 * np.pi)
        if r0 <= rr < r1 and (t0 <= tt < t1 or t0 <= tt + 2 * np.pi < t1):
            keep.append(z)
    return keep


def annulus_density(pot: Potential, omega: float, E, N: int, R1: float, R2: float,
                    locate: bool = False, window=None):
    """(Zeros of z -> f_{[1,N]}(z, omega, E) with R1 < |z| < R2) / N.

    Returns (density, ZeroCountResult); the raw count is in the result.
    """
    if not (1 - pot.rho0 < R1 < R2 < 1 + pot.rho0):
        raise ValueError("annulus must lie inside the analyticity band")
    a, b = (1, N) if window is None else window
    f, dlog = det_in_z(pot, omega, E, a, b)
    res = count_in_annulus(f, R1, R2, dlog)
    if locate and res.count:
        res.zeros = locate_in_annulus(f, dlog, res.inner_radius, res.radius)
    return res.count / (b - a + 1), res


def scale_stability(pot: Potential, omega: float, E, n: int, N: int, R1: float, R2: float):
    """Compare densities at scales n and N with margins r2 = n^{-1/4}(R2 - R1).

    Returns (M_n, M_N, defect) where M_n, M_N are the plain densities and
    defect is the larger violation of the two cross-scale inequalities.
    """
    if N < n or n < 1:
        raise ValueError("need N >= n >= 1")
    r2 = n ** -0.25 * (R2 - R1)
    tol = n ** -0.25
    Mn = annulus_density(pot, omega, E, n, R1, R2)[0]
    MN = annulus_density(pot, omega, E, N, R1, R2)[0]
    inner_N = annulus_density(pot, omega, E, N, R1 + r2, R2 - r2)[0]
    outer_n = annulus_density(pot, omega, E, n, R1 - r2, R2 + r2)[0]
    inner_n = annulus_density(pot, omega, E, n, R1 + r2, R2 - r2)[0]
    outer_N = annulus_density(pot, omega, E, N, R1 - r2, R2 + r2)[0]
    defect = max(inner_N - outer_n - tol, inner_n - outer_N - tol)
    return Mn, MN, defect
