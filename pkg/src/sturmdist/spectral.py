"""Eigenvalues and eigenfunctions through the characteristic matrix ``D(lam) = alpha + beta Z_lam(b)``.

``lam`` is an eigenvalue exactly when ``D(lam)`` is singular. Detection uses the smallest
singular value of ``D`` (scale-aware, no determinant over/underflow); the determinant is
used only for the argument-principle count in the complex plane.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .boundary import as_linear
from .coeffs import shin_zettl
from .exceptions import ContourError
from .propagator import Mesh, characteristic_matrix, integrate_nodes, propagate, transfer_matrix

__all__ = [
    "Eigenvalue",
    "Eigenfunction",
    "char_matrix",
    "char_det",
    "eigenvalues_real_scan",
    "eigenvalues_complex",
    "eigenfunctions",
    "eigenfunction",
    "winding_number",
]

ACCEPT_RTOL = 1e-8
_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class Eigenvalue:
    lam: complex
    multiplicity: int
    residual: float
    scale: float


@dataclass(frozen=True)
class Eigenfunction:
    lam: complex
    nodes: np.ndarray
    w: np.ndarray

    @property
    def dim(self):
        return self.w.shape[1] // 2

    @property
    def y(self):
        return self.w[:, : self.dim]

    @property
    def quasi(self):
        return self.w[:, self.dim :]


def char_matrix(c, bc, lam, max_step=None):
    return characteristic_matrix(shin_zettl(c, lam), bc, max_step=max_step)


def char_det(c, bc, lam, max_step=None):
    """``det(alpha + beta Z_lam(b))``."""
    return complex(np.linalg.det(char_matrix(c, bc, lam, max_step)))


def _char_parts(c, bc, lam, max_step):
    """``D(lam)`` and the size ``||[alpha | beta Z(b)]||`` of its two summands.

    Singularity is judged against the summands rather than ``||D||``: for periodic
    conditions ``D = I - Z(b)`` vanishes identically at a double eigenvalue.
    """
    A = shin_zettl(c, lam)
    BZ = bc.beta @ transfer_matrix(A, max_step)
    return bc.alpha + BZ, float(np.linalg.norm(np.hstack([bc.alpha, BZ]), 2))


def _svals(c, bc, lam, max_step):
    D, scale = _char_parts(c, bc, lam, max_step)
    return np.linalg.svd(D, compute_uv=False), scale


def _make_eigenvalue(c, bc, lam, max_step):
    sv, scale = _svals(c, bc, lam, max_step)
    thresh = ACCEPT_RTOL * scale
    return Eigenvalue(complex(lam), int(np.sum(sv <= thresh)), float(sv[-1]), scale)


def _golden(fun, lo, hi, tol):
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = fun(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = fun(x2)
    return x1 if f1 <= f2 else x2


def _local_minima(vals):
    n = vals.size
    idx = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i < n - 1 else np.inf
        if vals[i] <= left and vals[i] < right or vals[i] < left and vals[i] <= right:
            idx.append(i)
    return idx


def eigenvalues_real_scan(c, bc, window, scan_points=400, max_step=None, threads=1):
    """Real eigenvalues in ``window`` from minima of ``sigma_min(D(lam))``.

    Each bracketing minimum is refined by golden-section search to a width of
    ``1e-10 * max(1, |lam|)`` and accepted when ``sigma_min <= 1e-8 ||[alpha | beta Z(b)]||``.
    """
    bc = as_linear(bc)
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    grid = np.linspace(lo, hi, int(scan_points))

    def smin(lam):
        return _svals(c, bc, lam, max_step)[0][-1]

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = np.array(list(pool.map(smin, grid)))
    else:
        vals = np.array([smin(x) for x in grid])

    found = []

    def accept(a, b, scale_at):
        lam = _golden(smin, a, b, 1e-10 * max(1.0, abs(scale_at)))
        ev = _make_eigenvalue(c, bc, lam, max_step)
        if ev.residual > ACCEPT_RTOL * ev.scale:
            return False
        if any(abs(lam - e.lam.real) <= 1e-9 * max(1.0, abs(lam)) for e in found):
            return False
        found.append(Eigenvalue(complex(lam, 0.0), ev.multiplicity, ev.residual, ev.scale))
        return True

    for i in _local_minima(vals):
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        first = accept(a, b, grid[i])
        # post hoc check: a finer resample of the bracket may reveal a (second) eigenvalue
        fine = np.linspace(a, b, 33)
        fvals = np.array([smin(x) for x in fine])
        extra = 0
        for j in _local_minima(fvals):
            extra += accept(fine[max(j - 1, 0)], fine[min(j + 1, fine.size - 1)], fine[j])
        if first + extra > 1:
            warnings.warn(
                f"bracket [{a:.6g}, {b:.6g}] held more than one eigenvalue; "
                f"rescan with more than {scan_points} points",
                RuntimeWarning,
                stacklevel=2,
            )
    return sorted(found, key=lambda e: e.lam.real)


class _DetEvaluator:
    def __init__(self, c, bc, max_step):
        self.c, self.bc, self.max_step = c, bc, max_step
        self._cache = {}

    def __call__(self, lam):
        lam = complex(lam)
        hit = self._cache.get(lam)
        if hit is None:
            D, scale = _char_parts(self.c, self.bc, lam, self.max_step)
            sv = np.linalg.svd(D, compute_uv=False)
            hit = (complex(np.linalg.det(D)), sv[-1] / scale if scale > 0 else 0.0)
            self._cache[lam] = hit
        return hit


class _OnContour(Exception):
    pass


def _edge_phase(fun, z0, z1, n0, max_splits=24):
    ts = np.linspace(0.0, 1.0, n0 + 1)
    vals = [fun(z0 + (z1 - z0) * t) for t in ts]
    total = 0.0
    worst = min(v[1] for v in vals)
    stack = [(ts[i], ts[i + 1], vals[i], vals[i + 1], 0) for i in range(n0)][::-1]
    while stack:
        ta, tb, fa, fb, depth = stack.pop()
        if fa[0] == 0 or fb[0] == 0:
            raise _OnContour
        ratio = fb[0] / fa[0]
        dphi = math.atan2(ratio.imag, ratio.real)
        if (abs(dphi) > math.pi / 4 or abs(math.log(abs(ratio))) > 2.0) and depth < max_splits:
            tm = 0.5 * (ta + tb)
            fm = fun(z0 + (z1 - z0) * tm)
            worst = min(worst, fm[1])
            stack.append((tm, tb, fm, fb, depth + 1))
            stack.append((ta, tm, fa, fm, depth + 1))
            continue
        total += dphi
    return total, worst


def winding_number(fun, rect, n0=16):
    """Zero count of ``fun`` inside ``rect = (re_lo, re_hi, im_lo, im_hi)``.

    ``fun`` returns ``(det, sigma_min / scale)``. Raises ``_OnContour`` if the contour
    passes within relative distance 1e-10 of a singular ``D``.
    """
    x0, x1, y0, y1 = rect
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total, worst = 0.0, np.inf
    for k in range(4):
        dphi, w = _edge_phase(fun, corners[k], corners[(k + 1) % 4], n0)
        total += dphi
        worst = min(worst, w)
    if worst <= 1e-10:
        raise _OnContour
    turns = total / (2 * math.pi)
    n = int(round(turns))
    if abs(turns - n) > 0.05:
        raise ContourError(f"non-integer winding {turns:.4f} on rectangle {rect}")
    return n


def _newton(fun, z, m=1, maxiter=80):
    for _ in range(maxiter):
        f = fun(z)[0]
        if f == 0:
            return z, True
        h = 1e-6 * max(1.0, abs(z))
        df = (fun(z + h)[0] - fun(z - h)[0]) / (2 * h)
        if df == 0 or not np.isfinite(df):
            return z, False
        step = m * f / df
        z = z - step
        if not np.isfinite(z):
            return z, False
        if abs(step) <= 1e-14 * max(1.0, abs(z)):
            return z, True
    return z, abs(step) <= 1e-9 * max(1.0, abs(z))


def _inside(rect, z, slack):
    x0, x1, y0, y1 = rect
    return x0 - slack <= z.real <= x1 + slack and y0 - slack <= z.imag <= y1 + slack


def _split(rect, frac):
    x0, x1, y0, y1 = rect
    xm = x0 + frac * (x1 - x0)
    ym = y0 + (1 - frac) * (y1 - y0)
    return [(x0, xm, y0, ym), (xm, x1, y0, ym), (xm, x1, ym, y1), (x0, xm, ym, y1)]


def eigenvalues_complex(c, bc, rect, max_depth=40, max_step=None):
    """Eigenvalues inside ``rect = (re_lo, re_hi, im_lo, im_hi)`` by the argument principle.

    The zero count of ``det D`` on the rectangle boundary drives recursive quadrisection
    until each sub-rectangle isolates a root, which is then polished by Newton's method
    with a central-difference derivative.
    """
    bc = as_linear(bc)
    fun = _DetEvaluator(c, bc, max_step)
    rect = tuple(map(float, rect))

    def count(r, n0=16):
        return winding_number(fun, r, n0)

    try:
        n_top = count(rect)
    except _OnContour:
        pad = 1e-6 * max(1.0, max(abs(v) for v in rect))
        rect = (rect[0] - pad, rect[1] + pad, rect[2] - pad, rect[3] + pad)
        try:
            n_top = count(rect)
        except _OnContour as exc:
            raise ContourError(f"char_det vanishes on the contour of {rect}") from exc
    if count(rect, 32) != n_top:
        raise ContourError(f"winding number on {rect} changes under refinement")

    roots = []

    def search(r, n, depth):
        if n == 0:
            return
        x0, x1, y0, y1 = r
        size = max(x1 - x0, y1 - y0)
        center = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        slack = 1e-9 * max(1.0, abs(center))
        tiny = size < 1e-8 * max(1.0, abs(center)) or depth >= max_depth
        z, ok = _newton(fun, center, m=n)
        if ok and _inside(r, z, slack):
            ev = _make_eigenvalue(c, bc, z, max_step)
            if ev.residual <= ACCEPT_RTOL * ev.scale and (n == 1 or ev.multiplicity >= n or tiny):
                roots.append(ev)
                return
        if tiny:
            raise ContourError(f"could not isolate {n} root(s) near {center}")
        for frac in (0.4871, 0.5137, 0.4619):
            try:
                children = _split(r, frac)
                counts = [count(ch) for ch in children]
            except _OnContour:
                continue
            if sum(counts) == n:
                break
        else:
            raise ContourError(f"inconsistent zero counts while subdividing {r}")
        for ch, k in zip(children, counts):
            search(ch, k, depth + 1)

    search(rect, n_top, 0)
    merged = []
    for ev in sorted(roots, key=lambda e: (e.lam.real, e.lam.imag)):
        if merged and abs(ev.lam - merged[-1].lam) <= 1e-9 * max(1.0, abs(ev.lam)):
            continue
        merged.append(ev)
    return merged


def _phase_fix(y, nodes):
    mag = np.abs(y)
    thresh = 1e-8 * mag.max()
    for i in range(y.shape[0]):
        big = np.flatnonzero(mag[i] > thresh)
        if big.size:
            v = y[i, big[0]]
            return np.conj(v) / abs(v)
    return 1.0


def eigenfunctions(c, bc, ev, max_step=None):
    """L2-orthonormal eigenfunctions for ``ev`` (one per null vector of ``D``).

    Each null vector ``v`` of ``D(lam)`` gives ``w(t) = Z_lam(t) v``. A single eigenfunction
    is normalized to ``||y||_2 = 1`` with the first significant component of ``y`` (scanning
    the grid from ``a``) made real positive.
    """
    bc = as_linear(bc)
    A = shin_zettl(c, ev.lam)
    Z = propagate(A, Mesh.for_generator(A, max_step))
    D = characteristic_matrix(A, bc, Z.end)
    _, sv, vh = np.linalg.svd(D)
    scale = float(np.linalg.norm(np.hstack([bc.alpha, bc.beta @ Z.end]), 2))
    k = max(1, int(np.sum(sv <= ACCEPT_RTOL * scale)))
    null = vh[-k:][::-1].conj().T
    nodes = Z.mesh.nodes
    bp = A.breakpoints
    s = c.dim
    ws = [Z.samples @ null[:, j] for j in range(k)]

    def inner(u, v):
        return integrate_nodes(nodes, np.sum(u[:, :s] * v[:, :s].conj(), axis=1), bp)

    basis = []
    for w in ws:
        for b in basis:
            w = w - inner(w, b) * b
        w = w / math.sqrt(abs(inner(w, w)))
        if not basis:
            w = w * _phase_fix(w[:, :s], nodes)
        basis.append(w)
    return [Eigenfunction(ev.lam, nodes, w) for w in basis]


def eigenfunction(c, bc, ev, max_step=None):
    """The normalized eigenfunction of a simple eigenvalue."""
    fns = eigenfunctions(c, bc, ev, max_step)
    if len(fns) > 1:
        raise ValueError(f"eigenvalue {ev.lam} has multiplicity {len(fns)}; use eigenfunctions()")
    return fns[0]
