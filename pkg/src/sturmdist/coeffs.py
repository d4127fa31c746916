"""Matrix-valued piecewise polynomial coefficients and the Shin-Zettl system matrix.

The coefficients of ``l(y) = -(p y')' + Q' y`` enter the computation only through
``p^{-1}`` and ``Q``. Both are stored as piecewise polynomials on a breakpoint mesh;
jumps of ``Q`` across breakpoints are what realize delta-type potentials.

Pieces are polynomials in the local variable ``t - left`` where ``left`` is the left
endpoint of the piece. At an interior breakpoint the right-limit piece is used; at the
right endpoint ``b`` the last piece is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np

__all__ = [
    "PiecewiseMatrixPoly",
    "CoefficientSet",
    "ShinZettlMatrix",
    "make_coefficients",
    "adjoint_coefficients",
    "shin_zettl",
    "merge_breakpoints",
]

HERMITIAN_TOL = 1e-12


def merge_breakpoints(*meshes, rtol=1e-13):
    """Sorted union of breakpoint arrays, collapsing points closer than ``rtol*(b-a)``."""
    pts = np.sort(np.concatenate([np.asarray(m, dtype=float) for m in meshes]))
    if pts.size == 0:
        return pts
    scale = max(pts[-1] - pts[0], 1.0)
    keep = np.concatenate([[True], np.diff(pts) > rtol * scale])
    return pts[keep]


def _taylor_shift(coeffs, delta):
    """Re-expand ``sum_k c_k x^k`` as a polynomial in ``x - delta``.

    ``coeffs`` has shape (d+1, s, s).
    """
    d = coeffs.shape[0] - 1
    if d == 0 or delta == 0.0:
        return coeffs.copy()
    shift = np.zeros((d + 1, d + 1))
    for k in range(d + 1):
        for j in range(k + 1):
            shift[j, k] = comb(k, j) * delta ** (k - j)
    return np.einsum("jk,kab->jab", shift, coeffs)


class PiecewiseMatrixPoly:
    """Piecewise polynomial function ``(a, b) -> C^{s x s}``.

    Parameters
    ----------
    breakpoints : array_like, shape (m+1,)
        Strictly increasing, first entry ``a``, last entry ``b``.
    coeffs : array_like, shape (m, d+1, s, s)
        ``coeffs[k, j]`` multiplies ``(t - breakpoints[k])**j`` on piece ``k``.
    """

    def __init__(self, breakpoints, coeffs):
        bp = np.array(breakpoints, dtype=float)
        c = np.array(coeffs, dtype=complex)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if c.ndim == 3:
            c = c[:, None]
        if c.ndim != 4 or c.shape[0] != bp.size - 1 or c.shape[2] != c.shape[3]:
            raise ValueError(
                f"coefficient array of shape {c.shape} does not match "
                f"{bp.size - 1} pieces of square matrices"
            )
        bp.setflags(write=False)
        c.setflags(write=False)
        self._bp = bp
        self._c = c

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, interval, value):
        value = np.atleast_2d(np.asarray(value, dtype=complex))
        return cls(list(interval), value[None, None])

    @classmethod
    def identity(cls, interval, s=1):
        return cls.constant(interval, np.eye(s))

    @classmethod
    def zeros(cls, interval, s=1):
        return cls.constant(interval, np.zeros((s, s)))

    @classmethod
    def step(cls, interval, t0, left, right):
        """Piecewise constant with value ``left`` on (a, t0) and ``right`` on (t0, b)."""
        a, b = interval
        if not a < t0 < b:
            raise ValueError("jump location must lie inside the interval")
        left = np.atleast_2d(np.asarray(left, dtype=complex))
        right = np.atleast_2d(np.asarray(right, dtype=complex))
        return cls([a, t0, b], np.stack([left, right])[:, None])

    @classmethod
    def from_pieces(cls, breakpoints, pieces):
        """Build from a list of per-piece coefficient lists of possibly different degree."""
        pieces = [np.asarray(p, dtype=complex) for p in pieces]
        pieces = [p.reshape(-1, 1, 1) if p.ndim <= 1 else p for p in pieces]
        if any(p.ndim != 3 for p in pieces):
            raise ValueError("each piece is a list of scalars or of s x s matrices")
        d = max(p.shape[0] for p in pieces) - 1
        s = pieces[0].shape[-1]
        c = np.zeros((len(pieces), d + 1, s, s), dtype=complex)
        for k, p in enumerate(pieces):
            if p.shape[1:] != (s, s):
                raise ValueError(f"piece {k} has coefficient shape {p.shape[1:]}, expected {(s, s)}")
            c[k, : p.shape[0]] = p
        return cls(breakpoints, c)

    @classmethod
    def block(cls, blocks):
        """Assemble a block matrix function from a nested list of equal-size blocks."""
        flat = [f for row in blocks for f in row]
        bp = merge_breakpoints(*(f.breakpoints for f in flat))
        flat = [f.refine(bp) for f in flat]
        d = max(f.degree for f in flat)
        rows = []
        it = iter(flat)
        for row in blocks:
            rows.append([_pad_degree(next(it).coeffs, d) for _ in row])
        c = np.concatenate([np.concatenate(r, axis=3) for r in rows], axis=2)
        return cls(bp, c)

    # -- basic properties ---------------------------------------------------

    @property
    def breakpoints(self):
        return self._bp

    @property
    def coeffs(self):
        return self._c

    @property
    def interval(self):
        return float(self._bp[0]), float(self._bp[-1])

    @property
    def dim(self):
        return self._c.shape[-1]

    @property
    def degree(self):
        return self._c.shape[1] - 1

    @property
    def n_pieces(self):
        return self._c.shape[0]

    def piece_degrees(self):
        """Effective degree of every piece (trailing zero coefficients ignored)."""
        nz = np.any(self._c != 0, axis=(2, 3))
        deg = np.zeros(self.n_pieces, dtype=int)
        for k in range(self.n_pieces):
            idx = np.flatnonzero(nz[k])
            deg[k] = idx[-1] if idx.size else 0
        return deg

    def piece_index(self, t):
        """Index of the active piece at ``t`` (right-limit convention, last piece at ``b``)."""
        t = np.asarray(t, dtype=float)
        a, b = self.interval
        if np.any(t < a) or np.any(t > b):
            raise ValueError(f"evaluation point outside [{a}, {b}]")
        idx = np.searchsorted(self._bp, t, side="right") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = self.piece_index(t)
        x = (t - self._bp[idx])[..., None, None]
        c = self._c[idx]
        val = c[..., -1, :, :]
        for j in range(self.degree - 1, -1, -1):
            val = val * x + c[..., j, :, :]
        return val

    def eval_on_piece(self, k, t):
        """Evaluate the polynomial of piece ``k`` at ``t`` (no piece lookup)."""
        x = (np.asarray(t, dtype=float) - self._bp[k])[..., None, None]
        c = self._c[k]
        val = np.broadcast_to(c[-1], x.shape[:-2] + c.shape[1:]).astype(complex)
        for j in range(self.degree - 1, -1, -1):
            val = val * x + c[j]
        return val

    def eval_on_piece_batch(self, pieces, t):
        """Evaluate piece ``pieces[i]`` at ``t[i]`` for every ``i``."""
        pieces = np.asarray(pieces)
        x = (np.asarray(t, dtype=float) - self._bp[pieces])[..., None, None]
        c = self._c[pieces]
        val = c[..., -1, :, :]
        for j in range(self.degree - 1, -1, -1):
            val = val * x + c[..., j, :, :]
        return val

    def __repr__(self):
        a, b = self.interval
        return f"PiecewiseMatrixPoly(({a}, {b}), pieces={self.n_pieces}, degree={self.degree}, dim={self.dim})"

    # -- algebra ------------------------------------------------------------

    def refine(self, breakpoints):
        """Same function on a finer mesh (``breakpoints`` must contain the current ones)."""
        new = np.asarray(breakpoints, dtype=float)
        if new.shape == self._bp.shape and np.all(new == self._bp):
            return self
        if not (np.isclose(new[0], self._bp[0]) and np.isclose(new[-1], self._bp[-1])):
            raise ValueError("refinement must cover the same interval")
        old_idx = np.clip(np.searchsorted(self._bp, new[:-1], side="right") - 1, 0, self.n_pieces - 1)
        scale = self._bp[-1] - self._bp[0]
        missing = [x for x in self._bp if np.min(np.abs(new - x)) > 1e-13 * scale]
        if missing:
            raise ValueError(f"refinement drops breakpoints {missing}")
        c = np.stack([_taylor_shift(self._c[k], new[i] - self._bp[k]) for i, k in enumerate(old_idx)])
        return PiecewiseMatrixPoly(new, c)

    def _aligned(self, other):
        _check_compatible(self, other)
        bp = merge_breakpoints(self._bp, other.breakpoints)
        return self.refine(bp), other.refine(bp), bp

    def __add__(self, other):
        if not isinstance(other, PiecewiseMatrixPoly):
            return self + PiecewiseMatrixPoly.constant(self.interval, np.asarray(other) * np.eye(self.dim))
        f, g, bp = self._aligned(other)
        d = max(f.degree, g.degree)
        return PiecewiseMatrixPoly(bp, _pad_degree(f.coeffs, d) + _pad_degree(g.coeffs, d))

    __radd__ = __add__

    def __neg__(self):
        return PiecewiseMatrixPoly(self._bp, -self._c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, PiecewiseMatrixPoly):
            raise TypeError("use @ for the matrix product of two coefficient functions")
        return PiecewiseMatrixPoly(self._bp, self._c * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        f, g, bp = self._aligned(other)
        df, dg = f.degree, g.degree
        out = np.zeros((bp.size - 1, df + dg + 1, self.dim, self.dim), dtype=complex)
        for i in range(df + 1):
            for j in range(dg + 1):
                out[:, i + j] += f.coeffs[:, i] @ g.coeffs[:, j]
        return PiecewiseMatrixPoly(bp, out)

    def adjoint(self):
        """Pointwise conjugate transpose."""
        return PiecewiseMatrixPoly(self._bp, np.conj(np.swapaxes(self._c, -1, -2)))

    def trimmed(self):
        """Drop trailing all-zero coefficient orders."""
        d = int(self.piece_degrees().max())
        if d == self.degree:
            return self
        return PiecewiseMatrixPoly(self._bp, self._c[:, : d + 1])

    # -- norms --------------------------------------------------------------

    def l1_norm(self):
        """``int_a^b ||f(t)||_2 dt`` with the spectral norm, per-piece Gauss-Legendre.

        Scalar pieces are split at real zeros of the polynomial so that ``|f|`` is
        integrated exactly.
        """
        total = 0.0
        degs = self.piece_degrees()
        for k in range(self.n_pieces):
            lo, hi = self._bp[k], self._bp[k + 1]
            deg = int(degs[k])
            if deg == 0:
                total += (hi - lo) * np.linalg.norm(self._c[k, 0], 2)
                continue
            cuts = [lo, hi]
            if self.dim == 1:
                cuts = _scalar_sign_cuts(self._c[k, : deg + 1, 0, 0], lo, hi)
            x, w = np.polynomial.legendre.leggauss(2 * deg + 4)
            for l, r in zip(cuts[:-1], cuts[1:]):
                t = 0.5 * (r - l) * x + 0.5 * (r + l)
                vals = self.eval_on_piece(k, t)
                total += 0.5 * (r - l) * np.dot(w, np.linalg.norm(vals, 2, axis=(-2, -1)))
        return float(total)

    def sample_points(self, per_piece=5):
        """Gauss points strictly inside every piece (used for symmetry checks)."""
        x, _ = np.polynomial.legendre.leggauss(per_piece)
        lo, hi = self._bp[:-1, None], self._bp[1:, None]
        return (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel()

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        degs = self.piece_degrees()
        pieces = []
        for k in range(self.n_pieces):
            mats = []
            for j in range(degs[k] + 1):
                mats.append([[float(z.real), float(z.imag)] for z in self._c[k, j].ravel()])
            pieces.append({"degree": int(degs[k]), "coeffs": mats})
        return {"breakpoints": [float(x) for x in self._bp], "pieces": pieces}

    @classmethod
    def from_dict(cls, data, dim):
        bp = data["breakpoints"]
        raw = data["pieces"]
        if len(raw) != len(bp) - 1:
            raise ValueError(f"{len(bp) - 1} pieces expected, got {len(raw)}")
        pieces = []
        for k, piece in enumerate(raw):
            deg = int(piece["degree"])
            mats = piece["coeffs"]
            if len(mats) != deg + 1:
                raise ValueError(f"piece {k}: degree {deg} needs {deg + 1} coefficient matrices")
            arr = []
            for m in mats:
                if len(m) != dim * dim:
                    raise ValueError(
                        f"piece {k}: each coefficient matrix is a flat list of {dim * dim} [re, im] pairs, got {len(m)} entries"
                    )
                try:
                    arr.append(np.array([complex(re, im) for re, im in m]).reshape(dim, dim))
                except (TypeError, ValueError):
                    raise ValueError(f"piece {k}: coefficient entries must be [re, im] pairs") from None
            pieces.append(arr)
        return cls.from_pieces(bp, pieces)


def _pad_degree(c, d):
    if c.shape[1] == d + 1:
        return c
    out = np.zeros(c.shape[:1] + (d + 1,) + c.shape[2:], dtype=complex)
    out[:, : c.shape[1]] = c
    return out


def _scalar_sign_cuts(c, lo, hi):
    """Split points of [lo, hi] at real zeros of the local polynomial ``sum c_j x^j``."""
    cuts = [lo, hi]
    for part in (c.real, c.imag):
        if not np.any(part):
            continue
        p = np.polynomial.Polynomial(part).trim()
        if p.degree() < 1:
            continue
        for r in p.roots():
            if abs(r.imag) < 1e-12 * max(1.0, abs(r)) and 0 < r.real < hi - lo:
                cuts.append(lo + r.real)
    return sorted(set(cuts))


def _check_compatible(f, g):
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    (a1, b1), (a2, b2) = f.interval, g.interval
    scale = max(b1 - a1, 1.0)
    if abs(a1 - a2) > 1e-13 * scale or abs(b1 - b2) > 1e-13 * scale:
        raise ValueError(f"interval mismatch: {f.interval} vs {g.interval}")


@dataclass(frozen=True)
class CoefficientSet:
    """The pair ``(p^{-1}, Q)`` together with the three products entering the system."""

    p_inv: PiecewiseMatrixPoly
    Q: PiecewiseMatrixPoly
    hermitian: bool = False
    p_inv_Q: PiecewiseMatrixPoly = field(init=False, repr=False)
    Q_p_inv: PiecewiseMatrixPoly = field(init=False, repr=False)
    Q_p_inv_Q: PiecewiseMatrixPoly = field(init=False, repr=False)

    def __post_init__(self):
        _check_compatible(self.p_inv, self.Q)
        pq = (self.p_inv @ self.Q).trimmed()
        qp = (self.Q @ self.p_inv).trimmed()
        qpq = (qp @ self.Q).trimmed()
        object.__setattr__(self, "p_inv_Q", pq)
        object.__setattr__(self, "Q_p_inv", qp)
        object.__setattr__(self, "Q_p_inv_Q", qpq)

    @property
    def interval(self):
        return self.p_inv.interval

    @property
    def dim(self):
        return self.p_inv.dim

    @property
    def breakpoints(self):
        return merge_breakpoints(self.p_inv.breakpoints, self.Q.breakpoints)

    def hypothesis_norms(self):
        """L1 norms of p^{-1}, p^{-1}Q, Qp^{-1}, Qp^{-1}Q (all finite for piecewise polynomials)."""
        return tuple(f.l1_norm() for f in (self.p_inv, self.p_inv_Q, self.Q_p_inv, self.Q_p_inv_Q))


def make_coefficients(p_inv, Q, hermitian=False):
    """Validate ``(p^{-1}, Q)`` and form the products on the merged mesh.

    Raises
    ------
    ValueError
        On dimension or interval mismatch, or if ``hermitian`` is set and a sampled
        value of ``p^{-1}`` or ``Q`` deviates from its adjoint by more than 1e-12.
    """
    _check_compatible(p_inv, Q)
    if hermitian:
        for name, f in (("p_inv", p_inv), ("Q", Q)):
            vals = f(f.sample_points())
            defect = np.max(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2))))
            if defect > HERMITIAN_TOL:
                raise ValueError(f"{name} is not Hermitian (defect {defect:.3e})")
    return CoefficientSet(p_inv, Q, bool(hermitian))


def adjoint_coefficients(c):
    """Coefficients ``((p^{-1})^*, Q^*)`` of the formally adjoint expression."""
    return CoefficientSet(c.p_inv.adjoint(), c.Q.adjoint(), c.hermitian)


@dataclass(frozen=True)
class ShinZettlMatrix:
    """``A(t; lam) = [[p^{-1}Q, p^{-1}], [-Qp^{-1}Q - lam I, -Qp^{-1}]]``.

    The spectral shift folds ``l[y] = lam y`` into the first-order system.
    """

    source: CoefficientSet
    lam: complex = 0.0

    @cached_property
    def matrix(self):
        c = self.source
        lower_left = -c.Q_p_inv_Q - self.lam
        A = PiecewiseMatrixPoly.block([[c.p_inv_Q, c.p_inv], [lower_left, -c.Q_p_inv]])
        # tr(p^{-1}Q) = tr(Qp^{-1}); strip the roundoff left by forming them separately
        coeffs = np.array(A.coeffs)
        n = coeffs.shape[-1]
        tr = np.trace(coeffs, axis1=-2, axis2=-1)
        coeffs -= (tr / n)[..., None, None] * np.eye(n)
        return PiecewiseMatrixPoly(A.breakpoints, coeffs)

    @property
    def interval(self):
        return self.source.interval

    @property
    def dim(self):
        return self.source.dim

    @property
    def breakpoints(self):
        return self.matrix.breakpoints

    def __call__(self, t):
        return self.matrix(t)


def shin_zettl(c, lam=0.0):
    return ShinZettlMatrix(c, complex(lam))
