"""Fundamental matrices and inhomogeneous solves for ``w' = A(t) w``.

Steps never straddle a coefficient breakpoint. On pieces where the generator is
constant the step transfer is the exact exponential ``exp(h A)``; elsewhere the
fourth-order commutator-free Magnus scheme with two Gauss nodes is used:

    Phi = exp(h (a1 A(t + c1 h) + a2 A(t + c2 h))) @ exp(h (a2 A(t + c1 h) + a1 A(t + c2 h)))

with ``c1,2 = 1/2 -+ sqrt(3)/6`` and ``a1,2 = 1/4 -+ sqrt(3)/6``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm

from .boundary import as_linear
from .coeffs import PiecewiseMatrixPoly, ShinZettlMatrix, merge_breakpoints
from .exceptions import NotInResolventSetError

__all__ = [
    "Mesh",
    "FundamentalSolution",
    "Trajectory",
    "propagate",
    "transfer_matrix",
    "solve_inhomogeneous",
    "quasi_derivative",
    "sup_distance",
    "characteristic_matrix",
    "integrate_nodes",
    "COND_LIMIT",
]

COND_LIMIT = 1e12

_SQ3 = np.sqrt(3.0)
_C1, _C2 = 0.5 - _SQ3 / 6, 0.5 + _SQ3 / 6
_A1, _A2 = 0.25 - _SQ3 / 6, 0.25 + _SQ3 / 6


def _generator(A):
    if isinstance(A, ShinZettlMatrix):
        return A.matrix
    if isinstance(A, PiecewiseMatrixPoly):
        return A
    raise TypeError(f"cannot propagate {type(A).__name__}")


@dataclass(frozen=True)
class Mesh:
    """Propagation nodes covering ``[a, b]``; contains every required breakpoint."""

    nodes: np.ndarray
    max_step: float

    @classmethod
    def build(cls, interval, breakpoints=(), max_step=None, extra_nodes=()):
        a, b = map(float, interval)
        if max_step is None:
            max_step = (b - a) / 200
        if max_step <= 0:
            raise ValueError("max_step must be positive")
        fixed = merge_breakpoints([a, b], breakpoints, extra_nodes)
        fixed = fixed[(fixed >= a) & (fixed <= b)]
        parts = []
        for lo, hi in zip(fixed[:-1], fixed[1:]):
            n = max(1, int(np.ceil((hi - lo) / max_step - 1e-9)))
            parts.append(np.linspace(lo, hi, n + 1)[:-1])
        parts.append([b])
        nodes = np.concatenate(parts)
        nodes.setflags(write=False)
        return cls(nodes, float(max_step))

    @classmethod
    def for_generator(cls, A, max_step=None, extra_nodes=()):
        M = _generator(A)
        return cls.build(M.interval, M.breakpoints, max_step, extra_nodes)

    @property
    def interval(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    def __len__(self):
        return self.nodes.size

    def contains(self, points, rtol=1e-12):
        points = np.atleast_1d(np.asarray(points, dtype=float))
        scale = max(self.nodes[-1] - self.nodes[0], 1.0)
        idx = np.clip(np.searchsorted(self.nodes, points), 1, self.nodes.size - 1)
        gap = np.minimum(np.abs(self.nodes[idx] - points), np.abs(self.nodes[idx - 1] - points))
        return gap <= rtol * scale

    def index_of(self, points, rtol=1e-12):
        """Node indices of ``points``; every point must be a node."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        if not np.all(self.contains(points, rtol)):
            raise ValueError("points are not mesh nodes")
        idx = np.searchsorted(self.nodes, points)
        idx = np.clip(idx, 0, self.nodes.size - 1)
        left = np.clip(idx - 1, 0, None)
        pick_left = np.abs(self.nodes[left] - points) < np.abs(self.nodes[idx] - points)
        return np.where(pick_left, left, idx)


def step_transfers(A, t0, t1):
    """Transfer matrices ``Phi`` with ``Z(t1) = Phi Z(t0)`` for steps inside single pieces.

    ``t0`` and ``t1`` are equal-length arrays; a step may be a partial step starting at a
    node (used for interior quadrature points).
    """
    M = _generator(A)
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    h = t1 - t0
    n = M.dim
    piece = M.piece_index(np.clip(0.5 * (t0 + t1), *M.interval))
    constant = M.piece_degrees()[piece] == 0
    out = np.empty((t0.size, n, n), dtype=complex)
    if np.any(constant):
        k = np.flatnonzero(constant)
        out[k] = expm(h[k, None, None] * M.coeffs[piece[k], 0])
    if not np.all(constant):
        k = np.flatnonzero(~constant)
        g1 = M.eval_on_piece_batch(piece[k], t0[k] + _C1 * h[k])
        g2 = M.eval_on_piece_batch(piece[k], t0[k] + _C2 * h[k])
        hk = h[k, None, None]
        first = expm(hk * (_A2 * g1 + _A1 * g2))
        second = expm(hk * (_A1 * g1 + _A2 * g2))
        out[k] = second @ first
    return out


@dataclass(frozen=True)
class FundamentalSolution:
    """Samples ``Z(t_k)`` of ``Z' = A Z``, ``Z(a) = I`` and the per-step transfers."""

    mesh: Mesh
    lam: complex
    samples: np.ndarray
    transfers: np.ndarray
    generator: PiecewiseMatrixPoly

    @property
    def end(self):
        return self.samples[-1]

    def __call__(self, t):
        """``Z(t)`` at arbitrary points (nodes are looked up, others propagated locally)."""
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)
        nodes = self.mesh.nodes
        idx = np.clip(np.searchsorted(nodes, flat, side="right") - 1, 0, nodes.size - 1)
        out = self.samples[idx].copy()
        off = flat != nodes[idx]
        if np.any(off):
            phi = step_transfers(self.generator, nodes[idx[off]], flat[off])
            out[off] = phi @ self.samples[idx[off]]
        return out.reshape(t.shape + out.shape[-2:])


def propagate(A, mesh):
    """Fundamental matrix on ``mesh`` (which must contain the generator's breakpoints)."""
    M = _generator(A)
    nodes = mesh.nodes
    if np.any(np.diff(nodes) <= 0):
        raise ValueError("mesh nodes must be strictly increasing (nonpositive step)")
    if not np.allclose(mesh.interval, M.interval, rtol=0, atol=1e-13 * max(1.0, nodes[-1] - nodes[0])):
        raise ValueError("mesh does not cover the coefficient interval")
    if not np.all(mesh.contains(M.breakpoints)):
        raise ValueError("mesh is missing a coefficient breakpoint")
    phi = step_transfers(M, nodes[:-1], nodes[1:])
    Z = np.empty((nodes.size,) + phi.shape[1:], dtype=complex)
    Z[0] = np.eye(M.dim)
    for k in range(phi.shape[0]):
        Z[k + 1] = phi[k] @ Z[k]
    lam = A.lam if isinstance(A, ShinZettlMatrix) else 0.0
    return FundamentalSolution(mesh, complex(lam), Z, phi, M)


def transfer_matrix(A, max_step=None):
    """``Z(b)`` only; constant pieces are crossed with a single exponential."""
    M = _generator(A)
    a, b = M.interval
    if max_step is None:
        max_step = (b - a) / 200
    bp = M.breakpoints
    degs = M.piece_degrees()
    t0, t1 = [], []
    for k in range(M.n_pieces):
        n = 1 if degs[k] == 0 else max(1, int(np.ceil((bp[k + 1] - bp[k]) / max_step - 1e-9)))
        pts = np.linspace(bp[k], bp[k + 1], n + 1)
        t0.append(pts[:-1])
        t1.append(pts[1:])
    phi = step_transfers(M, np.concatenate(t0), np.concatenate(t1))
    Z = np.eye(M.dim, dtype=complex)
    for p in phi:
        Z = p @ Z
    return Z


def characteristic_matrix(A, bc, Zb=None, max_step=None):
    """``D = alpha + beta Z(b)`` for the boundary condition ``alpha w(a) + beta w(b) = 0``."""
    bc = as_linear(bc)
    if Zb is None:
        Zb = transfer_matrix(A, max_step)
    return bc.alpha + bc.beta @ Zb


def _check_invertible(D, what):
    cond = np.linalg.cond(D)
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise NotInResolventSetError(what, cond)
    return cond


@dataclass(frozen=True)
class Trajectory:
    """Samples of ``w = (y, D^[1] y)`` on mesh nodes, with the data that produced them.

    ``rhs`` holds ``f`` at the nodes, so that ``D^[2] y = -lam y - f`` is known exactly.
    """

    nodes: np.ndarray
    w: np.ndarray
    lam: complex
    rhs: np.ndarray
    breakpoints: np.ndarray

    @property
    def dim(self):
        return self.w.shape[1] // 2

    @property
    def y(self):
        return self.w[:, : self.dim]

    @property
    def quasi(self):
        return self.w[:, self.dim :]

    def second_quasi_derivative(self):
        return -self.lam * self.y - self.rhs


def _eval_rhs(f, t, s):
    if f is None:
        return np.zeros((t.size, s), dtype=complex)
    try:
        out = np.asarray(f(t), dtype=complex)
    except (TypeError, ValueError):
        out = None
    if out is None or out.shape not in ((t.size, s), (t.size,)):
        out = np.array([np.asarray(f(x), dtype=complex).reshape(s) for x in t])
    return out.reshape(t.size, s)


def solve_inhomogeneous(A, f, bc, mesh, gauss_points=6):
    """Solve ``w' = A w + (0, -f)``, ``alpha w(a) + beta w(b) = 0`` by variation of parameters.

    ``f`` is a callable returning the s-vector right-hand side (vectorized over ``t`` if
    possible). For a Shin-Zettl matrix at shift ``lam`` this solves ``(L - lam) y = f``.
    """
    M = _generator(A)
    bc = as_linear(bc)
    s = M.dim // 2
    Z = propagate(M, mesh)
    D = characteristic_matrix(M, bc, Z.end)
    _check_invertible(D, "λ is not in the resolvent set for this boundary condition")

    nodes = mesh.nodes
    x, wq = np.polynomial.legendre.leggauss(gauss_points)
    h = np.diff(nodes)
    t0 = np.repeat(nodes[:-1], gauss_points)
    tau = t0 + np.repeat(h, gauss_points) * np.tile(0.5 * (x + 1), h.size)
    Ztau = step_transfers(M, t0, tau) @ np.repeat(Z.samples[:-1], gauss_points, axis=0)
    phi = np.zeros((tau.size, 2 * s), dtype=complex)
    phi[:, s:] = -_eval_rhs(f, tau, s)
    vals = np.linalg.solve(Ztau, phi[..., None])[..., 0]
    weights = np.repeat(0.5 * h, gauss_points) * np.tile(wq, h.size)
    incr = (weights[:, None] * vals).reshape(h.size, gauss_points, 2 * s).sum(axis=1)
    acc = np.zeros((nodes.size, 2 * s), dtype=complex)
    np.cumsum(incr, axis=0, out=acc[1:])

    c = -np.linalg.solve(D, bc.beta @ Z.end @ acc[-1])
    w = np.einsum("kij,kj->ki", Z.samples, c[None, :] + acc)
    lam = A.lam if isinstance(A, ShinZettlMatrix) else 0.0
    return Trajectory(nodes, w, complex(lam), _eval_rhs(f, nodes, s), M.breakpoints)


def quasi_derivative(traj, k):
    """``D^[0] y = y`` (k=0) or ``D^[1] y`` (k=1) read off the trajectory blocks."""
    if k == 0:
        return traj.y
    if k == 1:
        return traj.quasi
    raise ValueError("quasi-derivative order must be 0 or 1")


def sup_distance(Z1, Z2):
    """``max_k ||Z1(t_k) - Z2(t_k)||_2`` over the merged node set."""
    if not np.allclose(Z1.mesh.interval, Z2.mesh.interval):
        raise ValueError("fundamental solutions live on different intervals")
    nodes = merge_breakpoints(Z1.mesh.nodes, Z2.mesh.nodes)
    diff = Z1(nodes) - Z2(nodes)
    return float(np.max(np.linalg.norm(diff, 2, axis=(-2, -1))))


def integrate_nodes(nodes, values, breakpoints=()):
    """Integrate node samples with composite Simpson, restarted at every breakpoint.

    The integrand is assumed continuous (only its derivatives may jump at breakpoints),
    since a breakpoint node carries a single sample shared by both sides.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values)
    bp = np.asarray(breakpoints, dtype=float)
    bp = bp[(bp > nodes[0]) & (bp < nodes[-1])]
    cuts = {0, nodes.size - 1}
    if bp.size:
        idx = np.clip(np.searchsorted(nodes, bp), 1, nodes.size - 1)
        idx = np.where(np.abs(nodes[idx - 1] - bp) < np.abs(nodes[idx] - bp), idx - 1, idx)
        cuts.update(int(i) for i in idx)
    cuts = sorted(cuts)
    total = 0
    for i, j in zip(cuts[:-1], cuts[1:]):
        total = total + simpson(values[i : j + 1], x=nodes[i : j + 1], axis=0)
    return total
