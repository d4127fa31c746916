"""Green matrices of the first-order problem and the resolvent kernel of ``L``.

For ``D = alpha + beta Z(b)`` invertible, the first-order problem
``w' = A w + phi``, ``alpha w(a) + beta w(b) = 0`` has the Green matrix

    G(t, tau) =  Z(t) D^{-1} alpha Z(tau)^{-1}          tau <= t
    G(t, tau) = -Z(t) D^{-1} beta Z(b) Z(tau)^{-1}      tau >  t

and since ``phi = (0, -f)`` the resolvent kernel of ``L`` is ``Gamma = -g_12``.
Kernels are stored as samples on a shared tensor grid so that distances between
different problems can be taken directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import as_linear
from .coeffs import adjoint_coefficients, shin_zettl
from .propagator import (
    COND_LIMIT,
    Mesh,
    _check_invertible,
    _generator,
    characteristic_matrix,
    integrate_nodes,
    propagate,
    transfer_matrix,
)

__all__ = [
    "GreenMatrix",
    "GreenKernel",
    "green_matrix",
    "green_kernel",
    "resolvent_kernel",
    "apply_resolvent",
    "hs_norm",
    "hs_distance",
    "sup_norm_distance",
    "trapezoid_weights",
    "greens_formula_residual",
    "in_resolvent_set",
]


def trapezoid_weights(grid):
    grid = np.asarray(grid, dtype=float)
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


@dataclass(frozen=True)
class GreenMatrix:
    grid: np.ndarray
    values: np.ndarray
    mu: complex
    bc: object
    Z: np.ndarray
    Z_inv: np.ndarray
    D_inv: np.ndarray
    Zb: np.ndarray

    @property
    def dim(self):
        return self.values.shape[-1] // 2

    def branches(self, i):
        """Both one-sided limits ``(G(t_i, t_i^-), G(t_i, t_i^+))`` on the diagonal."""
        lower = self.Z[i] @ self.D_inv @ self.bc.alpha @ self.Z_inv[i]
        upper = -self.Z[i] @ self.D_inv @ self.bc.beta @ self.Zb @ self.Z_inv[i]
        return lower, upper


@dataclass(frozen=True)
class GreenKernel:
    grid: np.ndarray
    values: np.ndarray
    mu: complex
    bc: object

    @property
    def dim(self):
        return self.values.shape[-1]

    def __call__(self, i, j):
        return self.values[i, j]


def _fundamental_on_grid(A, grid, max_step):
    M = _generator(A)
    mesh = Mesh.build(M.interval, M.breakpoints, max_step, extra_nodes=grid)
    Z = propagate(M, mesh)
    return Z.samples[mesh.index_of(grid)], Z.end


def green_matrix(A, bc, grid, max_step=None):
    """Sample the first-order Green matrix on ``grid x grid`` (diagonal uses ``tau <= t``)."""
    bc = as_linear(bc)
    grid = np.asarray(grid, dtype=float)
    Zg, Zb = _fundamental_on_grid(A, grid, max_step)
    D = characteristic_matrix(A, bc, Zb)
    _check_invertible(D, "μ not in resolvent set")
    D_inv = np.linalg.inv(D)
    Z_inv = np.linalg.inv(Zg)
    left_lo = Zg @ (D_inv @ bc.alpha)
    left_hi = -Zg @ (D_inv @ bc.beta @ Zb)
    lower = np.einsum("iab,jbc->ijac", left_lo, Z_inv)
    upper = np.einsum("iab,jbc->ijac", left_hi, Z_inv)
    mask = (np.arange(grid.size)[None, :] <= np.arange(grid.size)[:, None])[..., None, None]
    values = np.where(mask, lower, upper)
    lam = getattr(A, "lam", 0.0)
    return GreenMatrix(grid, values, complex(lam), bc, Zg, Z_inv, D_inv, Zb)


def green_kernel(gm):
    """``Gamma = -g_12``: upper-right s x s block of the Green matrix, negated."""
    s = gm.dim
    return GreenKernel(gm.grid, -gm.values[..., :s, s:], gm.mu, gm.bc)


def resolvent_kernel(A, bc, grid, max_step=None):
    """Kernel of ``(L - mu)^{-1}`` without materializing the full Green matrix."""
    bc = as_linear(bc)
    grid = np.asarray(grid, dtype=float)
    Zg, Zb = _fundamental_on_grid(A, grid, max_step)
    D = characteristic_matrix(A, bc, Zb)
    _check_invertible(D, "μ not in resolvent set")
    D_inv = np.linalg.inv(D)
    s = bc.dim
    Z_inv = np.linalg.inv(Zg)[:, :, s:]
    left_lo = (Zg @ (D_inv @ bc.alpha))[:, :s, :]
    left_hi = (-Zg @ (D_inv @ bc.beta @ Zb))[:, :s, :]
    lower = np.einsum("iab,jbc->ijac", left_lo, Z_inv)
    upper = np.einsum("iab,jbc->ijac", left_hi, Z_inv)
    mask = (np.arange(grid.size)[None, :] <= np.arange(grid.size)[:, None])[..., None, None]
    return GreenKernel(grid, -np.where(mask, lower, upper), complex(getattr(A, "lam", 0.0)), bc)


def _same_grid(k1, k2):
    if k1.grid.shape != k2.grid.shape or not np.allclose(k1.grid, k2.grid, rtol=0, atol=1e-14):
        raise ValueError("kernels are sampled on different grids")


def apply_resolvent(kernel, f):
    """``y(t_i) = sum_j w_j Gamma(t_i, t_j) f(t_j)`` with trapezoid weights.

    Every ``t_i`` is a grid node, so the trapezoid rule on the full grid is already split
    at the diagonal where the kernel has its kink.
    """
    f = np.asarray(f)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[0] != kernel.grid.size:
        raise ValueError(f"right-hand side has {f.shape[0]} samples, grid has {kernel.grid.size}")
    w = trapezoid_weights(kernel.grid)
    return np.einsum("ijab,j,jb->ia", kernel.values, w, f)


def hs_norm(kernel):
    """``(iint ||Gamma||_F^2)^{1/2}`` by the tensor trapezoid rule."""
    w = trapezoid_weights(kernel.grid)
    sq = np.sum(np.abs(kernel.values) ** 2, axis=(-2, -1))
    return float(np.sqrt(w @ sq @ w))


def hs_distance(k1, k2):
    _same_grid(k1, k2)
    return hs_norm(GreenKernel(k1.grid, k1.values - k2.values, k1.mu, k1.bc))


def sup_norm_distance(k1, k2):
    """``max_{i,j} ||Gamma_1 - Gamma_2||_F`` on the grid."""
    _same_grid(k1, k2)
    return float(np.max(np.sqrt(np.sum(np.abs(k1.values - k2.values) ** 2, axis=(-2, -1)))))


def greens_formula_residual(c, y_traj, z_traj):
    """LHS minus RHS of Green's formula for a trajectory pair.

    ``y_traj`` solves the problem for ``c`` and ``z_traj`` the problem for the adjoint
    coefficients, both from :func:`solve_inhomogeneous`, so ``D^[2] y`` and ``D^{2} z``
    are known exactly from their right-hand sides. Returns

        int (D^[2]y . conj z - y . conj D^{2}z) dt - (D^[1]y . conj z - y . conj D^{1}z)|_a^b
    """
    if y_traj.nodes.shape != z_traj.nodes.shape or not np.allclose(y_traj.nodes, z_traj.nodes):
        raise ValueError("trajectories are sampled on different grids")
    y, dy = y_traj.y, y_traj.quasi
    z, dz = z_traj.y, z_traj.quasi
    integrand = np.sum(y_traj.second_quasi_derivative() * z.conj(), axis=1) - np.sum(
        y * z_traj.second_quasi_derivative().conj(), axis=1
    )
    bp = np.union1d(c.breakpoints, adjoint_coefficients(c).breakpoints)
    lhs = integrate_nodes(y_traj.nodes, integrand, bp)
    edge = np.sum(dy * z.conj(), axis=1) - np.sum(y * dz.conj(), axis=1)
    return complex(lhs - (edge[-1] - edge[0]))


def in_resolvent_set(A, bc, max_step=None):
    """``(cond(D(mu)) < 1e12, cond(D(mu)))`` for a Shin-Zettl matrix at shift ``mu``."""
    bc = as_linear(bc)
    D = characteristic_matrix(A, bc, transfer_matrix(A, max_step))
    cond = float(np.linalg.cond(D))
    return bool(np.isfinite(cond) and cond < COND_LIMIT), cond


def kernel_for(c, bc, mu, grid, max_step=None):
    """Resolvent kernel of ``L`` at ``mu`` for a coefficient set."""
    return resolvent_kernel(shin_zettl(c, mu), bc, grid, max_step)
