"""Resolvent-convergence experiments for families ``(p_eps^{-1}, Q_eps, alpha(eps), beta(eps))``.

A family is a finite ladder of positive ``eps`` plus the limit member ``eps = 0``. For
each member we record the four L1 hypothesis distances, the boundary-matrix distances,
the sup-norm deviation of the propagator of ``A_eps - A_0`` from the identity, and the
Hilbert-Schmidt and sup-norm distances of the resolvent kernels at a fixed ``mu``.
No convergence rate is asserted; reports show the raw ladder.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import as_linear
from .coeffs import PiecewiseMatrixPoly, make_coefficients, shin_zettl
from .exceptions import NotInResolventSetError
from .green import hs_distance, in_resolvent_set, resolvent_kernel, sup_norm_distance
from .propagator import Mesh, propagate

__all__ = [
    "Family",
    "HypothesisDistances",
    "ReportRow",
    "ConvergenceReport",
    "hypothesis_distances",
    "mm_deviation",
    "resolvent_distances",
    "make_mollified_delta_family",
    "make_rotated_boundary_family",
]

REPORT_COLUMNS = [
    "eps", "cond1", "cond2", "cond3", "cond4", "cond5_alpha", "cond5_beta",
    "mm_dev", "hs_dist", "sup_dist", "status",
]


@dataclass(frozen=True)
class Family:
    """Ladder of coefficient sets and boundary conditions indexed by ``eps``; key 0.0 is the limit."""

    members: dict
    mu: complex = 0.0

    def __post_init__(self):
        if 0.0 not in self.members:
            raise ValueError("family needs the limit member eps = 0")
        members = {float(k): (c, as_linear(bc)) for k, (c, bc) in self.members.items()}
        c0, bc0 = members[0.0]
        for eps, (c, bc) in members.items():
            if c.dim != c0.dim or not np.allclose(c.interval, c0.interval):
                raise ValueError(f"member eps={eps} has a different interval or dimension")
            if bc.dim != c0.dim:
                raise ValueError(f"member eps={eps} has boundary matrices of the wrong size")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "mu", complex(self.mu))

    @property
    def epsilons(self):
        return sorted((e for e in self.members if e > 0), reverse=True)

    @property
    def limit(self):
        return self.members[0.0]

    @property
    def interval(self):
        return self.limit[0].interval

    def member(self, eps):
        try:
            return self.members[float(eps)]
        except KeyError:
            raise KeyError(f"no family member with eps={eps}") from None


@dataclass(frozen=True)
class HypothesisDistances:
    cond1: float
    cond2: float
    cond3: float
    cond4: float
    cond5_alpha: float
    cond5_beta: float

    def as_tuple(self):
        return (self.cond1, self.cond2, self.cond3, self.cond4, self.cond5_alpha, self.cond5_beta)


def hypothesis_distances(fam, eps):
    c, bc = fam.member(eps)
    c0, bc0 = fam.limit
    return HypothesisDistances(
        (c.p_inv - c0.p_inv).l1_norm(),
        (c.p_inv_Q - c0.p_inv_Q).l1_norm(),
        (c.Q_p_inv - c0.Q_p_inv).l1_norm(),
        (c.Q_p_inv_Q - c0.Q_p_inv_Q).l1_norm(),
        float(np.linalg.norm(bc.alpha - bc0.alpha, 2)),
        float(np.linalg.norm(bc.beta - bc0.beta, 2)),
    )


def mm_deviation(fam, eps, mesh=None, max_step=None):
    """``sup_t ||Z(t) - I||`` for ``Z' = (A_eps - A_0) Z``, ``Z(a) = I`` (both at shift 0)."""
    c, _ = fam.member(eps)
    c0, _ = fam.limit
    R = shin_zettl(c, 0.0).matrix - shin_zettl(c0, 0.0).matrix
    if mesh is None:
        mesh = Mesh.for_generator(R, max_step)
    Z = propagate(R, mesh)
    eye = np.eye(R.dim)
    return float(np.max(np.linalg.norm(Z.samples - eye, 2, axis=(-2, -1))))


@dataclass(frozen=True)
class ReportRow:
    eps: float
    hypotheses: HypothesisDistances
    mm_dev: float
    hs_dist: float
    sup_dist: float
    status: str = "ok"

    def values(self):
        return (self.eps, *self.hypotheses.as_tuple(), self.mm_dev, self.hs_dist, self.sup_dist)


def _vanishing(col, rel=0.5, floor=1e-12):
    col = np.asarray(col, dtype=float)
    if col.size == 0 or np.all(col <= floor):
        return True
    monotone = np.all(np.diff(col) <= 1e-12 * max(1.0, col.max()))
    return bool(monotone and col[-1] <= rel * col[0])


@dataclass(frozen=True)
class ConvergenceReport:
    mu: complex
    rows: list
    grid_n: int
    flags: dict = field(default_factory=dict)

    def column(self, name):
        i = REPORT_COLUMNS.index(name)
        return np.array([r.values()[i] for r in self.rows if r.status == "ok"])

    @property
    def hypotheses_hold(self):
        return self.flags["hypotheses_hold"]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in self.rows:
            writer.writerow([f"{v:.17g}" for v in r.values()] + [r.status])
        return buf.getvalue()


def _member_row(fam, eps, grid, k0, max_step):
    hyp = hypothesis_distances(fam, eps)
    mm = mm_deviation(fam, eps, max_step=max_step)
    c, bc = fam.member(eps)
    try:
        k = resolvent_kernel(shin_zettl(c, fam.mu), bc, grid, max_step)
    except NotInResolventSetError as exc:
        return ReportRow(eps, hyp, mm, float("nan"), float("nan"), f"skipped: mu not in resolvent set (cond {exc.condition_number:.3g})")
    return ReportRow(eps, hyp, mm, hs_distance(k, k0), sup_norm_distance(k, k0))


def resolvent_distances(fam, grid=400, max_step=None, threads=1):
    """Ladder report of hypothesis distances, M-class deviation and kernel distances at ``mu``.

    ``grid`` is either a point count (uniform grid on the interval) or an explicit array.
    Members whose ``D_eps(mu)`` is singular are recorded as skipped.
    """
    a, b = fam.interval
    grid = np.linspace(a, b, int(grid)) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    c0, bc0 = fam.limit
    A0 = shin_zettl(c0, fam.mu)
    ok, cond = in_resolvent_set(A0, bc0, max_step)
    if not ok:
        raise NotInResolventSetError(f"μ={fam.mu} is not in the resolvent set of the limit operator (cond {cond:.3g})", cond)
    k0 = resolvent_kernel(A0, bc0, grid, max_step)

    def work(eps):
        return _member_row(fam, eps, grid, k0, max_step)

    eps_list = fam.epsilons
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(work, eps_list))
    else:
        rows = [work(e) for e in eps_list]

    good = [r for r in rows if r.status == "ok"]
    cols = np.array([r.hypotheses.as_tuple() for r in good]).reshape(-1, 6)
    hs = np.array([r.hs_dist for r in good])
    sup = np.array([r.sup_dist for r in good])
    mm = np.array([r.mm_dev for r in good])
    flags = {
        "hypotheses_hold": all(_vanishing(cols[:, j]) for j in range(6)),
        "failed_conditions": [REPORT_COLUMNS[1 + j] for j in range(6) if not _vanishing(cols[:, j])],
        "hs_strictly_decreasing": bool(hs.size > 1 and np.all(np.diff(hs) < 0)),
        "mm_decreasing": bool(mm.size > 1 and np.all(np.diff(mm) < 0)),
        "hs_le_sup_chain": bool(np.all(hs <= (b - a) * sup * (1 + 1e-12) + 1e-15)),
        "skipped": [r.eps for r in rows if r.status != "ok"],
    }
    return ConvergenceReport(fam.mu, rows, grid.size, flags)


def _ramp_potential(interval, t0, c, eps):
    a, b = interval
    lo, hi = t0 - eps / 2, t0 + eps / 2
    if not a < lo or not hi < b:
        raise ValueError(f"ramp of width {eps} around {t0} leaves the interval {interval}")
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    zero = np.zeros_like(c)
    return PiecewiseMatrixPoly.from_pieces([a, lo, hi, b], [[zero], [zero, c / eps], [c]])


def make_mollified_delta_family(t0, c, widths, bc, mu, interval=(0.0, 1.0)):
    """``q = c delta(t - t0)`` realized by ``Q_0 = c 1(t > t0)`` and linear ramps of width ``eps``.

    ``c`` is a scalar or an s x s matrix; ``p^{-1} = I`` throughout and all members share ``bc``.
    """
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    s = c.shape[0]
    herm = bool(np.allclose(c, c.conj().T))
    p_inv = PiecewiseMatrixPoly.identity(interval, s)
    Q0 = PiecewiseMatrixPoly.step(interval, t0, np.zeros((s, s)), c)
    members = {0.0: (make_coefficients(p_inv, Q0, herm), bc)}
    for eps in widths:
        members[float(eps)] = (make_coefficients(p_inv, _ramp_potential(interval, t0, c, eps), herm), bc)
    return Family(members, mu)


def make_rotated_boundary_family(coeffs, bc, epsilons, angle, mu):
    """Negative control: ``alpha(eps) = alpha(0) R(angle)`` for every ``eps > 0``.

    ``R`` rotates ``(y(a), D^[1] y(a))``, so ``alpha(eps)`` does not tend to ``alpha(0)``.
    """
    bc = as_linear(bc)
    s = bc.dim
    eye = np.eye(s)
    ca, sa = np.cos(angle), np.sin(angle)
    rot = np.block([[ca * eye, -sa * eye], [sa * eye, ca * eye]])
    moved = type(bc)(bc.alpha @ rot, bc.beta)
    members = {0.0: (coeffs, bc)}
    members.update({float(e): (coeffs, moved) for e in epsilons})
    return Family(members, mu)
