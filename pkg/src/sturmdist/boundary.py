"""Boundary triplet ``(C^{2s}, Gamma_1, Gamma_2)`` and canonical boundary conditions.

Block ordering is fixed throughout: ``w = (y, D^[1] y)`` with ``y`` on top, and a linear
condition reads ``alpha w(a) + beta w(b) = 0``.

The canonical conditions are

    L_K :  (K - I) Gamma_1 y + i (K + I) Gamma_2 y = 0
    L^K :  (K - I) Gamma_1 y - i (K + I) Gamma_2 y = 0

with ``Gamma_1 y = (D^[1] y(a), -D^[1] y(b))`` and ``Gamma_2 y = (y(a), y(b))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearBC",
    "CanonicalBC",
    "Variant",
    "ExtensionKind",
    "ExtensionClass",
    "boundary_maps",
    "boundary_form",
    "triplet_form",
    "canonical_to_linear",
    "classify",
    "is_separated",
    "separated_conditions",
    "dirichlet",
    "neumann",
    "periodic",
]


class Variant(str, enum.Enum):
    LK = "LK"
    LUpperK = "LUpperK"

    @property
    def sign(self):
        return 1j if self is Variant.LK else -1j


class ExtensionKind(str, enum.Enum):
    SelfAdjoint = "SelfAdjoint"
    MaximalDissipative = "MaximalDissipative"
    MaximalAccumulative = "MaximalAccumulative"
    OutsideTheorem = "OutsideTheorem"


@dataclass(frozen=True)
class LinearBC:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=complex)
        beta = np.array(self.beta, dtype=complex)
        n = alpha.shape[0]
        if alpha.shape != (n, n) or beta.shape != (n, n) or n % 2:
            raise ValueError(f"alpha and beta must both be 2s x 2s, got {alpha.shape} and {beta.shape}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def dim(self):
        return self.alpha.shape[0] // 2

    def residual(self, w_a, w_b):
        return np.linalg.norm(self.alpha @ w_a + self.beta @ w_b)


@dataclass(frozen=True)
class CanonicalBC:
    K: np.ndarray
    variant: Variant = Variant.LK

    def __post_init__(self):
        K = np.array(self.K, dtype=complex)
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] % 2:
            raise ValueError(f"K must be 2s x 2s, got shape {K.shape}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def dim(self):
        return self.K.shape[0] // 2

    def to_linear(self):
        return canonical_to_linear(self)


@dataclass(frozen=True)
class ExtensionClass:
    kind: ExtensionKind
    norm_K: float
    unitary_defect: float

    def __str__(self):
        return f"{self.kind.value}, norm_K={self.norm_K:.17g}"


def _split(v):
    v = np.asarray(v)
    s = v.shape[0] // 2
    return v[:s], v[s:]


def boundary_maps(w_a, w_b):
    """``(Gamma_1, Gamma_2)`` from the end values ``w(a)``, ``w(b)``."""
    y_a, d_a = _split(w_a)
    y_b, d_b = _split(w_b)
    return np.concatenate([d_a, -d_b]), np.concatenate([y_a, y_b])


def triplet_form(w_a, w_b, z_a, z_b):
    """``(Gamma_1 w, Gamma_2 z) - (Gamma_2 w, Gamma_1 z)`` in ``C^{2s}``."""
    g1w, g2w = boundary_maps(w_a, w_b)
    g1z, g2z = boundary_maps(z_a, z_b)
    return np.vdot(g2z, g1w) - np.vdot(g1z, g2w)


def boundary_form(w_a, w_b, z_a, z_b):
    """``(y . conj(D^[1] z) - D^[1] y . conj(z)) |_a^b``.

    By Green's formula this is ``(L y, z) - (y, L z)`` for ``L = -D^[2]``.
    """

    def at(w, z):
        y, dy = _split(w)
        v, dv = _split(z)
        return np.vdot(dv, y) - np.vdot(v, dy)

    return at(w_b, z_b) - at(w_a, z_a)


def canonical_to_linear(bc):
    """``(alpha, beta)`` equivalent to ``(K - I) Gamma_1 y +- i (K + I) Gamma_2 y = 0``."""
    s = bc.dim
    eye = np.eye(2 * s)
    M = bc.K - eye
    N = bc.variant.sign * (bc.K + eye)
    alpha = np.block([[N[:s, :s], M[:s, :s]], [N[s:, :s], M[s:, :s]]])
    beta = np.block([[N[:s, s:], -M[:s, s:]], [N[s:, s:], -M[s:, s:]]])
    return LinearBC(alpha, beta)


def classify(bc, tol=1e-10, norm_slack=1e-12):
    """Place ``L_K`` / ``L^K`` in the self-adjoint / dissipative / accumulative classes.

    ``tol`` bounds ``||K^* K - I||`` for the unitary test; ``norm_slack`` is the roundoff
    allowance on ``||K|| <= 1`` for contractions.
    """
    K = bc.K
    norm_K = float(np.linalg.norm(K, 2))
    defect = float(np.linalg.norm(K.conj().T @ K - np.eye(K.shape[0]), 2))
    if defect <= tol:
        kind = ExtensionKind.SelfAdjoint
    elif norm_K <= 1 + norm_slack:
        kind = ExtensionKind.MaximalDissipative if bc.variant is Variant.LK else ExtensionKind.MaximalAccumulative
    else:
        kind = ExtensionKind.OutsideTheorem
    return ExtensionClass(kind, norm_K, defect)


def is_separated(K, tol=1e-12):
    """Block-diagonality test; returns ``(flag, max(||K_12||, ||K_21||))``."""
    K = np.asarray(K)
    s = K.shape[0] // 2
    residual = max(np.linalg.norm(K[:s, s:], 2), np.linalg.norm(K[s:, :s], 2))
    return bool(residual <= tol), float(residual)


def separated_conditions(K_a, K_b, variant=Variant.LK):
    K_a = np.atleast_2d(np.asarray(K_a, dtype=complex))
    K_b = np.atleast_2d(np.asarray(K_b, dtype=complex))
    sign = Variant(variant).sign
    s = K_a.shape[0]
    eye, zero = np.eye(s), np.zeros((s, s))
    alpha = np.block([[sign * (K_a + eye), K_a - eye], [zero, zero]])
    beta = np.block([[zero, zero], [sign * (K_b + eye), -(K_b - eye)]])
    return LinearBC(alpha, beta)


def dirichlet(s=1):
    return CanonicalBC(np.eye(2 * s), Variant.LK)


def neumann(s=1):
    return CanonicalBC(-np.eye(2 * s), Variant.LK)


def periodic(s=1):
    """``w(a) = w(b)``, given directly in linear form."""
    return LinearBC(np.eye(2 * s), -np.eye(2 * s))


def as_linear(bc):
    """Accept either a ``LinearBC`` or a ``CanonicalBC``."""
    if isinstance(bc, CanonicalBC):
        return canonical_to_linear(bc)
    return bc
