"""Independent reference computations (closed forms, transcendental roots, finite differences)."""

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq


def delta_symmetric_k(c, k_max):
    """Roots k > 0 of c sin(k/2) + 2k cos(k/2), i.e. tan(k/2) = -2k/c."""
    g = lambda k: c * np.sin(k / 2) + 2 * k * np.cos(k / 2)
    ks = np.linspace(1e-9, k_max, 20000)
    v = g(ks)
    return [brentq(g, ks[i], ks[i + 1], xtol=1e-15, rtol=1e-15) for i in np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:]))]


def delta_eigenvalues(c, lam_max):
    """Dirichlet spectrum of -y'' + c delta(t - 1/2) y on (0, 1) below ``lam_max``."""
    k_max = np.sqrt(lam_max)
    sym = [k * k for k in delta_symmetric_k(c, k_max)]
    anti = [(2 * n * np.pi) ** 2 for n in range(1, int(k_max / (2 * np.pi)) + 1)]
    return np.sort(np.array(sym + anti))


def delta_fd_eigenvalues(c, n_intervals=10_000, count=3):
    """Three-point finite differences; the jump y'(+) - y'(-) = c y(1/2) enters as c/h at the middle node."""
    h = 1.0 / n_intervals
    n = n_intervals - 1
    d = np.full(n, 2.0 / h**2)
    d[n // 2] += c / h
    e = np.full(n - 1, -1.0 / h**2)
    return eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1), eigvals_only=True)


def dirichlet_kernel(t, tau):
    return np.minimum(t, tau) * (1 - np.maximum(t, tau))


def ramp_distances(c, eps):
    """Closed-form L1 distances for the linear ramp of width eps against the unit step times c.

    int |Q_eps - Q_0| is two triangles of area c eps / 8; int |Q_eps^2 - Q_0^2| splits into
    c^2 eps / 24 on the rising half and 5 c^2 eps / 24 on the upper half.
    """
    c = abs(c)
    return 0.0, c * eps / 4, c * eps / 4, c * c * eps / 4
