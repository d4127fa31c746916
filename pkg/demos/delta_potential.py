"""Dirichlet spectrum of -y'' + c delta(t - 1/2) y on (0, 1).

The point interaction is carried by Q, a step of height c at t = 1/2. The
quasi-derivative D1y = y' - Q y stays continuous, so y' jumps by c y(1/2) while the
first-order system keeps bounded coefficients. Even eigenfunctions feel the delta; odd ones vanish at
the midpoint and keep their free values (2 n pi)^2.
"""

import numpy as np
from scipy.optimize import brentq

from sturmdist import PiecewiseMatrixPoly, dirichlet, eigenfunction, eigenvalues_real_scan, make_coefficients

c = 10.0
interval = (0.0, 1.0)
coeffs = make_coefficients(
    PiecewiseMatrixPoly.identity(interval, 1),
    PiecewiseMatrixPoly.step(interval, 0.5, [[0.0]], [[c]]),
    hermitian=True,
)

evs = eigenvalues_real_scan(coeffs, dirichlet(), (1.0, 200.0), max_step=0.01)

# even modes solve c sin(k/2) + 2 k cos(k/2) = 0
f = lambda k: c * np.sin(k / 2) + 2 * k * np.cos(k / 2)
even = [brentq(f, (2 * n - 1) * np.pi + 1e-9, (2 * n + 1) * np.pi - 1e-9) ** 2 for n in (1, 2)]
odd = [(2 * np.pi) ** 2, (4 * np.pi) ** 2]
exact = np.sort(even + odd)

print(f"{'computed':>20} {'exact':>20} {'rel err':>10}")
for ev, ref in zip(evs, exact):
    print(f"{ev.lam.real:20.12f} {ref:20.12f} {abs(ev.lam.real - ref) / ref:10.2e}")

# the first eigenfunction is even and has its kink at the midpoint
ef = eigenfunction(coeffs, dirichlet(), evs[0], max_step=0.01)
i = np.searchsorted(ef.nodes, 0.5)
print("y(1/2) =", abs(ef.y[i, 0]).round(6))
