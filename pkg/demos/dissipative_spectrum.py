"""Where the spectrum moves when the boundary stops being self-adjoint.

K = 0 gives the maximal dissipative condition D1y(a) = i y(a), D1y(b) = -i y(b) under
L_K and the conjugate one under L^K. The two spectra are mirror images across the real
axis, one in the upper half plane and one in the lower.
"""

import numpy as np

from sturmdist import CanonicalBC, PiecewiseMatrixPoly, classify, eigenvalues_complex, make_coefficients

interval = (0.0, 1.0)
coeffs = make_coefficients(
    PiecewiseMatrixPoly.identity(interval, 1), PiecewiseMatrixPoly.zeros(interval, 1), hermitian=True
)
rect = (-5.0, 250.0, -15.0, 15.0)

for variant in ("LK", "LUpperK"):
    bc = CanonicalBC(np.zeros((2, 2)), variant)
    evs = eigenvalues_complex(coeffs, bc, rect, max_step=0.01)
    print(variant, classify(bc))
    for ev in evs:
        print(f"   {ev.lam.real:12.6f} {ev.lam.imag:+12.6f}i")
