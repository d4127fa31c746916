"""Resolvent convergence of mollified point interactions.

A linear ramp of width eps replaces the jump of Q; as eps shrinks every hypothesis
distance goes to zero and so do the kernel distances. The second family rotates the
boundary matrix by a fixed angle, so one hypothesis never vanishes and the kernels stay
apart: a negative control.
"""

import numpy as np

from sturmdist import PiecewiseMatrixPoly, dirichlet, make_coefficients, make_mollified_delta_family, resolvent_distances
from sturmdist.convergence import make_rotated_boundary_family

widths = [0.2, 0.1, 0.05, 0.025, 0.0125]
fam = make_mollified_delta_family(0.5, 1.0, widths, dirichlet(), mu=-1.0)
report = resolvent_distances(fam, grid=200)
print(report.to_csv())
print({k: v for k, v in report.flags.items() if k != "skipped"})

interval = (0.0, 1.0)
free = make_coefficients(
    PiecewiseMatrixPoly.identity(interval, 1), PiecewiseMatrixPoly.zeros(interval, 1), hermitian=True
)
control = make_rotated_boundary_family(free, dirichlet(), widths, np.pi / 4, mu=-1.0)
report = resolvent_distances(control, grid=200)
print("rotated boundary: hs_dist =", np.round(report.column("hs_dist"), 4))
print("hypotheses hold:", report.hypotheses_hold, report.flags["failed_conditions"])
