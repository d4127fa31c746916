"""Matrix Sturm-Liouville operators with distributional potentials.

Quasi-derivative regularization of ``-(p y')' + Q' y`` on a finite interval:
fundamental matrices, Green kernels, eigenvalues, boundary-condition classification,
and resolvent-convergence experiments for families of coefficients.
"""

__version__ = "0.1.0"

from .boundary import (
    CanonicalBC,
    LinearBC,
    Variant,
    canonical_to_linear,
    classify,
    dirichlet,
    is_separated,
    neumann,
    periodic,
    separated_conditions,
)
from .coeffs import (
    CoefficientSet,
    PiecewiseMatrixPoly,
    ShinZettlMatrix,
    adjoint_coefficients,
    make_coefficients,
    shin_zettl,
)
from .exceptions import ContourError, NotInResolventSetError
from .propagator import (
    FundamentalSolution,
    Mesh,
    Trajectory,
    propagate,
    quasi_derivative,
    solve_inhomogeneous,
    sup_distance,
    transfer_matrix,
)
from .green import green_kernel, green_matrix, hs_distance, hs_norm, resolvent_kernel
from .spectral import char_det, eigenfunction, eigenfunctions, eigenvalues_complex, eigenvalues_real_scan
from .convergence import Family, make_mollified_delta_family, resolvent_distances
