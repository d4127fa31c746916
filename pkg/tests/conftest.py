import numpy as np
import pytest
from hypothesis import settings
from scipy.stats import unitary_group

from sturmdist.coeffs import PiecewiseMatrixPoly, make_coefficients

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_hermitian(rng, s, scale=1.0):
    X = rng.standard_normal((s, s)) + 1j * rng.standard_normal((s, s))
    return scale * (X + X.conj().T) / 2


def random_matrix(rng, s, scale=1.0):
    return scale * (rng.standard_normal((s, s)) + 1j * rng.standard_normal((s, s)))


def random_piecewise(rng, interval, s, n_pieces=3, degree=2, hermitian=False, shift=0.0):
    a, b = interval
    inner = np.sort(rng.uniform(a, b, n_pieces - 1))
    bp = np.concatenate([[a], inner, [b]])
    make = random_hermitian if hermitian else random_matrix
    pieces = []
    for _ in range(n_pieces):
        d = int(rng.integers(0, degree + 1))
        pieces.append([make(rng, s, 0.7) for _ in range(d + 1)])
    f = PiecewiseMatrixPoly.from_pieces(bp, pieces)
    if shift:
        f = f + PiecewiseMatrixPoly.constant(interval, shift * np.eye(s))
    return f


def random_coefficients(rng, s, interval=(0.0, 1.0), hermitian=False):
    """p^{-1} kept near the identity so that p stays invertible; Q arbitrary."""
    p_inv = random_piecewise(rng, interval, s, hermitian=hermitian) * 0.3 + PiecewiseMatrixPoly.identity(interval, s)
    Q = random_piecewise(rng, interval, s, hermitian=hermitian)
    return make_coefficients(p_inv, Q, hermitian)


def random_unitary(rng, n):
    return unitary_group.rvs(n, random_state=rng)


def random_contraction(rng, n, top=0.95):
    U, V = random_unitary(rng, n), random_unitary(rng, n)
    return U @ np.diag(rng.uniform(0.0, top, n)) @ V


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
