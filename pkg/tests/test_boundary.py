import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_contraction, random_unitary
from sturmdist.boundary import (
    CanonicalBC,
    ExtensionKind,
    LinearBC,
    Variant,
    boundary_form,
    boundary_maps,
    canonical_to_linear,
    classify,
    dirichlet,
    is_separated,
    neumann,
    separated_conditions,
    triplet_form,
)


def cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def same_conditions(bc1, bc2):
    """Row spaces of [alpha beta] coincide."""
    M1 = np.hstack([bc1.alpha, bc1.beta])
    M2 = np.hstack([bc2.alpha, bc2.beta])
    r = np.linalg.matrix_rank
    return r(M1) == r(M2) == r(np.vstack([M1, M2]))


def test_boundary_maps_scalar_example():
    g1, g2 = boundary_maps(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    assert g1.tolist() == [2, -4] and g2.tolist() == [1, 3]


def test_canonical_examples():
    lin = canonical_to_linear(CanonicalBC(np.eye(2)))
    assert np.array_equal(lin.alpha, [[2j, 0], [0, 0]]) and np.array_equal(lin.beta, [[0, 0], [2j, 0]])
    lin = canonical_to_linear(CanonicalBC(-np.eye(2)))
    assert np.array_equal(lin.alpha, [[0, -2], [0, 0]]) and np.array_equal(lin.beta, [[0, 0], [0, 2]])


def test_boundary_maps_blocks():
    w_a = np.array([1, 2, 3, 4.0])
    w_b = np.array([5, 6, 7, 8.0])
    g1, g2 = boundary_maps(w_a, w_b)
    assert g1.tolist() == [3, 4, -7, -8]
    assert g2.tolist() == [1, 2, 5, 6]


def test_boundary_maps_are_onto(rng):
    s = 2
    cols = []
    for k in range(4 * s):
        e = np.zeros(4 * s)
        e[k] = 1
        cols.append(np.concatenate(boundary_maps(e[: 2 * s], e[2 * s :])))
    assert np.linalg.matrix_rank(np.array(cols)) == 4 * s


@given(st.integers(0, 2**32 - 1), st.sampled_from(["LK", "LUpperK"]), st.integers(1, 3))
def test_linear_form_matches_canonical(seed, variant, s):
    rng = np.random.default_rng(seed)
    K = rng.standard_normal((2 * s, 2 * s)) + 1j * rng.standard_normal((2 * s, 2 * s))
    bc = CanonicalBC(K, variant)
    lin = canonical_to_linear(bc)
    w_a, w_b = cvec(rng, 2 * s), cvec(rng, 2 * s)
    g1, g2 = boundary_maps(w_a, w_b)
    sign = 1j if variant == "LK" else -1j
    canonical = (K - np.eye(2 * s)) @ g1 + sign * (K + np.eye(2 * s)) @ g2
    assert np.allclose(lin.alpha @ w_a + lin.beta @ w_b, canonical, atol=1e-12)


def test_k_zero_conditions():
    # K = 0 under L_K: -Gamma_1 + i Gamma_2 = 0, so D1y(a) = i y(a) and D1y(b) = -i y(b)
    lin = canonical_to_linear(CanonicalBC(np.zeros((2, 2)), Variant.LK))
    y_a, y_b = 0.7 - 0.2j, 1.3 + 0.5j
    w_a = np.array([y_a, 1j * y_a])
    w_b = np.array([y_b, -1j * y_b])
    assert lin.residual(w_a, w_b) < 1e-15
    assert lin.residual(w_a, np.array([y_b, 1j * y_b])) > 1


def test_presets():
    lin = canonical_to_linear(dirichlet())
    # only y(a) and y(b) are constrained
    assert lin.residual(np.array([0, 5.0]), np.array([0, -3.0])) == 0
    lin = canonical_to_linear(neumann())
    assert lin.residual(np.array([2.0, 0]), np.array([-1.0, 0])) == 0


def test_classify_examples():
    assert classify(CanonicalBC(np.eye(2))).kind is ExtensionKind.SelfAdjoint
    c = classify(CanonicalBC(np.zeros((2, 2)), Variant.LK))
    assert c.kind is ExtensionKind.MaximalDissipative and str(c) == "MaximalDissipative, norm_K=0"
    assert classify(CanonicalBC(np.zeros((2, 2)), Variant.LUpperK)).kind is ExtensionKind.MaximalAccumulative
    assert classify(CanonicalBC(2 * np.eye(2))).kind is ExtensionKind.OutsideTheorem


def test_classify_random(rng):
    for _ in range(10):
        assert classify(CanonicalBC(random_unitary(rng, 4))).kind is ExtensionKind.SelfAdjoint
        K = random_contraction(rng, 4, 0.9)
        assert classify(CanonicalBC(K, "LK")).kind is ExtensionKind.MaximalDissipative
        assert classify(CanonicalBC(K, "LUpperK")).kind is ExtensionKind.MaximalAccumulative


def test_is_separated():
    K = np.diag([0.5, 1j, -1, 0.2])
    flag, res = is_separated(K)
    assert flag and res == 0
    K[0, 3] = 1e-3
    flag, res = is_separated(K)
    assert not flag and res == pytest.approx(1e-3)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["LK", "LUpperK"]), st.integers(1, 3))
def test_separated_conditions_match_block_canonical(seed, variant, s):
    rng = np.random.default_rng(seed)
    K_a = rng.standard_normal((s, s)) + 1j * rng.standard_normal((s, s))
    K_b = rng.standard_normal((s, s)) + 1j * rng.standard_normal((s, s))
    K = np.block([[K_a, np.zeros((s, s))], [np.zeros((s, s)), K_b]])
    sep = separated_conditions(K_a, K_b, variant)
    can = canonical_to_linear(CanonicalBC(K, variant))
    assert np.array_equal(sep.alpha, can.alpha) and np.array_equal(sep.beta, can.beta)


def test_mixed_dirichlet_neumann():
    lin = separated_conditions([[1.0]], [[-1.0]])
    # y(a) = 0 and D1y(b) = 0; D1y(a) and y(b) are free
    assert lin.residual(np.array([0, 3.0]), np.array([-2.0, 0])) == 0
    assert lin.residual(np.array([1.0, 0]), np.array([0, 0])) > 0
    assert lin.residual(np.array([0, 0]), np.array([0, 1.0])) > 0


def test_same_conditions_helper():
    lin = canonical_to_linear(dirichlet())
    assert same_conditions(lin, LinearBC(2 * lin.alpha, 2 * lin.beta))
    assert not same_conditions(lin, canonical_to_linear(neumann()))


def test_unitary_from_qr_is_self_adjoint(rng):
    for _ in range(100):
        n = 2 * int(rng.integers(1, 4))
        q, r = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        assert classify(CanonicalBC(q)).kind is ExtensionKind.SelfAdjoint


def test_is_separated_ignores_diagonal_blocks(rng):
    K = np.zeros((4, 4), dtype=complex)
    K[:2, 2:] = random_contraction(rng, 2)
    base = is_separated(K)
    for _ in range(5):
        K[:2, :2] = rng.standard_normal((2, 2))
        K[2:, 2:] = rng.standard_normal((2, 2))
        assert is_separated(K) == base
    assert is_separated(np.block([[np.eye(2), np.eye(2)], [np.zeros((2, 2)), np.eye(2)]])) == (False, 1.0)


def test_separated_conditions_decouple():
    lin = separated_conditions(np.array([[0.3]]), np.array([[-0.5]]))
    assert np.all(lin.beta[0] == 0) and np.all(lin.alpha[1] == 0)


def test_bad_shapes():
    with pytest.raises(ValueError):
        CanonicalBC(np.eye(3))
    with pytest.raises(ValueError):
        LinearBC(np.eye(2), np.eye(4))


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_triplet_identity(seed, s):
    rng = np.random.default_rng(seed)
    w_a, w_b, z_a, z_b = (cvec(rng, 2 * s) for _ in range(4))
    lhs = triplet_form(w_a, w_b, z_a, z_b)
    assert abs(lhs - boundary_form(w_a, w_b, z_a, z_b)) <= 1e-12 * max(1.0, abs(lhs))


def test_dissipativity_of_boundary_form(rng):
    # for data obeying L_K with a contraction K: Im (Gamma_1 y, Gamma_2 y) >= 0
    for _ in range(20):
        K = random_contraction(rng, 2)
        lin = canonical_to_linear(CanonicalBC(K, "LK"))
        M = np.hstack([lin.alpha, lin.beta])
        _, sv, vh = np.linalg.svd(M)
        null = vh[np.sum(sv > 1e-12) :].conj().T
        w = null @ cvec(rng, null.shape[1])
        g1, g2 = boundary_maps(w[:2], w[2:])
        assert np.vdot(g2, g1).imag >= -1e-12
