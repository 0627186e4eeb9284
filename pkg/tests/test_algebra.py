import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ptframe.algebra import (SpaceLayout, Subsystem, annihilation, commutator, creation,
                             eig, embed, expm, identity, number, qubit_op)
from ptframe.errors import DimensionError, LayoutError


def test_single_mode_ladder():
    L = SpaceLayout.bosons(1, 2)
    expected = np.array([[0, 1, 0], [0, 0, np.sqrt(2)], [0, 0, 0]])
    np.testing.assert_array_equal(annihilation(L, 0), expected)


def test_number_operator_diagonal():
    L = SpaceLayout.bosons(1, 3)
    a = annihilation(L, 0)
    np.testing.assert_allclose(creation(L, 0) @ a, np.diag([0, 1, 2, 3]), atol=1e-15)
    np.testing.assert_array_equal(number(L, 0), np.diag([0, 1, 2, 3]))


def test_hopping_maps_b_to_a():
    L = SpaceLayout.bosons(2, 1)
    hop = creation(L, 0) @ annihilation(L, 1)
    expected = np.zeros((4, 4))
    expected[L.index((1, 0)), L.index((0, 1))] = 1.0
    np.testing.assert_array_equal(hop, expected)


def test_basis_ordering_last_fastest():
    L = SpaceLayout.bosons(2, 3)
    assert L.index((1, 2)) == 6
    assert tuple(L.occupations()[6]) == (1, 2)
    assert L.total_occupation()[6] == 3


@pytest.mark.parametrize("n_max", [1, 2, 5])
def test_truncated_canonical_commutator(n_max):
    L = SpaceLayout.bosons(1, n_max)
    a = annihilation(L, 0)
    expected = np.eye(n_max + 1)
    expected[n_max, n_max] -= n_max + 1
    np.testing.assert_allclose(commutator(a, a.T), expected, atol=1e-14)


def test_qubit_operators():
    L = SpaceLayout.qubit()
    np.testing.assert_array_equal(qubit_op(L, 0, "e", "e"), [[1, 0], [0, 0]])
    np.testing.assert_array_equal(qubit_op(L, 0, "e", "g") + qubit_op(L, 0, "g", "e"),
                                  [[0, 1], [1, 0]])
    np.testing.assert_array_equal(qubit_op(L, 0, "g", "g") + qubit_op(L, 0, "e", "e"),
                                  np.eye(2))


def test_layout_errors():
    with pytest.raises(LayoutError):
        annihilation(SpaceLayout.qubit(), 0)
    with pytest.raises(LayoutError):
        qubit_op(SpaceLayout.bosons(1, 2), 0, "e", "g")
    with pytest.raises(LayoutError):
        qubit_op(SpaceLayout.qubit(), 0, "e", "x")
    with pytest.raises(LayoutError):
        Subsystem("boson", 0)
    with pytest.raises(LayoutError):
        annihilation(SpaceLayout.bosons(2, 2), 2)


def test_embed_mixed_layout():
    L = SpaceLayout((Subsystem("qubit"), Subsystem("boson", 2)))
    assert L.dim == 6
    a = annihilation(L, 1)
    np.testing.assert_array_equal(a, np.kron(np.eye(2), np.diag([1, np.sqrt(2)], 1)))
    with pytest.raises(DimensionError):
        embed(L, 0, np.eye(3))


def test_commutator_identity_and_shapes(rng):
    M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    np.testing.assert_array_equal(commutator(np.eye(4), M), np.zeros((4, 4)))
    with pytest.raises(DimensionError):
        commutator(np.eye(3), np.eye(4))


def test_expm_simple_cases():
    np.testing.assert_array_equal(expm(np.zeros((3, 3))), np.eye(3))
    d = np.array([0.3, -1.0 + 2j, 2.5j])
    np.testing.assert_allclose(expm(np.diag(d)), np.diag(np.exp(d)), rtol=1e-14)
    np.testing.assert_allclose(expm(1j * np.pi * np.diag([0, 1, 2])), np.diag([1, -1, 1]),
                               atol=1e-14)


def test_expm_against_high_precision(rng):
    M = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    mpmath.mp.dps = 40
    ref = mpmath.expm(mpmath.matrix(M.tolist()))
    ref = np.array([[complex(ref[i, j]) for j in range(5)] for i in range(5)])
    got = expm(M)
    assert np.linalg.norm(got - ref) <= 1e-12 * np.linalg.norm(ref)


def test_expm_rejects_bad_input():
    with pytest.raises(DimensionError):
        expm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        expm(np.array([[np.nan, 0], [0, 0]]))


def test_eig_diagonal():
    res = eig(np.diag([1, 2 + 3j]))
    order = np.argsort(res.eigenvalues.real)
    np.testing.assert_allclose(res.eigenvalues[order], [1, 2 + 3j])
    np.testing.assert_allclose(np.abs(res.right_vectors[:, order]), np.eye(2))


def test_eig_defective_condition_large():
    H = np.array([[-2j, 1], [1, 0]])  # omega=1, gamma_e=2
    res = eig(H)
    np.testing.assert_allclose(res.eigenvalues, [-1j, -1j], atol=1e-7)
    assert res.condition_estimate > 1e6


def test_eig_take():
    res = eig(np.diag([3.0, 1.0, 2.0]))
    sub = res.take([2, 0])
    assert len(sub) == 2
    np.testing.assert_array_equal(sub.eigenvalues, res.eigenvalues[[2, 0]])


complex_mats = st.integers(2, 7).flatmap(
    lambda n: arrays(np.complex128, (n, n),
                     elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                 allow_infinity=False)))


@settings(max_examples=60, deadline=None)
@given(complex_mats)
def test_eig_residual_invariant(M):
    res = eig(M)
    scale = max(np.linalg.norm(M, 2), 1e-300)
    assert np.all(res.residual_norms <= 1e-10 * scale + 1e-300)
    np.testing.assert_allclose(np.linalg.norm(res.right_vectors, axis=0), 1.0, rtol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(res.left_vectors, axis=0), 1.0, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(complex_mats)
def test_expm_inverse_pair(M):
    M = M / max(1.0, np.linalg.norm(M))
    np.testing.assert_allclose(expm(M) @ expm(-M), np.eye(len(M)), atol=1e-12)
