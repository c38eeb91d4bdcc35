import numpy as np
import pytest

from qkzlab.representation import (CHEVALLEY, ShapeError, TensorVector, TwoSiteOperator, act_generator,
                                   apply_one_site, apply_two_site, coproduct_matrix, flip_all,
                                   generator_matrix, permutation_matrix)


def comm(a, b):
    return a @ b - b @ a


@pytest.mark.parametrize("l", [0, 1, 2, 3])
def test_quantum_group_relations(l):
    q, z = 0.6, 0.8 + 0.3j
    e1, f1, k1 = (generator_matrix(g, l, z, q) for g in ("e1", "f1", "qh1"))
    e0, f0, k0 = (generator_matrix(g, l, z, q) for g in ("e0", "f0", "qh0"))
    kinv = np.linalg.inv(k1)
    assert np.allclose(comm(e1, f1), (k1 - kinv) / (q - 1 / q))
    assert np.allclose(k1 @ e1 @ kinv, q**2 * e1)
    assert np.allclose(k1 @ f1 @ kinv, q**-2 * f1)
    assert np.allclose(comm(e0, f0), (k0 - np.linalg.inv(k0)) / (q - 1 / q))
    assert np.allclose(k0 @ k1, np.eye(l + 1))


@pytest.mark.parametrize("l1,l2", [(1, 1), (1, 2), (2, 1)])
def test_coproduct_is_homomorphism(l1, l2):
    q = 0.55
    E, F, K = (coproduct_matrix(g, l1, l2, 0.7, 1.3, q) for g in ("e1", "f1", "qh1"))
    Kinv = np.linalg.inv(K)
    assert np.allclose(comm(E, F), (K - Kinv) / (q - 1 / q))
    assert np.allclose(K @ E @ Kinv, q**2 * E)


def test_act_generator_drops_out_of_range_and_rejects_unknown():
    assert act_generator("e1", 2, 0, 0, 0.5) == []
    assert act_generator("f1", 2, 2, 0, 0.5) == []
    with pytest.raises(ValueError):
        act_generator("x", 1, 0, 0, 0.5)
    with pytest.raises(IndexError):
        act_generator("e1", 1, 2, 0, 0.5)
    with pytest.raises(ValueError):
        generator_matrix("qd", 1, 1.0, 0.5)
    assert set(CHEVALLEY) < {"e0", "e1", "f0", "f1", "qh0", "qh1", "qd"}


def test_permutation_swaps_factors():
    a, b = np.array([1.0, 2.0]), np.array([3.0, 5.0, 7.0])
    assert np.allclose(permutation_matrix(1, 2) @ np.kron(a, b), np.kron(b, a))


def test_apply_two_site_matches_kron(rng):
    spins = (1, 2, 1)
    v = TensorVector(spins, rng.normal(size=12) + 1j * rng.normal(size=12))
    M = rng.normal(size=(6, 6))
    out = apply_two_site(TwoSiteOperator((2, 3), M), v)
    full = np.kron(np.eye(2), M)
    assert np.allclose(out.coeffs.ravel(), full @ v.coeffs.ravel())
    # non-adjacent legs in reversed order equal conjugation by the swap
    M13 = rng.normal(size=(4, 4))
    got = apply_two_site(TwoSiteOperator((3, 1), M13), v)
    ref = np.einsum("CAca,abc->AbC", M13.reshape(2, 2, 2, 2), v.coeffs)
    assert np.allclose(got.coeffs, ref)


def test_apply_one_site_and_flip():
    v = TensorVector.basis((1, 2), (0, 1))
    w = apply_one_site(np.array([[0, 1], [1, 0]]), 1, v)
    assert w[(1, 1)] == 1 and w[(0, 1)] == 0
    assert flip_all(v)[(1, 1)] == 1
    assert v.weight((0, 1)) == 1


def test_tensor_vector_errors():
    v = TensorVector((1, 1))
    with pytest.raises(IndexError):
        v[(2, 0)] = 1
    with pytest.raises(ShapeError):
        TensorVector((1,), np.zeros(3))
    with pytest.raises(ShapeError):
        v + TensorVector((1, 2))
    with pytest.raises(ShapeError):
        apply_two_site(TwoSiteOperator((1, 3), np.eye(4)), v)
    with pytest.raises(ShapeError):
        TwoSiteOperator((1, 1), np.eye(4))
    with pytest.raises(ShapeError):
        apply_one_site(np.eye(3), 1, v)
    assert (2 * v - v).dim == 4
