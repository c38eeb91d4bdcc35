import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkzlab.representation import CHEVALLEY, coproduct_matrix, permutation_matrix
from qkzlab.rmatrix import ResonantPoint, closed_form_R, r_hat, solve_R, weights, ybe_residual

from conftest import rand_c

PAIRS = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1)]


@pytest.mark.parametrize("l1,l2", PAIRS)
def test_solve_matches_closed_form(l1, l2, rng):
    for _ in range(5):
        z = rand_c(rng)
        err = np.abs(solve_R(l1, l2, z, 0.6).matrix - closed_form_R(l1, l2, z, 0.6).matrix).max()
        assert err < 1e-11


@pytest.mark.parametrize("l1,l2", [(0, 0), (0, 2), (1, 1), (2, 2), (2, 3)])
def test_intertwining_and_normalisation(l1, l2):
    q, z = 0.6, 1.1 - 0.4j
    R = solve_R(l1, l2, z, q).matrix
    PR = permutation_matrix(l1, l2) @ R
    for g in CHEVALLEY:
        A = coproduct_matrix(g, l1, l2, z, 1.0, q)
        B = coproduct_matrix(g, l2, l1, 1.0, z, q)
        assert np.abs(PR @ A - B @ PR).max() < 1e-12
    e0 = np.zeros(len(R))
    e0[0] = 1
    assert np.abs(PR @ e0 - e0).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(1, 1), (1, 2), (2, 3)]), st.floats(0.3, 3.0), st.floats(-np.pi, np.pi))
def test_unitarity(spins, r, phi):
    l1, l2 = spins
    z, q = complex(r * np.exp(1j * phi)), 0.6
    P = permutation_matrix(l1, l2)
    R12 = solve_R(l1, l2, z, q).matrix
    R21 = solve_R(l2, l1, 1 / z, q).matrix
    assert np.abs(P.T @ R21 @ P @ R12 - np.eye(len(R12))).max() < 1e-11


def test_weight_conservation():
    R = solve_R(2, 2, 0.9, 0.6).matrix
    w = weights(2, 2)
    assert np.all(R[w[:, None] != w[None, :]] == 0)


@pytest.mark.parametrize("spins", list(itertools.product((0, 1, 2), repeat=3))[::4])
def test_yang_baxter(spins, rng):
    assert ybe_residual(*spins, rand_c(rng), rand_c(rng), 0.6) < 1e-10


def test_resonant_point_raises():
    q = 0.6
    with pytest.raises(ResonantPoint):
        solve_R(1, 1, q**-2, q)


def test_closed_form_needs_spin_one():
    with pytest.raises(ValueError):
        closed_form_R(2, 2, 0.5, 0.6)


def test_r_hat_is_scaled_flip_conjugate():
    q, z = 0.6, 0.7
    Rh = r_hat(1, 2, z, q)
    assert Rh.matrix.shape == (6, 6)
    assert np.isfinite(Rh.matrix).all()
