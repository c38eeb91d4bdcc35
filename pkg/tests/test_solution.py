import numpy as np
import pytest

from qkzlab.contour import QuadratureGrid
from qkzlab.params import derive
from qkzlab.solution import (QKZ_CONVENTIONS, build_W, component_indices, declared_ratios, psi, qkz_check,
                             qkz_residual, shifted)

FLAG = derive(0.6, 1, 0.3, (1, 1), 1)
Z = (1.0, 0.7)


@pytest.mark.parametrize("spins,N", [((1, 1), 1), ((1, 2), 2), ((2, 1, 1), 3)])
@pytest.mark.parametrize("branch", [0, 1])
def test_shift_ratios(spins, N, branch):
    prm = derive(0.6, 1.5, 0.3, spins, N)
    W = build_W(prm, branch=branch)
    t = 0.3 * np.exp(1j * np.arange(1, N + 1))
    z = [0.8 + 0.1 * j for j in range(len(spins))]
    for a in range(1, N + 1):
        assert W.measured_t_ratio(a, t, z) == pytest.approx(W.t_ratios[a - 1], rel=1e-10)
    for j in range(1, len(spins) + 1):
        assert W.measured_z_ratio(j, t, z) == pytest.approx(W.z_ratios[j - 1], rel=1e-10)
    assert (W.t_ratios, W.z_ratios) == declared_ratios(prm)


def test_w_linear_structure():
    W0, W1 = build_W(FLAG), build_W(FLAG, branch=1)
    t, z = [0.3 + 0.1j], [1.0, 0.7]
    assert (W0 + W1.scaled(2))(t, z) == pytest.approx(W0(t, z) + 2 * W1(t, z))
    other = build_W(derive(0.6, 1, 0.5, (1, 1), 1))
    with pytest.raises(ValueError):
        W0 + other


def test_component_indices():
    assert list(component_indices((1, 1), 1)) == [(0, 1), (1, 0)]
    assert list(component_indices((2, 1), 0)) == [(2, 1)]
    assert len(list(component_indices((2, 2), 2))) == 3


@pytest.mark.parametrize("j", [1, 2])
def test_flagship_residual(j):
    rep = qkz_check(j, FLAG, Z, build_W(FLAG), QuadratureGrid(512))
    assert rep.residual < 1e-6
    assert rep.lhs.spins == (1, 1)


def test_printed_convention_differs():
    # the displayed operator is kept for comparison; it does not annihilate the residual
    assert "printed" in QKZ_CONVENTIONS
    assert qkz_residual(1, FLAG, Z, build_W(FLAG), convention="printed") > 1e-2


@pytest.mark.parametrize("spins,N,z", [((1, 2), 1, (1.0, 0.7)), ((2, 1, 1), 1, (1.0, 0.7, 0.45)),
                                       ((2,), 2, (1.0,))])
def test_residual_other_cases(spins, N, z):
    prm = derive(0.6, 1.5, 0.3, spins, N)
    W = build_W(prm)
    for j in range(1, len(spins) + 1):
        assert qkz_residual(j, prm, z, W, QuadratureGrid(256)) < 1e-10


@pytest.mark.parametrize("l", [1, 2, 3])
def test_no_integration_case_is_exact(l):
    prm = derive(0.6, 1, 0.3, (l,), 0)
    assert qkz_residual(1, prm, (0.9,), build_W(prm)) < 1e-12


def test_psi_and_shift_helpers():
    assert shifted((1.0, 0.7), 2, 0.5) == (1.0, 0.35)
    v = psi(FLAG, Z, build_W(FLAG), QuadratureGrid(128))
    assert v[(1, 1)] == 0 and v[(0, 0)] == 0
    assert abs(v[(0, 1)]) > 0 and abs(v[(1, 0)]) > 0
