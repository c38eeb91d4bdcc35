import numpy as np
import pytest

from qkzlab.contour import (ContourSpec, Infeasible, NonSimplePole, QuadratureDivergence, QuadratureGrid,
                            SimpleIntegrand, convergence_report, integrate, plan_contour)
from qkzlab.params import derive
from qkzlab.solution import TVIntegrand, build_W
from qkzlab.weight import WeightIndex


def simple(c, side):
    # t / (t - c): residue of f(t)/t at c is 1
    return SimpleIntegrand(lambda t: t / (t - c), [(c, side, 1.0)])


@pytest.mark.parametrize("r", [0.2, 0.5, 2.0])
def test_inside_pole_is_always_enclosed(r):
    assert integrate(simple(0.8 + 0.3j, +1), ContourSpec((r,)), QuadratureGrid(256)) == pytest.approx(1)


@pytest.mark.parametrize("r", [0.2, 0.5, 2.0])
def test_outside_pole_is_always_excluded(r):
    assert abs(integrate(simple(0.8 + 0.3j, -1), ContourSpec((r,)), QuadratureGrid(256))) < 1e-13


def test_trapezoid_is_spectral():
    # a pole at modulus 0.5 against r = 1: error ~ 0.5^Q
    f = SimpleIntegrand(lambda t: t / (t - 0.5) + np.exp(t))
    rows = convergence_report(f, ContourSpec((1.0,)), (64, 128))
    assert rows[0]["abs_diff"] is None
    assert rows[-1]["value"] == pytest.approx(2.0, abs=1e-14)
    assert rows[-1]["rel_diff"] < 1e-14


def test_quadrature_divergence_detected():
    f = SimpleIntegrand(lambda t: t / (t - 0.99))
    with pytest.raises(QuadratureDivergence):
        integrate(f, ContourSpec((1.0,)), QuadratureGrid(64), verify=True)


def test_colliding_poles_raise():
    f = SimpleIntegrand(lambda t: t / (t - 0.5) ** 2, [(0.5, -1, 1.0), (0.5, -1, 1.0)])
    with pytest.raises(NonSimplePole):
        integrate(f, ContourSpec((1.0,)), QuadratureGrid(64))


def test_grid_validation():
    for bad in (32, 100):
        with pytest.raises(ValueError):
            QuadratureGrid(bad)
    assert QuadratureGrid(64).doubled().Q == 128


def test_plan_window_and_errors():
    prm = derive(0.6, 1, 0.3, (1, 1), 1)
    spec = plan_contour(prm, (1.0, 0.7))
    lo, hi = spec.window
    assert lo < spec.radii[0] < hi
    # only the linear denominators of w fall outside the window
    assert all(c.factor[0] == "zlin" for c in spec.corrections)
    assert spec.radii[0] == pytest.approx(np.sqrt(lo * hi))
    with pytest.raises(ValueError):
        plan_contour(prm, (1.0,))
    with pytest.raises(ValueError):
        plan_contour(prm, (1.0, 0.7), policy="nope")
    with pytest.raises(Infeasible):
        plan_contour(prm.with_spins((0, 1)), (1.0, 0.7))
    with pytest.raises(Infeasible):
        plan_contour(derive(0.6, 1, 0.3, (3,), 1), (1.0,))
    with pytest.raises(Infeasible):
        plan_contour(derive(0.6, 1, 0.3, (1, 1), 2), (1.0, 0.7), policy="manual:2.0")


def _tv_integral(prm, z, policy, Q=512):
    idx = WeightIndex((1, 0), prm.spins)
    f = TVIntegrand(prm, z, idx, build_W(prm))
    return integrate(f, plan_contour(prm, z, 1, policy), QuadratureGrid(Q))


@pytest.mark.parametrize("z", [(1.0, 0.7), (0.6**6, 0.7)])
def test_tv_radius_independence(z):
    prm = derive(0.6, 1, 0.3, (1, 1), 1)
    ref = _tv_integral(prm, z, "geometric-mean")
    for r in (0.01, 0.05, 0.3):
        assert abs(_tv_integral(prm, z, f"manual:{r}") - ref) <= 1e-9 * abs(ref)


def test_tv_integral_two_variables_converges():
    prm = derive(0.6, 2, 0.3, (2,), 2)
    f = TVIntegrand(prm, (1.0,), WeightIndex((2,), (2,)), build_W(prm))
    rows = convergence_report(f, plan_contour(prm, (1.0,)), (64, 128))
    assert rows[-1]["rel_diff"] < 1e-10
