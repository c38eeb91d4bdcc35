import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qkzlab import oracles
from qkzlab.params import derive
from qkzlab.weight import (PoleHit, WeightIndex, enumerate_partitions, multinomial, phase_phi,
                           solution_prefactor, theorem_F, weight_w)


def test_index_modes_and_dual():
    idx = WeightIndex((1, 0, 2), (1, 2, 2), "ff")
    assert idx.counts == (0, 2, 0) and idx.N == 2 and idx.positions == (2,) and idx.r == 1
    dual = idx.dual()
    assert dual.mode == "tv" and dual.nu == (0, 2, 0)
    with pytest.raises(ValueError):
        WeightIndex((2,), (1,))
    with pytest.raises(ValueError):
        WeightIndex((1,), (1,), "xx")


@pytest.mark.parametrize("sizes", [(1, 1), (2, 1), (1, 2, 1), (3,)])
def test_partition_count(sizes):
    N = sum(sizes)
    parts = list(enumerate_partitions(sizes, N))
    assert len(parts) == multinomial(sizes) == math.factorial(N) // math.prod(map(math.factorial, sizes))
    assert len({p.blocks for p in parts}) == len(parts)
    with pytest.raises(ValueError):
        list(enumerate_partitions(sizes, N + 1))


@pytest.mark.parametrize("sizes,count", [((3,), 1), ((1, 1), 2), ((2, 1), 3)])
def test_partition_examples(sizes, count):
    assert len(list(enumerate_partitions(sizes, sum(sizes)))) == count


def test_single_variable_formula():
    # N = 1: t / (t - q^-l_k z_k) times the product over earlier sites
    q, z, t = 0.6, [1.0, 0.7 + 0.2j, 0.5j], 0.3 + 0.4j
    spins = (1, 2, 1)
    for k in range(3):
        nu = tuple(int(i == k) for i in range(3))
        ref = t / (t - q ** -spins[k] * z[k])
        for j in range(k):
            ref *= (q ** -spins[j] * t - z[j]) / (t - q ** -spins[j] * z[j])
        assert weight_w(WeightIndex(nu, spins), [t], z, q) == pytest.approx(ref, rel=1e-14)


def test_empty_weight_is_one():
    assert weight_w(WeightIndex((0, 0), (1, 1)), [], [1, 2], 0.5) == 1


def test_vectorised_matches_scalar(rng):
    idx = WeightIndex((1, 1), (1, 2))
    t = rng.normal(size=(2, 5)) + 1j * rng.normal(size=(2, 5))
    vec = weight_w(idx, t, [1, 0.7], 0.6)
    for m in range(5):
        assert vec[m] == pytest.approx(weight_w(idx, t[:, m], [1, 0.7], 0.6), rel=1e-13)


def test_pole_hit():
    q = 0.6
    with pytest.raises(PoleHit):
        weight_w(WeightIndex((1,), (1,)), [q**-1 * 0.7], [0.7], q)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 0.8), st.floats(-3, 3), st.floats(0.5, 2), st.floats(-3, 3))
def test_phi_shift_ratio(tr, tphi, zr, zphi):
    prm = derive(0.6, 1, 0.3, (1, 2), 1)
    t = complex(tr * np.exp(1j * tphi))
    z = [1.0, complex(zr * np.exp(1j * zphi))]
    # keep the Pochhammer factors in the denominators away from zero
    for l, zj in zip(prm.spins, z):
        for x in (t / zj, prm.p * t / zj):
            assume(min(abs(1 - prm.q**-l * x * prm.p**i) for i in range(4)) > 1e-3)
    ratio = phase_phi([prm.p * t], z, prm) / phase_phi([t], z, prm)
    ref = 1.0
    for l, zj in zip(prm.spins, z):
        x = t / zj
        ref *= (1 - prm.q ** -l * x) / (1 - prm.q**l * x)
    assert abs(ratio - ref) <= 1e-11 * abs(ref)


FLAGSHIP = dict(q=0.6, k=1, L=0.3, spins=(1, 1), N=1)
T0, Z0 = [0.2 + 0j], [1.0 + 0j, 0.7 + 0j]


def test_solution_prefactor_pinned():
    # frozen from a 30-digit mpmath evaluation of z^a and the double products
    prm = derive(**FLAGSHIP)
    assert solution_prefactor(Z0, prm) == pytest.approx(0.883780666334998239683815257617, rel=1e-13)


def test_theorem_f_pinned():
    # frozen from the free-field assembly (-1)^N (q - 1/q)^-2N / [n]! t^-1 f Phi J in oracles
    prm = derive(**FLAGSHIP)
    idx = WeightIndex((1, 0), (1, 1), "ff")
    assert theorem_F(idx, T0, Z0, prm) == pytest.approx(4.617500253562579, rel=1e-12)
    assert theorem_F(idx, T0, Z0, prm) == pytest.approx(oracles.free_field_F(idx, T0, Z0, prm), rel=1e-12)


def test_theorem_f_argument_checks():
    prm = derive(**FLAGSHIP)
    with pytest.raises(ValueError):
        theorem_F(WeightIndex((1, 0), (1, 1), "tv"), T0, Z0, prm)
    with pytest.raises(ValueError):
        theorem_F(WeightIndex((0, 0), (1, 1), "ff"), T0, Z0, prm)
    with pytest.warns(RuntimeWarning):
        theorem_F(WeightIndex((1, 0), (1, 1), "ff"), [-0.2 + 0j], Z0, prm)
