"""Evaluation modules V^(l)_z of U_q(affine sl2), tensor vectors and two-site operators.

Basis vectors v_0 ... v_l of V^(l) are indexed by i; v_0 is the highest
weight vector, of weight l.  The affine generators act as

    e0 v_i = [l-i] z v_{i+1}     e1 v_i = [i] v_{i-1}
    f0 v_i = [i] z^-1 v_{i-1}    f1 v_i = [l-i] v_{i+1}
    q^h0 v_i = q^-(l-2i) v_i     q^h1 v_i = q^(l-2i) v_i

and the coproduct is

    D(e) = e (x) 1 + q^h (x) e,   D(f) = f (x) q^-h + 1 (x) f,   D(q^h) = q^h (x) q^h.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qspecial import qint

GENERATORS = ("e0", "e1", "f0", "f1", "qh0", "qh1", "qd")
CHEVALLEY = ("e0", "e1", "f0", "f1", "qh0", "qh1")


class ShapeError(ValueError):
    """Leg indices or dimensions do not match."""


def act_generator(gen: str, l: int, i: int, zpow: int, q) -> list[tuple[complex, int, int]]:
    """Apply ``gen`` to ``v_i (x) z^zpow`` in V^(l)_z.

    Returns a list of ``(coefficient, i', zpow')`` terms; terms whose target
    index falls outside ``0..l`` are dropped.
    """
    if gen not in GENERATORS:
        raise ValueError(f"unknown generator {gen!r}")
    if not 0 <= i <= l:
        raise IndexError(f"basis index {i} outside 0..{l}")
    q = complex(q)
    if gen == "e0":
        terms = [(qint(l - i, q), i + 1, zpow + 1)]
    elif gen == "e1":
        terms = [(qint(i, q), i - 1, zpow)]
    elif gen == "f0":
        terms = [(qint(i, q), i - 1, zpow - 1)]
    elif gen == "f1":
        terms = [(qint(l - i, q), i + 1, zpow)]
    elif gen == "qh0":
        terms = [(q ** (-(l - 2 * i)), i, zpow)]
    elif gen == "qh1":
        terms = [(q ** (l - 2 * i), i, zpow)]
    else:
        terms = [(q**zpow, i, zpow)]
    return [(c, j, n) for c, j, n in terms if 0 <= j <= l and c != 0]


def generator_matrix(gen: str, l: int, z, q) -> np.ndarray:
    """Matrix of a Chevalley generator on V^(l) at the numeric point z."""
    if gen not in CHEVALLEY:
        raise ValueError(f"no numeric matrix for generator {gen!r}")
    z = complex(z)
    mat = np.zeros((l + 1, l + 1), dtype=complex)
    for i in range(l + 1):
        for c, j, n in act_generator(gen, l, i, 0, q):
            mat[j, i] += c * z**n
    return mat


def coproduct_two_site(gen: str, l1: int, l2: int, z1, z2, q) -> TwoSiteOperator:
    """D(gen) on V^(l1)_{z1} (x) V^(l2)_{z2} as an operator on sites (1, 2)."""
    return TwoSiteOperator((1, 2), coproduct_matrix(gen, l1, l2, z1, z2, q))


def coproduct_matrix(gen: str, l1: int, l2: int, z1, z2, q) -> np.ndarray:
    """Matrix of D(gen) on V^(l1)_{z1} (x) V^(l2)_{z2} (first factor slow)."""
    if gen not in CHEVALLEY:
        raise ValueError(f"unknown generator {gen!r}")
    kind, idx = gen[:-1], gen[-1]
    x1 = generator_matrix(gen, l1, z1, q)
    x2 = generator_matrix(gen, l2, z2, q)
    if kind == "qh":
        return np.kron(x1, x2)
    k1 = generator_matrix("qh" + idx, l1, z1, q)
    k2 = generator_matrix("qh" + idx, l2, z2, q)
    if kind == "e":
        return np.kron(x1, np.eye(l2 + 1)) + np.kron(k1, x2)
    return np.kron(x1, np.linalg.inv(k2)) + np.kron(np.eye(l1 + 1), x2)


def permutation_matrix(l1: int, l2: int) -> np.ndarray:
    """P: V^(l1) (x) V^(l2) -> V^(l2) (x) V^(l1), v (x) w -> w (x) v."""
    d1, d2 = l1 + 1, l2 + 1
    P = np.zeros((d1 * d2, d1 * d2))
    for a in range(d1):
        for b in range(d2):
            P[b * d1 + a, a * d2 + b] = 1.0
    return P


def flip_C(l: int) -> np.ndarray:
    """C_l v_i = v_{l-i}."""
    return np.eye(l + 1)[::-1].copy()


@dataclass(frozen=True)
class TwoSiteOperator:
    """A matrix acting on sites ``legs = (i, j)`` (1-based) of a tensor product.

    The matrix is indexed by ``(m_i, m_j)`` with the first leg slow.
    """

    legs: tuple[int, int]
    matrix: np.ndarray

    def __post_init__(self):
        i, j = self.legs
        if i == j:
            raise ShapeError(f"legs must be distinct, got {self.legs}")
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ShapeError(f"operator matrix must be square, got {mat.shape}")
        object.__setattr__(self, "matrix", mat)


class TensorVector:
    """A vector of V^(l_1) (x) ... (x) V^(l_n) stored as an n-dimensional array."""

    def __init__(self, spins: Sequence[int], coeffs=None):
        self.spins = tuple(int(s) for s in spins)
        shape = tuple(s + 1 for s in self.spins)
        if coeffs is None:
            coeffs = np.zeros(shape, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.size != int(np.prod(shape)):
            raise ShapeError(f"{coeffs.size} coefficients for shape {shape}")
        self.coeffs = coeffs.reshape(shape)

    @classmethod
    def basis(cls, spins: Sequence[int], index: Sequence[int]) -> "TensorVector":
        v = cls(spins)
        v[tuple(index)] = 1.0
        return v

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def __getitem__(self, index):
        return self.coeffs[tuple(index)]

    def __setitem__(self, index, value):
        index = tuple(index)
        for m, l in zip(index, self.spins):
            if not 0 <= m <= l:
                raise IndexError(f"index {index} out of bounds for spins {self.spins}")
        self.coeffs[index] = value

    def indices(self):
        return itertools.product(*(range(l + 1) for l in self.spins))

    def weight(self, index: Sequence[int]) -> int:
        return sum(l - 2 * m for l, m in zip(self.spins, index))

    def copy(self) -> "TensorVector":
        return TensorVector(self.spins, self.coeffs.copy())

    def __add__(self, other: "TensorVector") -> "TensorVector":
        self._check(other)
        return TensorVector(self.spins, self.coeffs + other.coeffs)

    def __sub__(self, other: "TensorVector") -> "TensorVector":
        self._check(other)
        return TensorVector(self.spins, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "TensorVector":
        return TensorVector(self.spins, self.coeffs * scalar)

    __rmul__ = __mul__

    def _check(self, other):
        if self.spins != other.spins:
            raise ShapeError(f"spin mismatch {self.spins} vs {other.spins}")

    def __repr__(self):
        nz = {idx: complex(self[idx]) for idx in self.indices() if self[idx] != 0}
        return f"TensorVector(spins={self.spins}, nonzero={nz})"


def apply_two_site(op: TwoSiteOperator, v: TensorVector) -> TensorVector:
    """Apply ``op`` to legs ``op.legs`` (1-based sites) of ``v``."""
    n = len(v.spins)
    if not all(1 <= leg <= n for leg in op.legs):
        raise ShapeError(f"legs {op.legs} outside 1..{n}")
    i, j = op.legs[0] - 1, op.legs[1] - 1
    di, dj = v.spins[i] + 1, v.spins[j] + 1
    if op.matrix.shape != (di * dj, di * dj):
        raise ShapeError(f"operator shape {op.matrix.shape} does not fit legs of size {di}, {dj}")
    mat = op.matrix.reshape(di, dj, di, dj)
    out = np.tensordot(mat, v.coeffs, axes=([2, 3], [i, j]))
    # tensordot puts the two new legs first; move them back in place
    out = np.moveaxis(out, [0, 1], [i, j])
    return TensorVector(v.spins, out)


def apply_one_site(matrix: np.ndarray, leg: int, v: TensorVector) -> TensorVector:
    """Apply ``matrix`` to site ``leg`` (1-based) of ``v``."""
    if not 1 <= leg <= len(v.spins):
        raise ShapeError(f"leg {leg} outside 1..{len(v.spins)}")
    matrix = np.asarray(matrix)
    if matrix.shape != (v.spins[leg - 1] + 1,) * 2:
        raise ShapeError(f"matrix shape {matrix.shape} does not fit site {leg}")
    out = np.tensordot(matrix, v.coeffs, axes=([1], [leg - 1]))
    return TensorVector(v.spins, np.moveaxis(out, 0, leg - 1))


def flip_all(v: TensorVector) -> TensorVector:
    """Apply C_{l_1} (x) ... (x) C_{l_n}."""
    return TensorVector(v.spins, v.coeffs[tuple(slice(None, None, -1) for _ in v.spins)])
