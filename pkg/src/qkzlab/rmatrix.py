"""Trigonometric R-matrices R_{l1,l2}(z) on V^(l1) (x) V^(l2).

Two independent constructions are provided:

* :func:`solve_R` solves the intertwining condition ``P R Delta = Delta' P R``
  numerically as a null-space problem and normalises ``R(v0 (x) v0) = v0 (x) v0``;
* :func:`closed_form_R` evaluates the explicit 2x2 operator-matrix formulae
  available when one of the spins equals 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import TruncationPolicy
from .qspecial import rho
from .representation import (
    CHEVALLEY,
    TwoSiteOperator,
    coproduct_matrix,
    flip_C,
    generator_matrix,
    permutation_matrix,
)

#: Singular-value gap below which the intertwiner is declared degenerate.
GAP_THRESHOLD = 1e6 * np.finfo(float).eps


class DegenerateIntertwiner(ArithmeticError):
    def __init__(self, dimension: int, gap: float):
        super().__init__(f"intertwiner space has dimension {dimension} (gap {gap:.3g})")
        self.dimension = dimension
        self.gap = gap


class ResonantPoint(ArithmeticError):
    """The normalising v0 (x) v0 component vanishes."""


@dataclass(frozen=True)
class RMatrix:
    l1: int
    l2: int
    z: complex
    matrix: np.ndarray
    normalized: bool = True
    gap: float = float("nan")

    def operator(self, legs: tuple[int, int]) -> TwoSiteOperator:
        return TwoSiteOperator(legs, self.matrix)

    @property
    def dim(self) -> int:
        return (self.l1 + 1) * (self.l2 + 1)


def weights(l1: int, l2: int) -> np.ndarray:
    """Total weight of each basis vector of V^(l1) (x) V^(l2), first factor slow."""
    w1 = np.array([l1 - 2 * i for i in range(l1 + 1)])
    w2 = np.array([l2 - 2 * i for i in range(l2 + 1)])
    return np.add.outer(w1, w2).ravel()


def solve_R(l1: int, l2: int, z, q) -> RMatrix:
    """Unique (up to normalisation) R with P R commuting with the coproduct.

    The evaluation points are ``z1 = z`` and ``z2 = 1``; only the ratio matters.
    """
    z = complex(z)
    D = (l1 + 1) * (l2 + 1)
    if D == 1:  # two trivial representations: every scalar intertwines
        return RMatrix(l1, l2, z, np.ones((1, 1), complex), True, math.inf)
    eye = np.eye(D)
    blocks = []
    for gen in CHEVALLEY:
        A = coproduct_matrix(gen, l1, l2, z, 1.0, q)
        B = coproduct_matrix(gen, l2, l1, 1.0, z, q)
        # row-major vec of X A - B X for X = P R
        blocks.append(np.kron(eye, A.T) - np.kron(B, eye))
    M = np.vstack(blocks)
    M /= np.linalg.norm(M, axis=1, keepdims=True).max()
    _, s, vh = np.linalg.svd(M)
    null_dim = int(np.sum(s < GAP_THRESHOLD * s[0]))
    if null_dim != 1:
        raise DegenerateIntertwiner(null_dim, float(s[-2] if null_dim == 0 else s[-1]))
    gap = float(s[-2] / max(s[-1], np.finfo(float).tiny))
    X = vh[-1].conj().reshape(D, D)
    R = permutation_matrix(l1, l2).T @ X
    lead = R[0, 0]
    if abs(lead) < 1e-12 * np.abs(R).max():
        raise ResonantPoint(f"v0 (x) v0 component vanishes at z = {z}")
    R = R / lead
    # commuting with q^h1 forces exact weight-block structure
    w = weights(l1, l2)
    R[w[:, None] != w[None, :]] = 0
    return RMatrix(l1, l2, z, R, True, gap)


def _diag_qh(l: int, q, c: float) -> np.ndarray:
    """Diagonal matrix of q^(c h) on V^(l)."""
    return np.diag([complex(q) ** (c * (l - 2 * i)) for i in range(l + 1)])


def closed_form_R(l1: int, l2: int, z, q) -> RMatrix:
    """Explicit R-matrix when ``l1 == 1`` or ``l2 == 1``.

    The 2x2 block structure runs over the spin-1 factor; h, e, f are the
    sl2 generators h1, e1, f1 acting on the other factor.
    """
    if l1 != 1 and l2 != 1:
        raise ValueError(f"closed form needs a spin-1 factor, got ({l1}, {l2})")
    q, z = complex(q), complex(z)
    s = q - 1 / q
    if l1 == 1:
        l = l2
        e = generator_matrix("e1", l, 1.0, q)
        f = generator_matrix("f1", l, 1.0, q)
        den = q ** (1 + l / 2) - q ** (-l / 2) / z
        blocks = [
            [q * _diag_qh(l, q, 0.5) - _diag_qh(l, q, -0.5) / z, s / z * f @ _diag_qh(l, q, 0.5)],
            [s * e @ _diag_qh(l, q, -0.5), q * _diag_qh(l, q, -0.5) - _diag_qh(l, q, 0.5) / z],
        ]
        # R(v_eps (x) v_j) = sum_eps' v_eps' (x) r_{eps' eps} v_j
        R = np.block(blocks) / den
    else:
        l = l1
        e = generator_matrix("e1", l, 1.0, q)
        f = generator_matrix("f1", l, 1.0, q)
        den = z * q ** (l / 2) - q ** (-1 - l / 2)
        blocks = [
            [z * _diag_qh(l, q, 0.5) - _diag_qh(l, q, -0.5) / q, s * z * _diag_qh(l, q, 0.5) @ f],
            [s * _diag_qh(l, q, -0.5) @ e, z * _diag_qh(l, q, -0.5) - _diag_qh(l, q, 0.5) / q],
        ]
        # R(v_j (x) v_eps) = sum_eps' r_{eps' eps} v_j (x) v_eps'
        R4 = np.zeros((l + 1, 2, l + 1, 2), dtype=complex)
        for ep in range(2):
            for ee in range(2):
                R4[:, ep, :, ee] = blocks[ep][ee]
        R = R4.reshape(2 * (l + 1), 2 * (l + 1)) / den
    return RMatrix(l1, l2, z, R, True)


def flip_conjugate(matrix: np.ndarray, l1: int, l2: int) -> np.ndarray:
    """(C (x) C) M (C (x) C)."""
    CC = np.kron(flip_C(l1), flip_C(l2))
    return CC @ matrix @ CC


def r_tilde(l1: int, l2: int, z, q) -> np.ndarray:
    return flip_conjugate(solve_R(l1, l2, z, q).matrix, l1, l2)


def r_hat(l1: int, l2: int, z, q, trunc: TruncationPolicy | None = None) -> RMatrix:
    """``rho_{l1,l2}(z) (C (x) C) R(z) (C (x) C)``."""
    mat = rho(z, l1, l2, q, trunc) * r_tilde(l1, l2, z, q)
    return RMatrix(l1, l2, complex(z), mat, False)


def _embed(mat: np.ndarray, legs: tuple[int, int], spins: tuple[int, ...]) -> np.ndarray:
    """Full matrix on the tensor product of ``spins`` for an operator on two legs."""
    n = len(spins)
    dims = [s + 1 for s in spins]
    i, j = legs
    op = mat.reshape(dims[i], dims[j], dims[i], dims[j])
    total = int(np.prod(dims))
    eye = np.eye(total).reshape(dims + dims)
    # contract op's input legs with identity's output legs i, j
    out = np.tensordot(op, eye, axes=([2, 3], [i, j]))
    out = np.moveaxis(out, [0, 1], [i, j])
    return out.reshape(total, total)


def ybe_residual(l1: int, l2: int, l3: int, z12, z23, q) -> float:
    """Relative Frobenius residual of R12 R13 R23 - R23 R13 R12 with z13 = z12 z23."""
    spins = (l1, l2, l3)
    z13 = complex(z12) * complex(z23)
    R12 = _embed(solve_R(l1, l2, z12, q).matrix, (0, 1), spins)
    R13 = _embed(solve_R(l1, l3, z13, q).matrix, (0, 2), spins)
    R23 = _embed(solve_R(l2, l3, z23, q).matrix, (1, 2), spins)
    lhs = R12 @ R13 @ R23
    rhs = R23 @ R13 @ R12
    scale = np.linalg.norm(R12) * np.linalg.norm(R13) * np.linalg.norm(R23)
    return float(np.linalg.norm(lhs - rhs) / scale)
