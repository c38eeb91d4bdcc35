"""Combinatorial weight function w_(nu), the phase function Phi, the scalar
prefactor of Psi and the closed form F^(nu) of the free-field matrix element.

Two indexing conventions exist for a weight vector (nu):

* ``"tv"`` mode: sum(nu) = N, the active sites are those with nu_i != 0 and
  n_s = nu_{k(s)};
* ``"ff"`` mode: sum(l - nu) = N, the active sites are those with
  nu_i != l_i and n_s = l_{k(s)} - nu_{k(s)}.

``WeightIndex.dual()`` converts an ``ff`` index (nu) into the ``tv`` index
(-nu) = (l_1 - nu_1, ..., l_n - nu_n) that enters w.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .params import ModelParams, TruncationPolicy, cpow
from .qspecial import qpoch, qint, xi


class PoleHit(ArithmeticError):
    """A denominator of w vanished; ``pair`` names the offending factor."""

    def __init__(self, pair, value):
        super().__init__(f"pole hit at {pair}: denominator {value!r}")
        self.pair = pair


#: Denominators of modulus below this count as a pole hit.
PAIR_TOL = 1e-300


@dataclass(frozen=True)
class WeightIndex:
    nu: tuple[int, ...]
    spins: tuple[int, ...]
    mode: str = "tv"

    def __post_init__(self):
        nu = tuple(int(v) for v in self.nu)
        spins = tuple(int(s) for s in self.spins)
        if len(nu) != len(spins):
            raise ValueError(f"nu has {len(nu)} entries for {len(spins)} sites")
        if any(not 0 <= v <= l for v, l in zip(nu, spins)):
            raise ValueError(f"need 0 <= nu_i <= l_i, got nu={nu}, spins={spins}")
        if self.mode not in ("tv", "ff"):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "spins", spins)

    @property
    def counts(self) -> tuple[int, ...]:
        """Per-site number of integration variables attached to the site."""
        if self.mode == "tv":
            return self.nu
        return tuple(l - v for l, v in zip(self.spins, self.nu))

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def positions(self) -> tuple[int, ...]:
        """k(1) < ... < k(r), 1-based."""
        return tuple(i + 1 for i, c in enumerate(self.counts) if c != 0)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(c for c in self.counts if c != 0)

    @property
    def r(self) -> int:
        return len(self.positions)

    def dual(self) -> "WeightIndex":
        """The index (-nu) = (l - nu) in the opposite mode."""
        other = "ff" if self.mode == "tv" else "tv"
        return WeightIndex(tuple(l - v for l, v in zip(self.spins, self.nu)), self.spins, other)


@dataclass(frozen=True)
class OrderedPartition:
    blocks: tuple[tuple[int, ...], ...]

    def block_of(self) -> dict[int, int]:
        """Map variable (1-based) -> block number (0-based)."""
        return {a: s for s, blk in enumerate(self.blocks) for a in blk}


def enumerate_partitions(sizes: Sequence[int], N: int) -> Iterator[OrderedPartition]:
    """All ordered set partitions of {1..N} into blocks of the given sizes.

    Deterministic order: lexicographic in the block label sequence.
    """
    sizes = tuple(int(s) for s in sizes)
    if sum(sizes) != N or any(s < 0 for s in sizes):
        raise ValueError(f"block sizes {sizes} do not partition N = {N}")
    labels = [s for s, size in enumerate(sizes) for _ in range(size)]
    for word in _distinct_permutations(labels):
        blocks = tuple(tuple(a + 1 for a, s in enumerate(word) if s == blk) for blk in range(len(sizes)))
        yield OrderedPartition(blocks)


def _distinct_permutations(items: list[int]) -> Iterator[tuple[int, ...]]:
    """Distinct permutations of a multiset in lexicographic order."""
    seq = sorted(items)
    n = len(seq)
    while True:
        yield tuple(seq)
        i = n - 2
        while i >= 0 and seq[i] >= seq[i + 1]:
            i -= 1
        if i < 0:
            return
        j = n - 1
        while seq[j] <= seq[i]:
            j -= 1
        seq[i], seq[j] = seq[j], seq[i]
        seq[i + 1:] = reversed(seq[i + 1:])


def multinomial(sizes: Sequence[int]) -> int:
    out = math.factorial(sum(sizes))
    for s in sizes:
        out //= math.factorial(s)
    return out


def csum(values: Iterable[complex]) -> complex:
    """Compensated complex summation (exactly rounded real and imaginary parts)."""
    vals = [complex(v) for v in values]
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))


def _div(num, den, pair):
    if np.any(np.abs(den) < PAIR_TOL):
        raise PoleHit(pair, den)
    return num / den


def weight_terms(idx: WeightIndex, t, z: Sequence[complex], q,
                 drop: frozenset = frozenset(), cancel: frozenset = frozenset()) -> Iterator:
    """The partition terms of w_(nu), in enumeration order.

    ``t`` has shape (N,) or (N, M); in the second case every term is an
    array over the M points.  ``drop`` lists linear denominators to remove
    analytically, which is the same as multiplying w by them.  Entries are
    ``("z", a, j)`` for the factor ``t_a - q^-l_j z_j`` and ``("t", a, b)``
    (a < b) for ``q^-2 t_a - t_b``.  ``cancel`` lists numerators
    ``("z", a, j)`` for ``q^-l_j t_a - z_j`` to divide out analytically; a term
    lacking that numerator must vanish, otherwise :class:`PoleHit` is raised.
    """
    if idx.mode != "tv":
        raise ValueError("weight_w takes a tv-mode index; use idx.dual() for ff indices")
    q = complex(q)
    t = np.asarray(t, dtype=complex)
    z = [complex(x) for x in z]
    N = idx.N
    if t.shape[0] != N:
        raise ValueError(f"expected {N} t-variables, got {t.shape[0]}")
    spins = idx.spins
    pos = idx.positions
    qm = [q ** (-l) for l in spins]
    one = np.ones(t.shape[1:], dtype=complex)
    for part in enumerate_partitions(idx.multiplicities, N):
        block = part.block_of()
        val = one.copy()
        used = set()
        cancelled = set()
        for a in range(1, N + 1):
            ta = t[a - 1]
            for b in range(a + 1, N + 1):
                tb = t[b - 1]
                if block[a] < block[b]:
                    continue
                key = ("t", a, b)
                num = ta - tb if block[a] == block[b] else ta - q**-2 * tb
                if key in drop:
                    val = val * num
                    used.add(key)
                else:
                    val = val * _div(num, q**-2 * ta - tb, key)
            kk = pos[block[a]]
            for j in range(1, kk + 1):
                if spins[j - 1] == 0:
                    # (t - z)/(t - z): identically one
                    continue
                key = ("z", a, j)
                num = ta if j == kk else qm[j - 1] * ta - z[j - 1]
                if j < kk and key in cancel:
                    num = one
                    cancelled.add(key)
                if key in drop:
                    val = val * num
                    used.add(key)
                else:
                    val = val * _div(num, ta - qm[j - 1] * z[j - 1], key)
        for key in drop - used:
            val = val * _linear_factor(key, t, z, spins, q)
        for key in cancel - cancelled:
            if np.all(val == 0):
                break
            _, a, j = key
            val = _div(val, qm[j - 1] * t[a - 1] - z[j - 1], key)
        yield val


def _linear_factor(key, t, z, spins, q):
    """The dropped factor; exactly zero where it cancels to rounding level."""
    if key[0] == "z":
        _, a, j = key
        u, v = t[a - 1], q ** (-spins[j - 1]) * z[j - 1]
    else:
        _, a, b = key
        u, v = q**-2 * t[a - 1], t[b - 1]
    f = u - v
    return np.where(np.abs(f) <= 8 * np.finfo(float).eps * np.maximum(np.abs(u), np.abs(v)), 0, f)


def weight_w(idx: WeightIndex, t, z: Sequence[complex], q,
             drop: frozenset = frozenset(), cancel: frozenset = frozenset()):
    """w_(nu)(t, z) as a compensated partition sum; N = 0 gives 1.

    Scalar for ``t`` of shape (N,), array for shape (N, M).
    """
    t = np.asarray(t, dtype=complex)
    if t.ndim <= 1:
        return csum(weight_terms(idx, t.reshape(-1), z, q, drop, cancel))
    return neumaier_sum(weight_terms(idx, t, z, q, drop, cancel), t.shape[1:])


def neumaier_sum(arrays: Iterable[np.ndarray], shape) -> np.ndarray:
    """Element-wise compensated (Neumaier) summation of a stream of arrays."""
    acc = [np.zeros(shape), np.zeros(shape)]
    comp = [np.zeros(shape), np.zeros(shape)]
    for x in arrays:
        x = np.broadcast_to(np.asarray(x, dtype=complex), shape)
        for k, part in enumerate((x.real, x.imag)):
            tot = acc[k] + part
            big = np.abs(acc[k]) >= np.abs(part)
            comp[k] += np.where(big, (acc[k] - tot) + part, (part - tot) + acc[k])
            acc[k] = tot
    return (acc[0] + comp[0]) + 1j * (acc[1] + comp[1])


def phase_phi(t: Sequence[complex], z: Sequence[complex], params: ModelParams,
              trunc: TruncationPolicy | None = None) -> complex:
    """Phi(t, z): Pochhammer ratios in base p over (t_a, z_i) and over pairs a < b."""
    q, p = params.q, params.p
    t = np.asarray(t, dtype=complex)
    z = np.asarray(z, dtype=complex)
    out = 1.0 + 0j
    for a in range(len(t)):
        for l, zi in zip(params.spins, z):
            x = t[a] / zi
            out *= qpoch(q**l * x, p, trunc) / qpoch(q ** (-l) * x, p, trunc)
        for b in range(a + 1, len(t)):
            x = t[a] / t[b]
            out *= qpoch(q**-2 * x, p, trunc) / qpoch(q**2 * x, p, trunc)
    return complex(out)


def solution_prefactor(z: Sequence[complex], params: ModelParams,
                       trunc: TruncationPolicy | None = None) -> complex:
    """prod z_i^{a_i} * prod_{i<j} xi_{l_i, l_j}(z_i / z_j)."""
    z = [complex(x) for x in z]
    out = 1.0 + 0j
    for zi, ai in zip(z, params.a_exponents):
        out *= complex(cpow(zi, ai))
    for i, j in itertools.combinations(range(len(z)), 2):
        out *= xi(z[i] / z[j], params.spins[i], params.spins[j], params.q, params.p, trunc)
    return out


def _n_sites_block(idx: WeightIndex):
    return list(zip(idx.positions, idx.multiplicities))


def theorem_A(idx: WeightIndex, t: Sequence[complex], params: ModelParams) -> complex:
    """The factor A^(nu)(t, z) of the closed form (it depends on t only)."""
    if idx.mode != "ff":
        raise ValueError("theorem_A takes an ff-mode index")
    q, k, L = params.q, params.k, params.L
    spins = params.spins
    N = idx.N
    S = sum(spins)
    pair = sum(spins[i] * spins[j] for i, j in itertools.combinations(range(len(spins)), 2))
    expo = (-N * L + 1.5 * N * (N - 1) - S * N
            + (k * pair + k * (L - 2 * N) * S + 4 * L * N - 4 * N * (N - 1)) / (2 * (k + 2)))
    out = complex(cpow(q, expo)) / (q - 1 / q) ** N
    blocks = _n_sites_block(idx)
    for s, (kk, ns) in enumerate(blocks):
        later = sum(nt for _, nt in blocks[s + 1:])
        out *= q ** (later * ns - spins[kk - 1] * ns)
        for i in range(ns):
            out *= 1 - q ** (2 * (spins[kk - 1] - i))
    for a, ta in enumerate(t, start=1):
        out *= complex(cpow(ta, 2 * (a - 1) / (k + 2) - L / (k + 2) - 1))
    return out


def theorem_z_power(z: Sequence[complex], params: ModelParams, N: int) -> complex:
    """prod_i z_i^{l_i (L - 2N + sum_{j>i} l_j) / (2(k+2))}."""
    spins = params.spins
    out = 1.0 + 0j
    for i, zi in enumerate(z):
        e = spins[i] / (2 * (params.k + 2)) * (params.L - 2 * N + sum(spins[i + 1:]))
        out *= complex(cpow(zi, e))
    return out


def xi_product(z: Sequence[complex], params: ModelParams,
               trunc: TruncationPolicy | None = None) -> complex:
    out = 1.0 + 0j
    for i, j in itertools.combinations(range(len(z)), 2):
        out *= xi(complex(z[i]) / complex(z[j]), params.spins[i], params.spins[j],
                  params.q, params.p, trunc)
    return out


def theorem_F(idx: WeightIndex, t: Sequence[complex], z: Sequence[complex], params: ModelParams,
              trunc: TruncationPolicy | None = None) -> complex:
    """Closed form F^(nu) = A * z-powers * xi-product * Phi * w_(-nu)."""
    if idx.mode != "ff":
        raise ValueError("theorem_F takes an ff-mode index")
    if tuple(idx.spins) != tuple(params.spins):
        raise ValueError("index spins do not match params")
    if idx.N != params.N:
        raise ValueError(f"index carries N = {idx.N}, params N = {params.N}")
    t = [complex(x) for x in t]
    if any(x.imag == 0 and x.real < 0 for x in t):
        import warnings

        warnings.warn("t on the negative real axis: principal-branch powers are discontinuous",
                      RuntimeWarning, stacklevel=2)
    return (theorem_A(idx, t, params) * theorem_z_power(z, params, idx.N)
            * xi_product(z, params, trunc) * phase_phi(t, z, params, trunc)
            * weight_w(idx.dual(), t, z, params.q))


def qfact_product(idx: WeightIndex, q) -> complex:
    out = 1.0 + 0j
    for ns in idx.multiplicities:
        for i in range(1, ns + 1):
            out *= qint(i, q)
    return out
