"""q-numbers, truncated q-Pochhammer products, the theta function and the
scalar normalisations rho and xi.

Every infinite product is truncated according to a :class:`TruncationPolicy`.
The product functions accept numpy arrays for their first argument and
evaluate element-wise.
"""

from __future__ import annotations

import math
import threading
import warnings

import numpy as np

from .params import ParameterDomainError, TruncationPolicy, cpow

DEFAULT_TRUNC = TruncationPolicy()

#: Denominator factors smaller than this trigger a :class:`NearPoleWarning`.
POLE_TOL = 1e-13


class NearPoleWarning(RuntimeWarning):
    """A denominator factor came within POLE_TOL of zero."""


def qint(n: int, q) -> complex:
    """The q-number ``(q^n - q^-n) / (q - q^-1)``."""
    q = complex(q)
    if q == 0 or q == 1 or q == -1:
        raise ParameterDomainError(f"q-number undefined at q = {q}")
    return (q**n - q ** (-n)) / (q - 1 / q)


def qfact(n: int, q) -> complex:
    if n < 0:
        raise IndexError(f"q-factorial of negative integer {n}")
    out = 1.0 + 0j
    for i in range(1, n + 1):
        out *= qint(i, q)
    return out


def qbinom(n: int, m: int, q) -> complex:
    if m < 0 or m > n:
        raise IndexError(f"q-binomial index out of range: n={n}, m={m}")
    # product form avoids 0/0 when q is close to 1
    out = 1.0 + 0j
    for i in range(m):
        out *= qint(n - i, q) / qint(i + 1, q)
    return out


def _n_factors(zmax: float, amod: float, trunc: TruncationPolicy) -> int:
    if zmax == 0 or amod == 0:
        return 1
    # smallest n with amod^n * zmax < tail_tol
    need = math.log(trunc.tail_tol / zmax) / math.log(amod)
    n = max(1, int(math.ceil(need)) + 1)
    return min(n, trunc.max_terms)


def qpoch(z, a, trunc: TruncationPolicy | None = None, with_bound: bool = False,
          skip: tuple[int, ...] = ()):
    """Truncated ``(z; a)_inf = prod_{i>=0} (1 - a^i z)``.

    With ``with_bound`` a pair ``(value, bound)`` is returned, where ``bound``
    estimates the relative size of the discarded tail.  Factors whose index
    is listed in ``skip`` are left out; residue evaluation uses this to divide
    out a vanishing factor exactly.
    """
    trunc = trunc or DEFAULT_TRUNC
    a = complex(a)
    if abs(a) >= 1:
        raise ParameterDomainError(f"(z; a)_inf needs |a| < 1, got |a| = {abs(a)}")
    z_arr = np.asarray(z, dtype=complex)
    zmax = float(np.max(np.abs(z_arr))) if z_arr.size else 0.0
    nf = _n_factors(zmax, abs(a), trunc)
    if skip:
        nf = max(nf, max(skip) + 2)
    powers = a ** np.arange(nf)
    factors = 1 - np.multiply.outer(z_arr, powers)
    for i in skip:
        factors[..., i] = 1
    value = np.prod(factors, axis=-1)
    if z_arr.ndim == 0:
        value = complex(value)
    if not with_bound:
        return value
    bound = abs(a) ** nf * np.abs(z_arr) / (1 - abs(a))
    if z_arr.ndim == 0:
        bound = float(bound)
    return value, bound


def qpoch2(z, a, b, trunc: TruncationPolicy | None = None, with_bound: bool = False):
    """Truncated ``(z; a, b)_inf = prod_{i,j>=0} (1 - a^i b^j z)``."""
    trunc = trunc or DEFAULT_TRUNC
    a, b = complex(a), complex(b)
    if abs(a) >= 1 or abs(b) >= 1:
        raise ParameterDomainError("(z; a, b)_inf needs |a| < 1 and |b| < 1")
    z_arr = np.asarray(z, dtype=complex)
    zmax = float(np.max(np.abs(z_arr))) if z_arr.size else 0.0
    na = _n_factors(zmax, abs(a), trunc)
    value = np.ones(z_arr.shape, dtype=complex)
    bound = np.zeros(z_arr.shape)
    for i in range(na):
        row = a**i * z_arr
        if i > 0 and np.max(np.abs(row)) < trunc.tail_tol:
            break
        v, bd = qpoch(row, b, trunc, with_bound=True)
        value = value * v
        bound = bound + bd
    bound = bound + abs(a) ** na * np.abs(z_arr) / ((1 - abs(a)) * (1 - abs(b)))
    if z_arr.ndim == 0:
        value, bound = complex(value), float(bound)
    return (value, bound) if with_bound else value


def theta(z, p, trunc: TruncationPolicy | None = None):
    """``theta(z) = (z; p)_inf (p/z; p)_inf (p; p)_inf``; satisfies theta(pz) = -theta(z)/z."""
    z_arr = np.asarray(z, dtype=complex)
    if np.any(z_arr == 0):
        raise ParameterDomainError("theta(z) is undefined at z = 0")
    return qpoch(z_arr, p, trunc) * qpoch(p / z_arr, p, trunc) * qpoch(p, p, trunc)


def _check_denominator(value, what: str):
    if np.any(np.abs(np.asarray(value)) < POLE_TOL):
        warnings.warn(f"{what}: denominator within {POLE_TOL:g} of zero", NearPoleWarning,
                      stacklevel=3)


def rho(z, li: int, lj: int, q, trunc: TruncationPolicy | None = None):
    """Scalar normalisation of the R-matrix, a ratio of four (.; q^4)_inf products."""
    q = complex(q)
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ParameterDomainError("rho(z) is undefined at z = 0")
    q4 = q**4
    x = 1 / z
    num = qpoch(q ** (li + lj + 2) * x, q4, trunc) * qpoch(q ** (-li - lj + 2) * x, q4, trunc)
    den = qpoch(q ** (-li + lj + 2) * x, q4, trunc) * qpoch(q ** (li - lj + 2) * x, q4, trunc)
    _check_denominator(den, "rho")
    out = np.asarray(q ** (li * lj / 2) * num / den)
    return complex(out) if out.ndim == 0 else out


def xi(z, li: int, lj: int, q, p, trunc: TruncationPolicy | None = None):
    """Scalar prefactor of the solution, a ratio of four (.; q^4, p)_inf products."""
    q, p = complex(q), complex(p)
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ParameterDomainError("xi(z) is undefined at z = 0")
    q4 = q**4
    x = p / z
    num = qpoch2(q ** (li + lj + 2) * x, q4, p, trunc) * qpoch2(q ** (-li - lj + 2) * x, q4, p, trunc)
    den = qpoch2(q ** (li - lj + 2) * x, q4, p, trunc) * qpoch2(q ** (-li + lj + 2) * x, q4, p, trunc)
    _check_denominator(den, "xi")
    out = np.asarray(num / den)
    return complex(out) if out.ndim == 0 else out


class QPochhammerCache:
    """Memoised ``(z; base)_inf`` for repeated scalar evaluations.

    Readers may run concurrently; inserts take a lock.
    """

    def __init__(self, base, trunc: TruncationPolicy | None = None):
        self.base = complex(base)
        self.trunc = trunc or DEFAULT_TRUNC
        self._memo: dict[complex, complex] = {}
        self._lock = threading.Lock()

    def __call__(self, z) -> complex:
        z = complex(z)
        hit = self._memo.get(z)
        if hit is not None:
            return hit
        value = qpoch(z, self.base, self.trunc)
        with self._lock:
            self._memo.setdefault(z, value)
        return value

    def __len__(self):
        return len(self._memo)


def power(base, exponent):
    """Scalar principal-branch power; thin wrapper used across modules."""
    return complex(cpow(base, exponent))
