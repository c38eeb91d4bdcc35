"""Brute-force checks of the finite identities behind the closed form of F.

Each check returns an :class:`IdentityReport` that compares an independent
evaluation (enumeration over subsets or permutations, or numerical
integration over the u-contours) with a transcribed closed form.  Closed
forms are kept factor group by factor group, without simplification.

Index conventions
-----------------
``idx`` is an ``ff``-mode :class:`WeightIndex`; its active sites
k(1) < ... < k(r) carry n_1 ... n_r variables.  The u-variables are labelled
by pairs (i1, i2), 1 <= i2 <= n_i1, in lexicographic order, and ``mu`` is a
tuple of +-1 aligned with that order.  ``eps`` has one sign per t-variable and
``m`` one integer 0 <= m_i <= n_i per block.  All labels are 1-based.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy.optimize import linprog

from .contour import Infeasible
from .params import ModelParams, cpow
from .qspecial import qbinom, qfact, qint
from .weight import WeightIndex, csum, enumerate_partitions, weight_w

EPS = 1e-300

#: Default pass thresholds per identity family.
TOLERANCES = {
    "lemma_combi_i": 1e-10,
    "lemma_combi_ii": 1e-10,
    "lemma_sym": 1e-9,
    "lemma_z": 1e-9,
    "lemma_z_zfree": 1e-10,
    "eps_sum": 1e-8,
    "lemma_i": 1e-8,
    "jhat_prop": 1e-8,
    "a_eq_n": 1e-8,
    "mainprop_vanish": 1e-8,
    "mainprop_const": 1e-8,
    "mainprop_ratio": 1e-9,
    "theorem_f": 1e-9,
}

# Per-variable factors relating the full-block product form (site factor
# t/(z_k - q^l t), crossing factor (z_j - q^-l t)/(z_j - q^l t)) to the
# factors of w (t/(t - q^-l z_k) and (q^-l t - z_j)/(t - q^-l z_j)).  Each
# entry is (sign, power of q per unit of l).  The pair factors agree exactly.
CONVERSION = {
    "site": (-1, -1),      # t/(z - q^l t) = -q^-l * t/(t - q^-l z)
    "crossing": (1, -1),   # (z - q^-l t)/(z - q^l t) = q^-l (q^-l t - z)/(t - q^-l z)
    "pair": (1, 0),
}


@dataclass(frozen=True)
class IdentityReport:
    identity_id: str
    sample: dict
    lhs: complex
    rhs: complex
    residual: float
    passed: bool
    tol: float
    notes: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"identity": self.identity_id, "sample": self.sample,
                "lhs": [self.lhs.real, self.lhs.imag], "rhs": [self.rhs.real, self.rhs.imag],
                "residual": self.residual, "tol": self.tol, "pass": self.passed,
                "notes": self.notes, **self.extra}


def compare(identity_id, sample, lhs, rhs, tol=None, notes="", scale=None, **extra) -> IdentityReport:
    """Relative comparison |lhs - rhs| / (|lhs| + |rhs| + eps).

    When ``scale`` (the largest summand behind either side) is given and both
    sides sit below ``tol * scale``, the value is a cancellation to zero and
    the residual becomes |lhs - rhs| / scale instead.
    """
    tol = TOLERANCES[identity_id] if tol is None else tol
    lhs, rhs = complex(lhs), complex(rhs)
    res = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + EPS)
    if scale is not None and max(abs(lhs), abs(rhs)) < tol * scale:
        res = abs(lhs - rhs) / max(float(scale), EPS)
        notes = (notes + "; " if notes else "") + "both sides vanish: residual = |lhs - rhs| / max term"
    return IdentityReport(identity_id, sample, lhs, rhs, float(res), bool(res < tol), tol, notes, extra)


def vanishing(identity_id, sample, value, scale, tol=None, notes="", **extra) -> IdentityReport:
    """Absolute test |value| < tol * scale, with scale the largest term of the sum."""
    tol = TOLERANCES[identity_id] if tol is None else tol
    value = complex(value)
    res = abs(value) / max(float(scale), EPS)
    return IdentityReport(identity_id, sample, value, 0j, float(res), bool(res < tol), tol,
                          notes or "vanishing: residual = |lhs| / max term", extra)


def _c(x) -> list:
    x = complex(x)
    return [x.real, x.imag]


def perm_sign(perm: Sequence[int]) -> int:
    inv = sum(1 for i, j in itertools.combinations(range(len(perm)), 2) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


# ---------------------------------------------------------------- finite identities

def lemma_combi_i(n: int, m: int, q) -> IdentityReport:
    """Sum over |A| = m of q^(2 #{i<j: i in A, j in B}) against q^(m(n-m)) [n, m]."""
    if not 0 <= m <= n <= 10:
        raise ValueError(f"need 0 <= m <= n <= 10, got n={n}, m={m}")
    q = complex(q)
    terms = []
    for A in itertools.combinations(range(1, n + 1), m):
        B = set(range(1, n + 1)) - set(A)
        terms.append(q ** (2 * sum(1 for i in A for j in B if i < j)))
    rhs = q ** (m * (n - m)) * qbinom(n, m, q)
    return compare("lemma_combi_i", {"n": n, "m": m, "q": _c(q)}, csum(terms), rhs)


def lemma_combi_ii(n: int, m: int, q) -> IdentityReport:
    """Sum over sign patterns with m plus signs of prod_{i<j} q^mu_i."""
    if not 0 <= m <= n <= 10:
        raise ValueError(f"need 0 <= m <= n <= 10, got n={n}, m={m}")
    q = complex(q)
    terms = []
    for A in itertools.combinations(range(n), m):
        mu = [1 if i in A else -1 for i in range(n)]
        terms.append(q ** sum(mu[i] * (n - 1 - i) for i in range(n)))
    rhs = q ** (-n * (n - 1) // 2 + m * (n - 1)) * qbinom(n, m, q)
    return compare("lemma_combi_ii", {"n": n, "m": m, "q": _c(q)}, csum(terms), rhs)


def elementary_symmetric(m: int, t: Sequence[complex]) -> complex:
    return csum(math.prod(c) for c in itertools.combinations(t, m)) if m else 1.0 + 0j


def lemma_sym(n: int, positions: Sequence[int], t: Sequence[complex], q, dps: int = 40) -> IdentityReport:
    """Antisymmetrisation of t_i1...t_im prod_{a<b}(t_b - q^-2 t_a).

    The n! terms cancel down to a much smaller polynomial when |q| is small,
    so the enumeration runs in ``dps``-digit arithmetic.
    """
    if not 1 <= n <= 6:
        raise ValueError(f"n! enumeration limited to n <= 6, got {n}")
    pos = tuple(int(i) for i in positions)
    if list(pos) != sorted(set(pos)) or any(not 1 <= i <= n for i in pos):
        raise ValueError(f"positions must be increasing in 1..{n}, got {pos}")
    q = complex(q)
    t = [complex(x) for x in t]
    m = len(pos)
    with mpmath.workdps(dps):
        qm2 = mpmath.mpc(q) ** -2
        tm = [mpmath.mpc(x) for x in t]
        lhs = mpmath.mpc(0)
        for perm in itertools.permutations(range(n)):
            val = mpmath.mpc(perm_sign(perm))
            for i in pos:
                val *= tm[perm[i - 1]]
            for a, b in itertools.combinations(range(n), 2):
                val *= tm[perm[b]] - qm2 * tm[perm[a]]
            lhs += val
        lhs = complex(lhs)
    vdm = math.prod(t[b] - t[a] for a, b in itertools.combinations(range(n), 2))
    rhs = (q ** (-m * (n + 1) - n * (n - 1) // 2 + 2 * sum(pos)) * qfact(m, q) * qfact(n - m, q)
           * elementary_symmetric(m, t) * vdm)
    sample = {"n": n, "positions": list(pos), "q": _c(q), "t": [_c(x) for x in t]}
    return compare("lemma_sym", sample, lhs, rhs, notes=f"enumeration at {dps} digits")


def lemma_z_lhs(n: int, l: int, z, t: Sequence[complex], q) -> complex:
    q, z = complex(q), complex(z)
    t = [complex(x) for x in t]
    terms = []
    for s in range(n + 1):
        coef = (-1) ** s * q ** (-s * (n - 1)) * qbinom(n, s, q)
        for perm in itertools.permutations(range(n)):
            val = coef
            for i in range(n):
                val *= z - (q**l if i < s else q**-l) * t[perm[i]]
            for a, b in itertools.combinations(range(n), 2):
                val *= (t[perm[b]] - q**-2 * t[perm[a]]) / (t[perm[b]] - t[perm[a]])
            terms.append(val)
    return csum(terms)


def lemma_z_rhs(n: int, l: int, t: Sequence[complex], q) -> complex:
    q = complex(q)
    out = (-1) ** n * q ** (-l * n - n * (n - 1) // 2) * qfact(n, q)
    for i in range(n):
        out *= 1 - q ** (2 * (l - i))
    return out * math.prod(complex(x) for x in t)


def lemma_z(n: int, l: int, z, t: Sequence[complex], q) -> IdentityReport:
    """Lemma on the alternating s-sum of products (z - q^+-l t); RHS is z-free."""
    if not 1 <= n <= l <= 6:
        raise ValueError(f"need 1 <= n <= l <= 6, got n={n}, l={l}")
    t = [complex(x) for x in t]
    if len(t) != n:
        raise ValueError(f"expected {n} t-values, got {len(t)}")
    if len(set(t)) != n:
        raise ValueError("t-values must be distinct")
    sample = {"n": n, "l": l, "z": _c(z), "q": _c(q), "t": [_c(x) for x in t]}
    return compare("lemma_z", sample, lemma_z_lhs(n, l, z, t, q), lemma_z_rhs(n, l, t, q))


def lemma_z_zfree(n: int, l: int, z1, z2, t: Sequence[complex], q) -> IdentityReport:
    """The left side of the z-sum identity agrees at two values of z."""
    sample = {"n": n, "l": l, "z": [_c(z1), _c(z2)], "q": _c(q)}
    return compare("lemma_z_zfree", sample, lemma_z_lhs(n, l, z1, t, q), lemma_z_lhs(n, l, z2, t, q))


# ---------------------------------------------------------------- the integrand G-hat

def u_labels(idx: WeightIndex) -> list[tuple[int, int]]:
    """Pairs (i1, i2) in lexicographic order."""
    return [(i1, i2) for i1, ns in enumerate(idx.multiplicities, start=1) for i2 in range(1, ns + 1)]


def site_before(j: int, label: tuple[int, int], m: Sequence[int], idx: WeightIndex) -> bool:
    """j < (i1, i2): j < k(i1), or j = k(i1) and m_i1 < i2.  Otherwise j > (i1, i2)."""
    i1, i2 = label
    kk = idx.positions[i1 - 1]
    return j < kk or (j == kk and m[i1 - 1] < i2)


def _check_ff(idx: WeightIndex, params: ModelParams):
    if idx.mode != "ff":
        raise ValueError("oracles take an ff-mode index")
    if tuple(idx.spins) != tuple(params.spins):
        raise ValueError("index spins do not match params")


def _qp(params: ModelParams, e) -> complex:
    return complex(cpow(params.q, e))


def _ghat_prefactor(labels, mu, params):
    return math.prod(_qp(params, params.L * mu[p]) for p in range(len(labels)))


def _ghat_z_before(u, mup, j, params, z):
    # (z_j - q^(mu l_j - k - 2) u) / (z_j - q^(l_j - k - 2) u); identically one when mu = +1
    l = params.spins[j - 1]
    if l == 0 or mup == 1:
        return 1.0
    k = params.k
    return (z[j - 1] - _qp(params, mup * l - k - 2) * u) / (z[j - 1] - _qp(params, l - k - 2) * u)


def _ghat_z_after(u, mup, j, params, z):
    # q^(mu l_j) (u - q^(-mu l_j + k + 2) z_j) / (u - q^(l_j + k + 2) z_j); the ratio is one when mu = -1
    l = params.spins[j - 1]
    q, k = params.q, params.k
    if l == 0 or mup == -1:
        return q ** (mup * l)
    return q ** (mup * l) * (u - _qp(params, -mup * l + k + 2) * z[j - 1]) / (u - _qp(params, l + k + 2) * z[j - 1])


def _ghat_t(u, mup, eb, tb, params):
    # q^-mu (u - q^(-mu(k+1) - eps_b) t_b) / (u - q^(-mu(k+2)) t_b); the ratio is one when eps_b = mu
    q, k = params.q, params.k
    if eb == mup:
        return q ** (-mup)
    return q ** (-mup) * (u - _qp(params, -mup * (k + 1) - eb) * tb) / (u - _qp(params, -mup * (k + 2)) * tb)


def _ghat_uu(ui, uj, mui, muj, q):
    # (q^-mu_i u_i - q^-mu_j u_j) / (u_i - q^-2 u_j); equals q when (mu_i, mu_j) = (-1, +1)
    if (mui, muj) == (-1, 1):
        return q
    return (q ** (-mui) * ui - q ** (-muj) * uj) / (ui - q**-2 * uj)


def t_factor(eps: Sequence[int], t: Sequence[complex], q) -> complex:
    """prod_{a<b} (q^eps_b t_b - q^eps_a t_a) / (t_b - q^-2 t_a)."""
    q = complex(q)
    out = 1.0 + 0j
    for a, b in itertools.combinations(range(len(t)), 2):
        out *= (q ** eps[b] * t[b] - q ** eps[a] * t[a]) / (t[b] - q**-2 * t[a])
    return out


def ghat_integrand(eps: Sequence[int], mu: Sequence[int], m: Sequence[int], idx: WeightIndex,
                   t: Sequence[complex], z: Sequence[complex], u, params: ModelParams,
                   full: bool = False):
    """G-hat as a product of its five factor groups; ``full`` adds the t-factor (giving G).

    ``u`` has shape (N,) or (N, M).  Factors whose numerator equals their
    denominator identically are replaced by their constant value.
    """
    _check_ff(idx, params)
    labels = u_labels(idx)
    N = len(labels)
    if len(mu) != N or len(eps) != N or len(m) != idx.r:
        raise ValueError("mu, eps must have N entries and m must have r entries")
    q = params.q
    t = [complex(x) for x in t]
    z = [complex(x) for x in z]
    u = np.asarray(u, dtype=complex)
    val = np.full(u.shape[1:], _ghat_prefactor(labels, mu, params), dtype=complex)
    for p, lab in enumerate(labels):
        for j in range(1, params.n + 1):
            if site_before(j, lab, m, idx):
                val = val * _ghat_z_before(u[p], mu[p], j, params, z)
            else:
                val = val * _ghat_z_after(u[p], mu[p], j, params, z)
        for b in range(N):
            val = val * _ghat_t(u[p], mu[p], eps[b], t[b], params)
    for p, pp in itertools.combinations(range(N), 2):
        val = val * _ghat_uu(u[p], u[pp], mu[p], mu[pp], q)
    if full:
        val = val * t_factor(eps, t, q)
    return val if val.ndim else complex(val)


# ---------------------------------------------------------------- I-hat: direct u-integration

def u_pole_constraints(eps, mu, m, idx, t, z, params):
    """Pole moduli each u-circle must enclose or exclude, and the pair constraints.

    Returns (inside, outside, pairs) where inside/outside map a label number
    to a list of |pole| and pairs lists (p, p') with p < p' requiring
    |u_p| > |q|^-2 |u_p'|.
    """
    labels = u_labels(idx)
    q, k = params.q, params.k
    inside = {p: [] for p in range(len(labels))}
    outside = {p: [] for p in range(len(labels))}
    for p, lab in enumerate(labels):
        for j in range(1, params.n + 1):
            l = params.spins[j - 1]
            if l == 0:
                continue
            if site_before(j, lab, m, idx):
                if mu[p] == -1:
                    outside[p].append(abs(_qp(params, -l + k + 2) * z[j - 1]))
            elif mu[p] == 1:
                inside[p].append(abs(_qp(params, l + k + 2) * z[j - 1]))
        for b in range(len(labels)):
            if eps[b] != mu[p]:
                inside[p].append(abs(_qp(params, -mu[p] * (k + 2)) * t[b]))
    pairs = [(p, pp) for p, pp in itertools.combinations(range(len(labels)), 2)
             if (mu[p], mu[pp]) != (-1, 1)]
    return inside, outside, pairs


def u_radii(eps, mu, m, idx, t, z, params) -> tuple[np.ndarray, float]:
    """Log-radii maximising the smallest log-distance to every pole (a linear programme)."""
    inside, outside, pairs = u_pole_constraints(eps, mu, m, idx, t, z, params)
    P = len(inside)
    rows, rhs = [], []
    # variables (x_1..x_P, delta); minimise -delta
    for p in range(P):
        for c in inside[p]:
            row = np.zeros(P + 1)
            row[p], row[P] = -1, 1
            rows.append(row)
            rhs.append(-math.log(c))
        for c in outside[p]:
            row = np.zeros(P + 1)
            row[p], row[P] = 1, 1
            rows.append(row)
            rhs.append(math.log(c))
    lq = math.log(abs(params.q))
    for p, pp in pairs:
        row = np.zeros(P + 1)
        row[p], row[pp], row[P] = -1, 1, 1
        rows.append(row)
        rhs.append(2 * lq)
    cost = np.zeros(P + 1)
    cost[P] = -1
    bounds = [(-20, 20)] * P + [(None, 2.0)]
    res = linprog(cost, A_ub=np.array(rows) if rows else None, b_ub=np.array(rhs) if rows else None,
                  bounds=bounds, method="highs")
    if res.status != 0 or res.x[P] <= 0:
        margin = float(res.x[P]) if res.status == 0 else float("nan")
        raise Infeasible(f"no separating u-circles (log margin {margin:.3g})")
    return res.x[:P], float(res.x[P])


def lemma_i_integral(eps, mu, m, idx, t, z, params, max_points: int = 2**21):
    """Torus trapezoid rule for I-hat over circles chosen by :func:`u_radii`.

    Returns (value, Q, margin); the error decays like exp(-Q * margin).
    """
    x, margin = u_radii(eps, mu, m, idx, t, z, params)
    P = len(x)
    Q = 32
    while Q * margin < 45 and (2 * Q) ** P <= max_points:
        Q *= 2
    theta = 2 * np.pi * (np.arange(Q) + 0.5) / Q
    grids = np.meshgrid(*([theta] * P), indexing="ij")
    u = np.array([np.exp(x[p]) * np.exp(1j * g.reshape(-1)) for p, g in enumerate(grids)])
    vals = ghat_integrand(eps, mu, m, idx, t, z, u, params)
    return complex(np.mean(vals)), Q, margin


# ---------------------------------------------------------------- I-hat: closed form

def _lemma_i_prefactor(mu, m, idx, params):
    labels = u_labels(idx)
    q, L, N = params.q, params.L, len(labels)
    out = _qp(params, (L - N) * sum(mu))
    for p, lab in enumerate(labels):
        for j in range(1, params.n + 1):
            if not site_before(j, lab, m, idx):
                out *= q ** (mu[p] * params.spins[j - 1])
    for p, _ in itertools.combinations(range(N), 2):
        out *= q ** (-mu[p])
    return out


def _d_term(D, bs, m, idx, eps, t, z, params):
    """The b-dependent product for one assignment of t-labels to the D-elements."""
    q = params.q
    N = len(t)
    val = 1.0 + 0j
    for d, (lab, b) in enumerate(zip(D, bs)):
        i1, i2 = lab
        kk = idx.positions[i1 - 1]
        tb = t[b]
        val *= 1 - q ** (-1 - eps[b])
        for bb in range(N):
            if bb != b:
                val *= (tb - q ** (-1 - eps[bb]) * t[bb]) / (tb - t[bb])
        for b2 in bs[d + 1:]:
            val *= (tb - t[b2]) / (tb - q**-2 * t[b2])
        for j in range(1, kk):
            l = params.spins[j - 1]
            val *= (z[j - 1] - q**-l * tb) / (z[j - 1] - q**l * tb)
        if i2 > m[i1 - 1]:
            l = params.spins[kk - 1]
            val *= (z[kk - 1] - q**-l * tb) / (z[kk - 1] - q**l * tb)
    return val


def lemma_i_closed(eps, mu, m, idx, t, z, params) -> complex:
    """Closed form of I-hat: sum over splittings C + D of the minus-labels and b-assignments.

    The b-labels run over 1..N independently; coinciding labels drop out
    through the factor (t_b - t_b') of the D-pair product.
    """
    _check_ff(idx, params)
    labels = u_labels(idx)
    N = len(labels)
    q = params.q
    t = [complex(x) for x in t]
    z = [complex(x) for x in z]
    minus = [p for p in range(N) if mu[p] == -1]
    qeps = math.prod(q ** (-1 - e) for e in eps)
    terms = []
    for mask in itertools.product((False, True), repeat=len(minus)):
        D = [p for p, inD in zip(minus, mask) if inD]
        C = [p for p, inD in zip(minus, mask) if not inD]
        fac = qeps ** len(C) * q ** (2 * sum(1 for c in C for d in D if c < d))
        Dlab = [labels[p] for p in D]
        for bs in itertools.product(range(N), repeat=len(D)):
            terms.append(fac * _d_term(Dlab, bs, m, idx, eps, t, z, params))
    return _lemma_i_prefactor(mu, m, idx, params) * csum(terms)


def lemma_i_check(eps, mu, m, idx: WeightIndex, params: ModelParams, t, z) -> IdentityReport:
    """I-hat by numerical u-integration against the closed form."""
    if len(u_labels(idx)) > 3:
        raise ValueError("direct u-integration is limited to N <= 3")
    t = [complex(x) for x in t]
    z = [complex(x) for x in z]
    lhs, Q, margin = lemma_i_integral(eps, mu, m, idx, t, z, params)
    rhs = lemma_i_closed(eps, mu, m, idx, t, z, params)
    sample = {"nu": list(idx.nu), "spins": list(idx.spins), "eps": list(eps), "mu": list(mu),
              "m": list(m), "t": [_c(x) for x in t], "z": [_c(x) for x in z]}
    return compare("lemma_i", sample, lhs, rhs, notes=f"trapezoid Q={Q} per u, log margin {margin:.3f}")


# ---------------------------------------------------------------- J-hat

def minus_patterns(idx: WeightIndex, a: Sequence[int]):
    """All mu with exactly a_i minus signs in block i."""
    blocks = []
    for ns, ai in zip(idx.multiplicities, a):
        pats = []
        for minus in itertools.combinations(range(ns), ai):
            pats.append(tuple(-1 if i in minus else 1 for i in range(ns)))
        blocks.append(pats)
    for combo in itertools.product(*blocks):
        yield tuple(s for blk in combo for s in blk)


def m_weight(m: Sequence[int], idx: WeightIndex, q) -> complex:
    """(-1)^sum m prod q^(m_i l_k(i)) q^(-m_i(n_i - 1)) [n_i, m_i]."""
    out = complex((-1) ** sum(m))
    for mi, ns, kk in zip(m, idx.multiplicities, idx.positions):
        out *= q ** (mi * idx.spins[kk - 1]) * q ** (-mi * (ns - 1)) * qbinom(ns, mi, q)
    return out


def jhat_from_lemma_terms(a, eps, idx, t, z, params) -> list[complex]:
    """Terms of J-hat_(eps)(a) from its definition, each u-integral given by its closed form."""
    q = params.q
    terms = []
    for mu in minus_patterns(idx, a):
        sgn = math.prod(mu)
        for m in itertools.product(*(range(ns + 1) for ns in idx.multiplicities)):
            terms.append(sgn * m_weight(m, idx, q) * lemma_i_closed(eps, mu, m, idx, t, z, params))
    return terms


def jhat_from_lemma(a, eps, idx, t, z, params) -> complex:
    return csum(jhat_from_lemma_terms(a, eps, idx, t, z, params))


def _jhat_global(a, idx, params, variant="later"):
    q, L, N = params.q, params.L, idx.N
    ns, pos, spins = idx.multiplicities, idx.positions, idx.spins
    d = [n - 2 * ai for n, ai in zip(ns, a)]
    e1 = sum(sum(spins[pos[s]:]) * d[s] for s in range(idx.r))
    if variant == "later":
        e3 = -sum(d[s] * sum(ns[s + 1:]) for s in range(idx.r))
    else:
        e3 = -sum(ns[s] * sum(d[s + 1:]) for s in range(idx.r))
    return (-1) ** sum(a) * q**e1 * _qp(params, (L - N) * sum(d)) * q**e3


def _jhat_s_coefficient(n, a, s, l, q) -> complex:
    head = (-1) ** s * q ** (a * (n - s - 1) + s) * q ** (-n * (n - 1) // 2) * qfact(n, q) / (
        qfact(s, q) * qfact(a - s, q))
    tail = csum((-1) ** i * q ** (i * (2 * l - n - a + 1)) / (qfact(i, q) * qfact(n - a - i, q))
                for i in range(n - a + 1))
    return head * tail


def _jhat_block(i1, a, bs, eps, idx, t, z, params) -> complex:
    q = params.q
    N = len(t)
    kk = idx.positions[i1 - 1]
    n = idx.multiplicities[i1 - 1]
    lk = idx.spins[kk - 1]
    core = 1.0 + 0j
    for i2, b in enumerate(bs):
        tb = t[b]
        core *= 1 - q ** (-1 - eps[b])
        for bb in range(N):
            if bb != b:
                core *= (tb - q ** (-1 - eps[bb]) * t[bb]) / (tb - t[bb])
        for b2 in bs[i2 + 1:]:
            core *= (tb - t[b2]) / (tb - q**-2 * t[b2])
        for j in range(1, kk):
            l = idx.spins[j - 1]
            core *= (z[j - 1] - q**-l * tb) / (z[j - 1] - q**l * tb)
    zk = [(z[kk - 1] - q**-lk * t[b]) / (z[kk - 1] - q**lk * t[b]) for b in bs]
    return csum(_jhat_s_coefficient(n, a, s, lk, q) * core * math.prod(zk[s:]) for s in range(a + 1))


def jhat_closed(a, eps, idx, t, z, params, variant="later") -> complex:
    """Closed form of J-hat_(eps)(a).

    ``variant="later"`` uses the mixed-pair factor over (i1, i2) < (j1, j2)
    with i1 < j1 and the exponent -sum_s (n_s - 2 a_s) sum_{t>s} n_t;
    ``variant="first"`` swaps in the exponent -sum_s n_s sum_{t>s} (n_t - 2 a_t).
    """
    _check_ff(idx, params)
    q = params.q
    t = [complex(x) for x in t]
    z = [complex(x) for x in z]
    N = len(t)
    slots = [(i1, i2) for i1, ai in enumerate(a, start=1) for i2 in range(ai)]
    terms = []
    for flat in itertools.product(range(N), repeat=len(slots)):
        mixed = 1.0 + 0j
        for (s1, b1), (s2, b2) in itertools.combinations(zip(slots, flat), 2):
            if s1[0] < s2[0]:
                mixed *= (t[b1] - t[b2]) / (t[b1] - q**-2 * t[b2])
        if mixed == 0:
            continue
        val = mixed
        for i1, ai in enumerate(a, start=1):
            bs = [b for s, b in zip(slots, flat) if s[0] == i1]
            val *= _jhat_block(i1, ai, bs, eps, idx, t, z, params)
        terms.append(val)
    return _jhat_global(a, idx, params, variant) * csum(terms)


def _guard(idx: WeightIndex, limit: int = 4):
    if idx.N > limit:
        raise ValueError(f"enumeration guard: N = {idx.N} > {limit}")


def jhat_prop_check(a, idx, eps, params, t, z, variant="later") -> IdentityReport:
    """Closed form of J-hat against its definition with closed-form u-integrals."""
    _guard(idx)
    if len(a) != idx.r or any(not 0 <= ai <= ns for ai, ns in zip(a, idx.multiplicities)):
        raise ValueError(f"need 0 <= a_i <= n_i, got a={a}")
    lhs = jhat_closed(a, eps, idx, t, z, params, variant)
    terms = jhat_from_lemma_terms(a, eps, idx, t, z, params)
    rhs = csum(terms)
    sample = {"nu": list(idx.nu), "spins": list(idx.spins), "a": list(a), "eps": list(eps),
              "t": [_c(x) for x in t], "z": [_c(x) for x in z]}
    return compare("jhat_prop", sample, lhs, rhs, notes=f"variant={variant}",
                   scale=max(abs(x) for x in terms))


# ---------------------------------------------------------------- the eps-sum identity

def eps_sum_lhs_terms(bs: Sequence[int], N: int, q, t):
    q = complex(q)
    for eps in itertools.product((1, -1), repeat=N):
        val = complex(math.prod(eps))
        for a, b in itertools.combinations(range(N), 2):
            val *= q ** eps[b] * t[b] - q ** eps[a] * t[a]
        for bp in bs:
            val *= 1 - q ** (-1 - eps[bp])
            for b in range(N):
                if b != bp:
                    val *= t[bp] - q ** (-1 - eps[b]) * t[b]
        yield val


def eps_sum_rhs(bs: Sequence[int], N: int, q, t) -> complex:
    if len(bs) < N:
        return 0j
    q = complex(q)
    out = (1 - q**-2) ** N * q ** (N * (N - 1) // 2)
    for a, b in itertools.combinations(range(N), 2):
        out *= t[b] - t[a]
    for bp in bs:
        for b in range(N):
            if b != bp:
                out *= t[bp] - q**-2 * t[b]
    return out


def eps_sum_identity(bs: Sequence[int], N: int, q, t) -> IdentityReport:
    """The signed eps-sum; ``bs`` lists the distinct 0-based labels b of all pairs.

    The product of Kronecker deltas is one exactly when every block is full,
    that is when len(bs) = N.
    """
    if not 1 <= N <= 5:
        raise ValueError(f"2^N enumeration limited to N <= 5, got {N}")
    bs = tuple(int(b) for b in bs)
    if len(set(bs)) != len(bs):
        raise ValueError(f"repeated b labels {bs}")
    if any(not 0 <= b < N for b in bs):
        raise ValueError(f"b labels must lie in 0..{N - 1}")
    t = [complex(x) for x in t]
    terms = list(eps_sum_lhs_terms(bs, N, q, t))
    lhs = csum(terms)
    sample = {"b": list(bs), "N": N, "q": _c(q), "t": [_c(x) for x in t]}
    if len(bs) < N:
        return vanishing("eps_sum", sample, lhs, max(abs(x) for x in terms))
    return compare("eps_sum", sample, lhs, eps_sum_rhs(bs, N, q, t))


# ---------------------------------------------------------------- J_(a) and the main proposition

def j_terms(a, idx, t, z, params, variant="later"):
    """The eps-terms of J_(a)."""
    q = params.q
    t = [complex(x) for x in t]
    for eps in itertools.product((1, -1), repeat=idx.N):
        yield math.prod(eps) * t_factor(eps, t, q) * jhat_closed(a, eps, idx, t, z, params, variant)


def j_value(a, idx, t, z, params, variant="later") -> complex:
    return csum(j_terms(a, idx, t, z, params, variant))


def a_eq_n_rhs(idx, t, z, params) -> complex:
    """The u-integral prefactor times the full-block partition sum, before the z-sum identity is applied."""
    q, N = params.q, idx.N
    t = [complex(x) for x in t]
    z = [complex(x) for x in z]
    ns, pos = idx.multiplicities, idx.positions
    vdm = math.prod((t[b] - t[a]) / (t[b] - q**-2 * t[a]) for a, b in itertools.combinations(range(N), 2))
    terms = []
    for part in enumerate_partitions(ns, N):
        for orders in itertools.product(*(itertools.permutations(blk) for blk in part.blocks)):
            bl = [[b - 1 for b in o] for o in orders]
            val = 1.0 + 0j
            for i1, j1 in itertools.combinations(range(len(bl)), 2):
                for bj in bl[i1]:
                    for bi in bl[j1]:
                        val *= (t[bi] - q**-2 * t[bj]) / (t[bi] - t[bj])
            for s, bs in enumerate(bl):
                kk, n = pos[s], ns[s]
                lk = params.spins[kk - 1]
                inner = []
                for ss in range(n + 1):
                    x = (-1) ** ss * q ** (-(n - 1) * ss) * qbinom(n, ss, q)
                    for i2, b in enumerate(bs):
                        x *= z[kk - 1] - (q**lk if i2 < ss else q**-lk) * t[b]
                    inner.append(x)
                val *= csum(inner)
                for i2, j2 in itertools.combinations(range(n), 2):
                    val *= (t[bs[j2]] - q**-2 * t[bs[i2]]) / (t[bs[j2]] - t[bs[i2]])
                for b in bs:
                    val *= 1 / (z[kk - 1] - q**lk * t[b])
                    for j in range(1, kk):
                        l = params.spins[j - 1]
                        val *= (z[j - 1] - q**-l * t[b]) / (z[j - 1] - q**l * t[b])
            terms.append(val)
    return c1_constant(idx, params) * vdm * csum(terms)


def c1_constant(idx, params) -> complex:
    q, L, N = params.q, params.L, idx.N
    ns, pos, spins = idx.multiplicities, idx.positions, idx.spins
    out = (-1) ** N * (1 - q**-2) ** N * _qp(params, N * N - L * N) * q ** (N * (N - 1) // 2)
    out *= q ** sum(n * (n - 1) // 2 for n in ns)
    out *= q ** (-sum(sum(spins[pos[s]:]) * ns[s] for s in range(idx.r)))
    out *= q ** sum(sum(ns[s + 1:]) * ns[s] for s in range(idx.r))
    return out


def conversion_factor(idx: WeightIndex) -> tuple[int, int]:
    """(sign, q-exponent) with full-block partition sum = sign q^e w_(-nu).

    Built from :data:`CONVERSION`: every variable in block s picks up the site
    entry with l = l_k(s) and one crossing entry for each site j < k(s).
    """
    sign, expo = 1, 0
    for kk, n in zip(idx.positions, idx.multiplicities):
        sg, pw = CONVERSION["site"]
        sign *= sg**n
        expo += pw * idx.spins[kk - 1] * n
        for j in range(1, kk):
            sg, pw = CONVERSION["crossing"]
            sign *= sg**n
            expo += pw * idx.spins[j - 1] * n
    return sign, expo


def derived_constant(idx, params) -> complex:
    """The u-integral prefactor times the z-sum factors times the conversion of the full-block form to w."""
    q = params.q
    out = c1_constant(idx, params)
    for kk, n in zip(idx.positions, idx.multiplicities):
        out *= lemma_z_rhs(n, idx.spins[kk - 1], [1.0] * n, q)
    sign, expo = conversion_factor(idx)
    return out * sign * q**expo


def printed_constant(idx, params) -> complex:
    """The constant multiplying w_(-nu) in the statement of the main proposition."""
    q, L, N = params.q, params.L, idx.N
    ns, pos, spins = idx.multiplicities, idx.positions, idx.spins
    out = (-1) ** N * (1 - q**-2) ** N * _qp(params, N * (N - L) + N * (N - 1) / 2 - sum(spins) * N)
    for s in range(idx.r):
        lk = spins[pos[s] - 1]
        out *= q ** (sum(ns[s + 1:]) * ns[s] - lk * ns[s]) * qfact(ns[s], q)
        for i in range(ns[s]):
            out *= 1 - q ** (2 * (lk - i))
    return out


def a_eq_n_check(idx, params, t, z) -> IdentityReport:
    """J_(n) from the J-hat closed forms against the full-block product form."""
    _guard(idx, 3)
    sample = {"nu": list(idx.nu), "spins": list(idx.spins), "t": [_c(x) for x in t], "z": [_c(x) for x in z]}
    return compare("a_eq_n", sample, j_value(idx.multiplicities, idx, t, z, params), a_eq_n_rhs(idx, t, z, params))


def mainprop_check(idx: WeightIndex, params: ModelParams, samples: Sequence[tuple]) -> list[IdentityReport]:
    """Vanishing of J_(a) for (a) != (n) and J_(n) = const * w_(-nu).

    ``samples`` is a list of (t, z) pairs, at least three.  Reports: one
    vanishing report per (a) != (n) at the first sample, the ratio
    J_(n)/w_(-nu) across samples, and the measured ratio against the
    published constant (with the independently derived constant in ``extra``).
    """
    _check_ff(idx, params)
    _guard(idx, 3)
    if len(samples) < 3:
        raise ValueError("need at least three (t, z) samples")
    q = params.q
    reports = []
    base = {"nu": list(idx.nu), "spins": list(idx.spins), "q": _c(q)}
    t0, z0 = samples[0]
    for a in itertools.product(*(range(n + 1) for n in idx.multiplicities)):
        if tuple(a) == tuple(idx.multiplicities):
            continue
        terms = list(j_terms(a, idx, t0, z0, params))
        reports.append(vanishing("mainprop_vanish", {**base, "a": list(a)}, csum(terms),
                                 max(abs(x) for x in terms)))
    ratios = []
    for t, z in samples:
        w = weight_w(idx.dual(), t, z, q)
        ratios.append(j_value(idx.multiplicities, idx, t, z, params) / w)
    spread = max(abs(r - ratios[0]) for r in ratios) / (abs(ratios[0]) + EPS)
    reports.append(IdentityReport("mainprop_ratio", {**base, "samples": len(samples)}, ratios[0], ratios[-1],
                                  float(spread), bool(spread < TOLERANCES["mainprop_ratio"]),
                                  TOLERANCES["mainprop_ratio"], "max relative spread of J_(n)/w over samples"))
    printed = printed_constant(idx, params)
    derived = derived_constant(idx, params)
    reports.append(compare("mainprop_const", base, ratios[0], printed,
                           notes="measured J_(n)/w_(-nu) against the printed constant",
                           derived=_c(derived), measured_over_printed=_c(ratios[0] / printed)))
    return reports


# ---------------------------------------------------------------- free-field form of F

def f_prefactor(idx: WeightIndex, t, z, params: ModelParams, trunc=None) -> complex:
    """f^(nu)(t, z): powers of q^k z_i and of q^-2 t_a, with the xi pair factors."""
    from .qspecial import xi

    q, k, L, N = params.q, params.k, params.L, idx.N
    spins = params.spins
    qk = _qp(params, k)
    kk2 = k + 2
    out = 1.0 + 0j
    for i, j in itertools.combinations(range(params.n), 2):
        out *= complex(cpow(qk * z[i], spins[i] * spins[j] / (2 * kk2)))
        out *= xi(complex(z[i]) / complex(z[j]), spins[i], spins[j], q, params.p, trunc)
    for i in range(params.n):
        out *= complex(cpow(qk * z[i], -N * spins[i] / kk2))
        out *= complex(cpow(qk * z[i], L * spins[i] / (2 * kk2)))
    for a in range(N):
        out *= complex(cpow(q**-2 * t[a], -L / kk2))
    for b in range(N):
        for _ in range(b):
            out *= complex(cpow(q**-2 * t[b], 2 / kk2))
    return out


def free_field_F(idx: WeightIndex, t, z, params: ModelParams, trunc=None) -> complex:
    """F^(nu) assembled from f, Phi and the sum over (a) of J_(a).

    Only (a) = (n) enters: the other J_(a) are zero (checked on their own by
    :func:`mainprop_check`), and in floating point they are cancellations of
    terms that can exceed J_(n) by many orders, whose rounding would swamp it.
    """
    from .weight import phase_phi

    q, N = params.q, idx.N
    t = [complex(x) for x in t]
    z = [complex(x) for x in z]
    jsum = j_value(idx.multiplicities, idx, t, z, params)
    out = (-1) ** N * (q - 1 / q) ** (-2 * N) * jsum
    for n in idx.multiplicities:
        out /= qfact(n, q)
    for x in t:
        out /= x
    return out * f_prefactor(idx, t, z, params, trunc) * phase_phi(t, z, params, trunc)


def theorem_f_check(idx: WeightIndex, params: ModelParams, t, z) -> IdentityReport:
    """The closed form of F (with its A-factor) against the free-field assembly."""
    from .weight import theorem_F

    _check_ff(idx, params)
    _guard(idx, 3)
    lhs = theorem_F(idx, t, z, params)
    rhs = free_field_F(idx, t, z, params)
    sample = {"nu": list(idx.nu), "spins": list(idx.spins), "t": [_c(x) for x in t], "z": [_c(x) for x in z]}
    return compare("theorem_f", sample, lhs, rhs, notes="theorem_F against f Phi J_(n)",
                   ratio=_c(lhs / rhs) if rhs else None)


# ---------------------------------------------------------------- the default suite

#: Indices (spins, nu) in ff mode used by the integral-free checks; N <= 3, r <= 2.
SUITE_INDICES = (
    ((1, 1), (0, 1)), ((1, 1), (1, 0)), ((2,), (1,)), ((2,), (0,)), ((1, 1), (0, 0)),
    ((2, 1), (1, 0)), ((1, 2), (0, 2)), ((3,), (0,)), ((2, 1), (0, 0)), ((1, 1, 1), (0, 1, 1)),
)

#: Indices for the direct u-integration of I-hat: r = 1, n_1 = 1 first, then N = 2.
LEMMA_I_INDICES = (
    ((1, 1), (0, 1)), ((1, 1), (1, 0)), ((2,), (1,)), ((1, 2, 1), (1, 1, 1)),
    ((2,), (0,)), ((1, 1), (0, 0)),
)


def random_q(rng, lo=0.2, hi=0.9, real=False) -> complex:
    mod = rng.uniform(lo, hi)
    return complex(mod) if real else complex(mod * np.exp(1j * rng.uniform(-np.pi, np.pi)))


def random_points(rng, n, lo, hi, spread=np.pi) -> list[complex]:
    return [complex(rng.uniform(lo, hi) * np.exp(1j * rng.uniform(-spread, spread))) for _ in range(n)]


def _model(rng, spins, N, real=False) -> ModelParams:
    from .params import derive

    return derive(random_q(rng, 0.3, 0.8, real), rng.uniform(0.5, 2.0), rng.uniform(-1, 1), spins, N)


def lemma_i_labels(idx: WeightIndex):
    N = idx.N
    for eps in itertools.product((1, -1), repeat=N):
        for mu in itertools.product((1, -1), repeat=N):
            for m in itertools.product(*(range(n + 1) for n in idx.multiplicities)):
                yield eps, mu, m


def lemma_i_sample(rng, idx: WeightIndex, min_margin: float = 0.1, tries: int = 50):
    """Draw (params, t, z) until every u-contour of the index has log margin >= min_margin."""
    N = idx.N
    for _ in range(tries):
        params = _model(rng, idx.spins, N)
        t = random_points(rng, N, 0.3, 0.8)
        z = random_points(rng, len(idx.spins), 0.9, 1.3)
        try:
            if all(u_radii(eps, mu, m, idx, t, z, params)[1] >= min_margin
                   for eps, mu, m in lemma_i_labels(idx)):
                return params, t, z
        except Infeasible:
            continue
    raise Infeasible(f"no sample with u-contour margin >= {min_margin} in {tries} draws")


def suite_jobs(rng, samples: int = 3, q_samples: int = 30) -> list[tuple]:
    """The full list of checks as (function, args) pairs; all random draws happen here.

    Drawing every sample up front keeps the reports identical whether the
    jobs later run serially or in parallel.
    """
    jobs = []
    qs = [random_q(rng) for _ in range(q_samples)]
    for q in qs:
        for n in range(1, 7):
            for m in range(n + 1):
                jobs.append((lemma_combi_i, (n, m, q)))
                jobs.append((lemma_combi_ii, (n, m, q)))
    for _ in range(samples):
        q = random_q(rng)
        for n in range(1, 6):
            t = random_points(rng, n, 0.5, 1.5)
            for size in range(n + 1):
                for pos in itertools.combinations(range(1, n + 1), size):
                    jobs.append((lemma_sym, (n, pos, t, q)))
    for _ in range(samples):
        q = random_q(rng)
        for l in range(1, 6):
            for n in range(1, l + 1):
                t = random_points(rng, n, 0.5, 1.5)
                z1, z2 = random_points(rng, 2, 0.5, 1.5)
                jobs.append((lemma_z, (n, l, z1, t, q)))
                jobs.append((lemma_z_zfree, (n, l, z1, z2, t, q)))
    for _ in range(samples):
        q = random_q(rng)
        for N in range(1, 5):
            t = random_points(rng, N, 0.5, 1.5)
            for alpha in range(N + 1):
                for bs in itertools.combinations(range(N), alpha):
                    jobs.append((eps_sum_identity, (bs, N, q, t)))
    for spins, nu in LEMMA_I_INDICES:
        idx = WeightIndex(nu, spins, "ff")
        for _ in range(samples):
            params, t, z = lemma_i_sample(rng, idx)
            for eps, mu, m in lemma_i_labels(idx):
                jobs.append((lemma_i_check, (eps, mu, m, idx, params, t, z)))
    for spins, nu in SUITE_INDICES:
        idx = WeightIndex(nu, spins, "ff")
        N = idx.N
        for _ in range(samples):
            params = _model(rng, spins, N)
            draws = [(random_points(rng, N, 0.5, 1.5), random_points(rng, len(spins), 0.5, 1.5))
                     for _ in range(3)]
            t, z = draws[0]
            for a in itertools.product(*(range(n + 1) for n in idx.multiplicities)):
                for eps in itertools.product((1, -1), repeat=N):
                    jobs.append((jhat_prop_check, (a, idx, eps, params, t, z)))
            jobs.append((a_eq_n_check, (idx, params, t, z)))
            jobs.append((mainprop_check, (idx, params, draws)))
        for _ in range(samples):
            # real q and arguments away from the cut keep the principal-branch powers consistent
            params = _model(rng, spins, N, real=True)
            t = random_points(rng, N, 0.2, 0.6, 0.8)
            z = random_points(rng, len(spins), 0.8, 1.2, 0.3)
            jobs.append((theorem_f_check, (idx, params, t, z)))
    return jobs


def run_job(job) -> list[IdentityReport]:
    fn, args = job
    out = fn(*args)
    return out if isinstance(out, list) else [out]
