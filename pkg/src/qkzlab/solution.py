"""Elements W of the elliptic space, the vector Psi_W and the qKZ residual.

The integrand of a component is Phi * w * W.  Phi and the theta-function
denominators of W cancel against each other up to

    z-part (x = t_a / z_j):    1 / ((q^-l x; p) (p q^-l / x; p) (p; p))
    t-part (x = t_a / t_b):    (x; p) (p / x; p) / ((q^2 x; p) (p q^2 / x; p))

so the integrand is evaluated in this fused form: it has no 0 * inf
cancellations and every pole is a single visible factor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contour import (
    COLLISION_TOL,
    ContourSpec,
    PoleFamily,
    QuadratureGrid,
    integrate,
    plan_contour,
    tt_pole_families,
    z_pole_families,
)
from .params import ModelParams, ParameterDomainError, TruncationPolicy, cpow
from .qspecial import qbinom, qpoch, rho, theta
from .representation import TensorVector, TwoSiteOperator, apply_one_site, apply_two_site
from .rmatrix import r_hat, solve_R
from .weight import WeightIndex, solution_prefactor, weight_w

Numerator = Callable[[np.ndarray, Sequence[complex]], np.ndarray]


@dataclass(frozen=True)
class EllipticW:
    """W = numerator(t, z) / prod theta(q^l_j t_a / z_j) * prod_{a<b} theta(t_a/t_b) / theta(q^-2 t_a/t_b).

    ``numerator`` is the holomorphic part Y(z) Theta(t, z); it takes ``t`` of
    shape (N, M) and returns shape (M,).  The declared shift ratios are the
    values T_a^t W / W and T_j^z W / W required of an element of the space.
    """

    params: ModelParams
    numerator: Numerator
    t_ratios: tuple[complex, ...]
    z_ratios: tuple[complex, ...]
    trunc: TruncationPolicy | None = None

    def __call__(self, t, z) -> complex:
        t = np.asarray(t, dtype=complex).reshape(self.params.N, -1)
        prm = self.params
        val = self.numerator(t, z)
        for a in range(prm.N):
            for l, zj in zip(prm.spins, z):
                val = val / theta(prm.q**l * t[a] / complex(zj), prm.p, self.trunc)
            for b in range(a + 1, prm.N):
                x = t[a] / t[b]
                val = val * theta(x, prm.p, self.trunc) / theta(prm.q**-2 * x, prm.p, self.trunc)
        return complex(val[0]) if val.shape == (1,) else val

    def scaled(self, c) -> "EllipticW":
        num = self.numerator
        return EllipticW(self.params, lambda t, z: c * num(t, z), self.t_ratios, self.z_ratios, self.trunc)

    def __add__(self, other: "EllipticW") -> "EllipticW":
        if not (np.allclose(self.t_ratios, other.t_ratios) and np.allclose(self.z_ratios, other.z_ratios)):
            raise ValueError("cannot add elements with different shift ratios")
        f, g = self.numerator, other.numerator
        return EllipticW(self.params, lambda t, z: f(t, z) + g(t, z), self.t_ratios, self.z_ratios,
                         self.trunc)

    def measured_t_ratio(self, a: int, t, z) -> complex:
        t = np.asarray(t, dtype=complex)
        ts = t.copy()
        ts[a - 1] *= self.params.p
        return self(ts, z) / self(t, z)

    def measured_z_ratio(self, j: int, t, z) -> complex:
        zs = [complex(x) for x in z]
        zs[j - 1] *= self.params.p
        return self(t, zs) / self(t, z)


def declared_ratios(params: ModelParams) -> tuple[tuple[complex, ...], tuple[complex, ...]]:
    q, N = params.q, params.N
    lsum = sum(params.spins)
    t_r = tuple(params.kappa * q ** (-2 * N + 4 * a - 2 + lsum) for a in range(1, N + 1))
    z_r = tuple(q ** (-l * N) for l in params.spins)
    return t_r, z_r


def build_W(params: ModelParams, trunc: TruncationPolicy | None = None, branch: int = 0) -> EllipticW:
    """The element with Theta = prod_{a,j} theta(c t_a / z_j) and Y = prod_j z_j^gamma.

    c is an n-th root of 1/kappa (``branch`` picks which one) and
    p^gamma = c^-N, which makes both declared shift ratios hold exactly.
    """
    kappa = complex(params.kappa)
    if kappa == 0:
        raise ParameterDomainError("kappa = 0")
    n, N, p = params.n, params.N, params.p
    logc = -(np.log(kappa) + 2j * np.pi * branch) / n
    c = complex(np.exp(logc))
    gamma = -N * logc / np.log(p)

    def numerator(t: np.ndarray, z: Sequence[complex]) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        out = np.ones(t.shape[1:], dtype=complex)
        for zj in z:
            out = out * complex(cpow(complex(zj), gamma))
            for a in range(N):
                out = out * theta(c * t[a] / complex(zj), p, trunc)
        return out

    t_r, z_r = declared_ratios(params)
    return EllipticW(params, numerator, t_r, z_r, trunc)


@dataclass
class TVIntegrand:
    """Phi * w_(nu) * W for one component, in the fused pole-explicit form."""

    params: ModelParams
    z: tuple[complex, ...]
    idx: WeightIndex
    W: EllipticW
    trunc: TruncationPolicy | None = None
    nvars: int = field(init=False)

    def __post_init__(self):
        self.z = tuple(complex(x) for x in self.z)
        self.nvars = self.idx.N
        if self.nvars != self.params.N:
            raise ValueError(f"weight index has N = {self.nvars}, params N = {self.params.N}")

    def __call__(self, t: np.ndarray, removed: tuple = ()) -> np.ndarray:
        prm, tr = self.params, self.trunc
        q, p = prm.q, prm.p
        T = np.asarray(t, dtype=complex).T
        rem = set(removed)
        val = self.W.numerator(T, self.z)
        pp = qpoch(p, p, tr)
        cancel = []
        for a in range(1, prm.N + 1):
            ta = T[a - 1]
            for j, (l, zj) in enumerate(zip(prm.spins, self.z), start=1):
                x = ta / zj
                out_skip = tuple(f[3] for f in rem if f[:3] == ("zout", a, j))
                if 0 not in out_skip and np.all(np.abs(1 - q ** (-l) * x) < COLLISION_TOL):
                    # a pinned point sits on the s = 0 outside pole; w carries the
                    # matching zero (q^-l t_a - z_j), so cancel the pair exactly
                    out_skip += (0,)
                    cancel.append(("z", a, j))
                    val = val * -zj
                in_skip = tuple(f[3] - 1 for f in rem if f[:3] == ("zin", a, j))
                den = (qpoch(q ** (-l) * x, p, tr, skip=out_skip)
                       * qpoch(p * q ** (-l) / x, p, tr, skip=in_skip) * pp)
                val = val / den
            for b in range(a + 1, prm.N + 1):
                x = ta / T[b - 1]
                out_skip = tuple(f[3] for f in rem if f[:3] == ("ttout", a, b))
                in_skip = tuple(f[3] - 1 for f in rem if f[:3] == ("ttin", a, b))
                num = qpoch(x, p, tr) * qpoch(p / x, p, tr)
                den = qpoch(q**2 * x, p, tr, skip=out_skip) * qpoch(p * q**2 / x, p, tr, skip=in_skip)
                val = val * num / den
        drop = frozenset(
            [("z", f[1], f[2]) for f in rem if f[0] == "zlin"]
            + [("t", f[1], f[2]) for f in rem if f[0] == "ttlin"]
        )
        return val * weight_w(self.idx, T, self.z, q, drop, frozenset(cancel))

    def catalogue(self, a: int, fixed: dict) -> list[PoleFamily]:
        return z_pole_families(self.params, self.z, a) + tt_pole_families(self.params, a, fixed)


def component_indices(spins: Sequence[int], N: int):
    """Multi-indices (eps) with sum(l - eps) = N, in lexicographic order."""
    for eps in itertools.product(*(range(l + 1) for l in spins)):
        if sum(l - e for l, e in zip(spins, eps)) == N:
            yield eps


def psi(params: ModelParams, z: Sequence[complex], W: EllipticW, grid: QuadratureGrid | None = None,
        trunc: TruncationPolicy | None = None, policy: str = "geometric-mean",
        spec: ContourSpec | None = None) -> TensorVector:
    """Psi_W(z): component (eps) is prefactor * I(w_(-eps), W)."""
    grid = grid or QuadratureGrid()
    z = tuple(complex(x) for x in z)
    spec = spec or plan_contour(params, z, params.N, policy)
    pref = solution_prefactor(z, params, trunc)
    out = TensorVector(params.spins)
    for eps in component_indices(params.spins, params.N):
        idx = WeightIndex(tuple(l - e for l, e in zip(params.spins, eps)), params.spins, "tv")
        f = TVIntegrand(params, z, idx, W, trunc)
        out[eps] = pref * integrate(f, spec, grid)
    return out


@dataclass(frozen=True)
class CompositeOperator:
    """Ordered product of site operators; ``factors[0]`` is applied first."""

    factors: tuple

    def apply(self, v: TensorVector) -> TensorVector:
        for op in self.factors:
            if isinstance(op, TwoSiteOperator):
                v = apply_two_site(op, v)
            else:
                leg, mat = op
                v = apply_one_site(mat, leg, v)
        return v

    def __call__(self, v: TensorVector) -> TensorVector:
        return self.apply(v)


def kappa_h(params: ModelParams, j: int) -> np.ndarray:
    """kappa^{h_j / 2} on V^(l_j): v_m -> kappa^{(l_j - 2m)/2} v_m."""
    l = params.spins[j - 1]
    return np.diag([complex(cpow(params.kappa, (l - 2 * m) / 2)) for m in range(l + 1)])


QKZ_CONVENTIONS = ("consistent", "printed")


def basis_gauge(l1: int, l2: int, q) -> np.ndarray:
    """diag([l1, m1]_q [l2, m2]_q): integral coefficients to coefficients in the v_m basis."""
    g = [complex(qbinom(l1, m1, q) * qbinom(l2, m2, q)) for m1 in range(l1 + 1) for m2 in range(l2 + 1)]
    return np.diag(g)


def intertwiner(l1: int, l2: int, y, q, trunc: TruncationPolicy | None = None) -> np.ndarray:
    """rho(y) R(y) written in the coordinates of the integral components."""
    G = basis_gauge(l1, l2, q)
    R = solve_R(l1, l2, y, q).matrix
    return complex(rho(y, l1, l2, q, trunc)) * (np.linalg.inv(G) @ R @ G)


def qkz_rhs_operator(j: int, z: Sequence[complex], params: ModelParams,
                     trunc: TruncationPolicy | None = None,
                     convention: str = "consistent") -> CompositeOperator:
    """K_j(z) = R_{j,j-1}(p z_j/z_{j-1}) ... R_{j,1}(p z_j/z_1) kappa^{h_j/2} R_{j,n}(z_j/z_n) ... R_{j,j+1}(z_j/z_{j+1}).

    ``convention="printed"`` uses r_hat for every factor, exactly in the
    displayed order.  ``convention="consistent"`` is the operator that the
    integrals actually satisfy: right factors are rho R (no flip
    conjugation) in the divided-power coordinates of the components, and a
    left factor is fixed by unitarity,

        R_{j,i}(y) = q^(l_i l_j) [R_{i,j}(1/y)]^-1   on legs (i, j), i < j.
    """
    n = params.n
    if not 1 <= j <= n:
        raise ValueError(f"site {j} outside 1..{n}")
    if convention not in QKZ_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {QKZ_CONVENTIONS}")
    z = [complex(x) for x in z]
    q, p, spins = params.q, params.p, params.spins
    lj = spins[j - 1]
    factors = []
    for i in range(j + 1, n + 1):
        # rightmost factor R_{j,j+1} acts first
        y = z[j - 1] / z[i - 1]
        if convention == "printed":
            mat = r_hat(lj, spins[i - 1], y, q, trunc).matrix
        else:
            mat = intertwiner(lj, spins[i - 1], y, q, trunc)
        factors.append(TwoSiteOperator((j, i), mat))
    factors.append((j, kappa_h(params, j)))
    for i in range(1, j):
        y = p * z[j - 1] / z[i - 1]
        li = spins[i - 1]
        if convention == "printed":
            factors.append(TwoSiteOperator((j, i), r_hat(lj, li, y, q, trunc).matrix))
        else:
            mat = complex(q) ** (li * lj) * np.linalg.inv(intertwiner(li, lj, 1 / y, q, trunc))
            factors.append(TwoSiteOperator((i, j), mat))
    return CompositeOperator(tuple(factors))


def shifted(z: Sequence[complex], j: int, p) -> tuple[complex, ...]:
    zs = [complex(x) for x in z]
    zs[j - 1] *= p
    return tuple(zs)


@dataclass(frozen=True)
class ResidualReport:
    j: int
    residual: float
    lhs: TensorVector
    rhs: TensorVector
    radii: tuple
    shifted_radii: tuple


def qkz_check(j: int, params: ModelParams, z: Sequence[complex], W: EllipticW,
              grid: QuadratureGrid | None = None, trunc: TruncationPolicy | None = None,
              policy: str = "geometric-mean", convention: str = "consistent") -> ResidualReport:
    z = tuple(complex(x) for x in z)
    zs = shifted(z, j, params.p)
    spec = plan_contour(params, z, params.N, policy)
    spec_s = plan_contour(params, zs, params.N, "geometric-mean" if policy.startswith("manual") else policy)
    base = psi(params, z, W, grid, trunc, spec=spec)
    lhs = psi(params, zs, W, grid, trunc, spec=spec_s)
    rhs = qkz_rhs_operator(j, z, params, trunc, convention).apply(base)
    diff = np.max(np.abs(lhs.coeffs - rhs.coeffs))
    scale = max(np.max(np.abs(lhs.coeffs)), np.max(np.abs(rhs.coeffs)), 1e-30)
    return ResidualReport(j, float(diff / scale), lhs, rhs, spec.radii, spec_s.radii)


def qkz_residual(j: int, params: ModelParams, z: Sequence[complex], W: EllipticW,
                 grid: QuadratureGrid | None = None, trunc: TruncationPolicy | None = None,
                 policy: str = "geometric-mean", convention: str = "consistent") -> float:
    """max_eps |Psi(.., p z_j, ..) - K_j(z) Psi(z)| relative to the larger side's max-norm."""
    return qkz_check(j, params, z, W, grid, trunc, policy, convention).residual
