"""Iterated circle quadrature with residue corrections.

The integration cycle for t_a must separate a prescribed "inside" family of
poles from an "outside" family.  We integrate on a circle |t_a| = r with the
periodic trapezoid rule and repair every catalogued pole that the circle puts
on the wrong side:

    integral = circle + sum(Res, inside poles outside the circle)
                      - sum(Res, outside poles inside the circle)

with residues of ``f(t)/t`` (the measure is dt / (2 pi i t)).  Residues are
never formed by numerical limits: the integrand evaluates itself with the
vanishing factor D removed, and ``Res = (f D)(c) / (c D'(c))``.

Variables are integrated from t_N (outermost) down to t_1, because the
contour of t_a only refers to t_b with b > a.  When an outer variable is
pinned at a residue point, the inner catalogue moves with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .params import CONTOUR_MARGIN, ModelParams


class Infeasible(ValueError):
    """No admissible contour exists; ``violated`` names the failing inequality."""

    def __init__(self, violated: str):
        super().__init__(f"infeasible contour: {violated}")
        self.violated = violated


class NonSimplePole(ArithmeticError):
    pass


class QuadratureDivergence(ArithmeticError):
    pass


#: Relative distance below which two catalogued poles count as colliding.
COLLISION_TOL = 1e-10


@dataclass(frozen=True)
class PoleFamily:
    """Poles ``c_s = base * ratio**s`` for ``s = s0, s0 + 1, ...`` (or just s0 if ``single``).

    ``side`` is +1 when the cycle must enclose the poles and -1 when it must
    exclude them.  ``kind`` describes the vanishing factor D of the integrand:

    * ``"inv"``: D = 1 - c/t
    * ``"dir"``: D = 1 - t/c
    * ``"lin"``: D = slope * (t - c)

    ``key`` builds the factor label handed back to the integrand for removal.
    """

    var: int
    base: complex
    ratio: complex
    s0: int
    side: int
    kind: str
    key: Callable[[int], tuple]
    single: bool = False
    slope: complex = 1.0
    tt_partner: int | None = None

    def members(self, r: float, limit: int = 10_000):
        """Poles of this family lying on the wrong side of |t| = r."""
        s = self.s0
        while s < self.s0 + limit:
            c = self.base * self.ratio ** (s - self.s0)
            wrong = abs(c) > r if self.side > 0 else abs(c) < r
            if not wrong:
                # inside families shrink and outside families grow with s
                if self.single or self._moves_away(r):
                    return
            else:
                yield s, c
            if self.single:
                return
            s += 1

    def _moves_away(self, r: float) -> bool:
        if abs(self.ratio) == 1:
            return True
        shrinking = abs(self.ratio) < 1
        return shrinking == (self.side > 0)

    def multiplier(self, c: complex) -> complex:
        """``1 / (c D'(c))``."""
        if self.kind == "inv":
            return 1.0
        if self.kind == "dir":
            return -1.0
        return 1.0 / (c * self.slope)


@dataclass(frozen=True)
class CorrectionPole:
    var: int
    location: complex
    side: int
    factor: tuple
    multiplier: complex


class Integrand(Protocol):
    nvars: int

    def __call__(self, t: np.ndarray, removed: tuple) -> np.ndarray:
        """Evaluate at points ``t`` of shape (M, nvars) with factors in ``removed`` divided out."""

    def catalogue(self, a: int, fixed: dict) -> list[PoleFamily]:
        """Pole families of t_a given the outer variables ``fixed`` (1-based keys)."""


@dataclass
class SimpleIntegrand:
    """A one-variable integrand with explicitly known residues, for tests and demos.

    ``poles`` holds ``(location, side, residue)`` where ``residue`` is
    ``Res_{t=c} f(t)/t``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    poles: Sequence[tuple[complex, int, complex]] = ()
    nvars: int = 1

    def __call__(self, t, removed):
        if removed:
            (label,) = removed
            return np.full(len(t), complex(label[1]))
        return np.asarray(self.func(t[:, 0]), dtype=complex)

    def catalogue(self, a, fixed):
        fams = []
        for i, (c, side, res) in enumerate(self.poles):
            fams.append(PoleFamily(a, complex(c), 1.0, 0, side, "lin",
                                   key=lambda s, i=i, res=res: ("simple", res * complex(self.poles[i][0])),
                                   single=True))
        return fams


@dataclass(frozen=True)
class QuadratureGrid:
    Q: int = 512

    def __post_init__(self):
        Q = int(self.Q)
        if Q < 64 or Q & (Q - 1):
            raise ValueError(f"quadrature size must be a power of two >= 64, got {Q}")

    @property
    def roots(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.Q) / self.Q)

    def doubled(self) -> "QuadratureGrid":
        return QuadratureGrid(2 * self.Q)


@dataclass(frozen=True)
class ContourSpec:
    radii: tuple[float, ...]
    policy: str = "geometric-mean"
    window: tuple[float, float] | None = None
    certificate: tuple[str, ...] = ()
    corrections: tuple[CorrectionPole, ...] = field(default=())

    @property
    def N(self) -> int:
        return len(self.radii)


def z_pole_families(params: ModelParams, z: Sequence[complex], a: int) -> list[PoleFamily]:
    """The t_a-poles coming from the z-dependence of the TV integrand."""
    q, p = params.q, params.p
    fams = []
    for j, (l, zj) in enumerate(zip(params.spins, z), start=1):
        zj = complex(zj)
        if l > 0:
            fams.append(PoleFamily(a, q ** (-l) * zj, p, 0, +1, "lin",
                                   key=lambda s, a=a, j=j: ("zlin", a, j), single=True))
        fams.append(PoleFamily(a, p * q ** (-l) * zj, p, 1, +1, "inv",
                               key=lambda s, a=a, j=j: ("zin", a, j, s)))
        fams.append(PoleFamily(a, q**l * zj, 1 / p, 0, -1, "dir",
                               key=lambda s, a=a, j=j: ("zout", a, j, s)))
    return fams


def tt_pole_families(params: ModelParams, a: int, fixed: dict) -> list[PoleFamily]:
    """The t_a-poles coming from pairs (a, b), b > a, at the pinned t_b."""
    q, p = params.q, params.p
    fams = []
    for b, tb in sorted(fixed.items()):
        if b <= a:
            continue
        tb = complex(tb)
        fams.append(PoleFamily(a, q**2 * tb, p, 0, +1, "lin",
                               key=lambda s, a=a, b=b: ("ttlin", a, b), single=True,
                               slope=q**-2, tt_partner=b))
        fams.append(PoleFamily(a, p * q**2 * tb, p, 1, +1, "inv",
                               key=lambda s, a=a, b=b: ("ttin", a, b, s), tt_partner=b))
        fams.append(PoleFamily(a, q**-2 * tb, 1 / p, 0, -1, "dir",
                               key=lambda s, a=a, b=b: ("ttout", a, b, s), tt_partner=b))
    return fams


def _window(params: ModelParams, z: Sequence[complex]) -> tuple[float, float]:
    q, p = params.q, params.p
    lo = max(abs(p * q ** (-l) * complex(zj)) for l, zj in zip(params.spins, z))
    hi = min(abs(q**l * complex(zj)) for l, zj in zip(params.spins, z))
    return lo, hi


def _gap_radius(params: ModelParams, z: Sequence[complex]) -> float:
    """Radius in the widest logarithmic gap between nearby z-pole moduli."""
    mods = []
    q, p = params.q, params.p
    for l, zj in zip(params.spins, z):
        for s in range(0, 4):
            mods.append(abs(p**s * q ** (-l) * complex(zj)))
            mods.append(abs(p ** (-s) * q**l * complex(zj)))
    mods = sorted(set(mods))
    centre = math.exp(np.mean([math.log(abs(complex(zj))) for zj in z]))
    best, best_r = -1.0, centre
    for lo, hi in zip(mods, mods[1:]):
        r = math.sqrt(lo * hi)
        # prefer gaps near the z-scale; distant gaps cost more corrections
        if not (abs(p) * centre < r < centre / abs(p)):
            continue
        gap = math.log(hi / lo)
        if gap > best:
            best, best_r = gap, r
    return best_r


def plan_contour(params: ModelParams, z: Sequence[complex], N: int | None = None,
                 policy: str = "geometric-mean") -> ContourSpec:
    """Choose equal circle radii for all t-variables and list the base corrections.

    With ``policy="geometric-mean"`` the radius is the geometric mean of the
    window max_j |p q^-l_j z_j| < r < min_j |q^l_j z_j|.  When the window is
    empty (this happens after shifting some z_j by p) the radius is placed in
    the widest gap of the pole moduli and every pole on the wrong side is
    corrected; this is only offered for N = 1, since for N > 1 the inner
    integrals have pinch poles in the outer variables.  ``policy="manual:<r>"``
    fixes the radius.
    """
    N = params.N if N is None else int(N)
    if len(z) != params.n:
        raise ValueError(f"expected {params.n} z-values, got {len(z)}")
    if N == 0:
        return ContourSpec((), policy, None, ("no integration variables",), ())
    if not params.contour_feasible:
        worst = max(params.spins)
        raise Infeasible(f"|p| = {abs(params.p):.6g} must be < |q|^(2 l) = "
                         f"{abs(params.q) ** (2 * worst):.6g} for l = {worst}")
    if any(complex(zj) == 0 for zj in z):
        raise Infeasible("z_j = 0")
    cert = [f"|p| = {abs(params.p):.6g} < |q|^(2 l_j) for all j"]
    if N > 0 and 0 in params.spins:
        j = params.spins.index(0) + 1
        raise Infeasible(f"l_{j} = 0: the pole t_a = z_{j} belongs to both the inside and the outside family")
    lo, hi = _window(params, z)
    if policy == "geometric-mean":
        if lo < hi * CONTOUR_MARGIN:
            r = math.sqrt(lo * hi)
            cert.append(f"max|p q^-l z| = {lo:.6g} < r = {r:.6g} < min|q^l z| = {hi:.6g}")
        else:
            r = _gap_radius(params, z)
            cert.append(f"window empty ({lo:.6g} >= {hi:.6g}); r = {r:.6g} placed in widest pole gap")
    elif policy.startswith("manual:"):
        try:
            r = float(policy.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad manual radius in {policy!r}") from exc
        if not r > 0:
            raise ValueError("manual radius must be positive")
        cert.append(f"manual radius r = {r:.6g}")
    else:
        raise ValueError(f"unknown radius policy {policy!r}")
    if N > 1 and not lo < r < hi:
        # outside the window the inner integrals acquire pinch poles in the
        # outer variables, which the correction catalogue does not list
        raise Infeasible(f"N = {N} needs a radius inside the window ({lo:.6g}, {hi:.6g}); got r = {r:.6g}")
    corrections = []
    for fam in z_pole_families(params, z, 1):
        for s, c in fam.members(r):
            corrections.append(CorrectionPole(1, c, fam.side, fam.key(s), fam.multiplier(c)))
    _check_collisions([(c.location, c.factor) for c in corrections])
    for c in corrections:
        if abs(abs(c.location) - r) < 1e-3 * r:
            raise Infeasible(f"pole {c.factor} at |t| = {abs(c.location):.6g} lies on the circle r = {r:.6g}")
    return ContourSpec(tuple([r] * N), policy, (lo, hi), tuple(cert), tuple(corrections))


def _check_collisions(poles):
    for i in range(len(poles)):
        for j in range(i + 1, len(poles)):
            ci, cj = poles[i][0], poles[j][0]
            if abs(ci - cj) <= COLLISION_TOL * max(abs(ci), abs(cj)):
                raise NonSimplePole(f"poles {poles[i][1]} and {poles[j][1]} collide at {ci}")


def _wrong_side(f: Integrand, a: int, fixed: dict, r: float) -> list[CorrectionPole]:
    out = []
    for fam in f.catalogue(a, fixed):
        for s, c in fam.members(r):
            if fam.tt_partner is None and any(
                abs(c - complex(v)) <= COLLISION_TOL * abs(c) for b, v in fixed.items() if b > a
            ):
                # the pinned partner's zero at t_a = t_b cancels this pole
                continue
            out.append(CorrectionPole(a, c, fam.side, fam.key(s), fam.multiplier(c)))
    _check_collisions([(c.location, c.factor) for c in out])
    return out


def integrate(f: Integrand, spec: ContourSpec, grid: QuadratureGrid,
              verify: bool = False, tol: float = 1e-10) -> complex:
    """Integral of ``f`` over the corrected cycle, with measure prod dt_a / (2 pi i t_a).

    With ``verify`` the integral is repeated at 2Q nodes and
    :class:`QuadratureDivergence` is raised if the relative change exceeds ``tol``.
    """
    if spec.N != f.nvars:
        raise ValueError(f"contour has {spec.N} variables, integrand {f.nvars}")
    value = _level(f, spec, grid.roots, f.nvars, {}, ())
    if verify:
        finer = _level(f, spec, grid.doubled().roots, f.nvars, {}, ())
        if abs(finer - value) > tol * max(abs(finer), 1e-300):
            raise QuadratureDivergence(
                f"Q={grid.Q}: {value!r} vs 2Q: {finer!r}")
        value = finer
    return value


def _point(fixed: dict, n: int) -> np.ndarray:
    return np.array([[complex(fixed[b]) for b in range(1, n + 1)]], dtype=complex)


def _level(f: Integrand, spec: ContourSpec, roots: np.ndarray, a: int, fixed: dict,
           removed: tuple) -> complex:
    n = f.nvars
    if a == 0:
        return complex(f(_point(fixed, n), removed)[0])
    r = spec.radii[a - 1]
    nodes = r * roots
    if a == 1:
        pts = np.empty((len(nodes), n), dtype=complex)
        for b in range(2, n + 1):
            pts[:, b - 1] = fixed[b]
        pts[:, 0] = nodes
        vals = f(pts, removed)
        total = _ksum(vals) / len(nodes)
    else:
        vals = [_level(f, spec, roots, a - 1, {**fixed, a: node}, removed) for node in nodes]
        total = _ksum(np.array(vals)) / len(nodes)
    for pole in _wrong_side(f, a, fixed, r):
        inner = _level(f, spec, roots, a - 1, {**fixed, a: pole.location}, removed + (pole.factor,))
        total += pole.side * pole.multiplier * inner
    return complex(total)


def _ksum(vals: np.ndarray) -> complex:
    """Neumaier-compensated sum of a complex array."""
    vals = np.asarray(vals, dtype=complex)
    return complex(math.fsum(vals.real), math.fsum(vals.imag))


def convergence_report(f: Integrand, spec: ContourSpec, ladder: Sequence[int] = (128, 256, 512)):
    """Integrate at each Q of the ladder and report successive differences."""
    rows = []
    prev = None
    for Q in ladder:
        val = integrate(f, spec, QuadratureGrid(Q))
        diff = None if prev is None else abs(val - prev)
        rel = None if diff is None else diff / max(abs(val), 1e-300)
        rows.append({"Q": Q, "value": val, "abs_diff": diff, "rel_diff": rel})
        prev = val
    return rows
