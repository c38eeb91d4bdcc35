"""Global model parameters and the derived constants shared by every module."""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

#: Relative margin required between |p| and |q|^(2 l_j) for the circle contour.
CONTOUR_MARGIN = 1.0 - 1e-9


class ParameterDomainError(ValueError):
    """Raised when parameters fall outside the region where the formulae converge."""


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed."""


@dataclass(frozen=True)
class TruncationPolicy:
    """Cut-off rule for the infinite products.

    A product stops at ``max_terms`` factors or as soon as the next factor
    differs from one by less than ``tail_tol``, whichever comes first.
    """

    max_terms: int = 400
    tail_tol: float = 1e-18

    def __post_init__(self):
        if self.max_terms < 1:
            raise ParameterDomainError("max_terms must be positive")
        if not self.tail_tol > 0:
            raise ParameterDomainError("tail_tol must be positive")


def cpow(base, exponent):
    """Principal-branch power ``base**exponent`` for complex arguments."""
    base = np.asarray(base, dtype=complex)
    return np.exp(exponent * np.log(base))


def delta_weight(j, k):
    """Conformal weight ``j(j+2) / (4(k+2))``."""
    if k + 2 == 0:
        raise ZeroDivisionError("delta_weight is undefined at k = -2")
    return j * (j + 2) / (4 * (k + 2))


@dataclass(frozen=True)
class ModelParams:
    q: complex
    k: complex
    L: complex
    spins: tuple[int, ...]
    N: int
    p: complex = field(init=False)
    kappa: complex = field(init=False)
    a_exponents: tuple[complex, ...] = field(init=False)
    contour_feasible: bool = field(init=False)

    def __post_init__(self):
        q = complex(self.q)
        k = complex(self.k)
        L = complex(self.L)
        spins = tuple(int(s) for s in self.spins)
        if not spins:
            raise ParameterDomainError("spins must be non-empty")
        if any(s < 0 for s in spins):
            raise ParameterDomainError(f"spins must be non-negative, got {spins}")
        if self.N < 0:
            raise ParameterDomainError(f"N must be non-negative, got {self.N}")
        if q == 0 or abs(q) >= 1:
            raise ParameterDomainError(f"need 0 < |q| < 1, got |q| = {abs(q)}")
        p = complex(cpow(q, 2 * (k + 2)))
        if abs(p) >= 1:
            raise ParameterDomainError(f"need |p| < 1, got |p| = {abs(p)}")

        total = sum(spins)
        N = int(self.N)
        kappa = complex(cpow(q, -2 * (L + total / 2 - N + 1)))
        a_exp = tuple(
            complex(li / (2 * (k + 2)) * (L + total - li / 2 - N + 1)) for li in spins
        )
        feasible = abs(k.imag) == 0 and all(
            abs(p) < abs(q) ** (2 * lj) * CONTOUR_MARGIN for lj in spins
        )
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "spins", spins)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "a_exponents", a_exp)
        object.__setattr__(self, "contour_feasible", bool(feasible))

    @property
    def n(self) -> int:
        return len(self.spins)

    def with_spins(self, spins: Sequence[int], N: int | None = None) -> "ModelParams":
        return ModelParams(self.q, self.k, self.L, tuple(spins), self.N if N is None else N)

    def delta(self, j) -> complex:
        return delta_weight(j, self.k)


def derive(q, k, L, spins: Sequence[int], N: int) -> ModelParams:
    """Build a validated :class:`ModelParams`."""
    return ModelParams(q, k, L, tuple(spins), N)


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs, as read from a flat ``key = value`` file."""

    params: ModelParams
    trunc: TruncationPolicy
    quad_points: int = 512
    seed: int = 0

    def echo(self) -> dict:
        prm = self.params
        return {
            "q": _num(prm.q),
            "k": _num(prm.k),
            "L": _num(prm.L),
            "spins": list(prm.spins),
            "N": prm.N,
            "max_terms": self.trunc.max_terms,
            "tail_tol": self.trunc.tail_tol,
            "quad_points": self.quad_points,
            "seed": self.seed,
        }


def _num(x: complex):
    x = complex(x)
    return x.real if x.imag == 0 else [x.real, x.imag]


_DEFAULTS = {
    "q": "0.6",
    "k": "1",
    "L": "0.3",
    "spins": "1,1",
    "N": "1",
    "max_terms": "400",
    "tail_tol": "1e-18",
    "quad_points": "512",
    "seed": "0",
}


def _parse_number(key: str, text: str) -> complex:
    try:
        value = complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number") from exc
    return value


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse the ``key = value`` (or ``key: value``) config format.

    Blank lines and ``#`` comments are ignored; unknown keys are an error.
    """
    raw = dict(_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split(sep, 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = str(value)

    try:
        spins = tuple(int(s) for s in raw["spins"].split(",") if s.strip())
        N = int(raw["N"])
        max_terms = int(raw["max_terms"])
        quad_points = int(raw["quad_points"])
        seed = int(raw["seed"])
        tail_tol = float(raw["tail_tol"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    q = _parse_number("q", raw["q"])
    k = _parse_number("k", raw["k"])
    L = _parse_number("L", raw["L"])
    params = derive(q, k, L, spins, N)
    return RunConfig(params, TruncationPolicy(max_terms, tail_tol), quad_points, seed)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    text = "" if path is None else Path(path).read_text()
    return parse_config_text(text, overrides)
