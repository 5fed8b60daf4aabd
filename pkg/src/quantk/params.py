"""Exact rational parameters and the constant chains built from them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ValidationError


def parse_rational(x) -> Fraction:
    """Accept ``Fraction``, ``int``, decimal strings and ``"p/q"`` strings.

    Floats are converted through ``repr`` so ``0.1`` means one tenth.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ValidationError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        s = x.strip()
        if "^" in s or "**" in s:
            base, exp = s.replace("**", "^").split("^")
            return Fraction(parse_rational(base)) ** int(exp)
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"not a rational number: {x!r}") from None
    raise ValidationError(f"not a rational number: {x!r}")


def fmt(q: Fraction) -> str:
    """Canonical string: ``"p"`` or ``"p/q"``."""
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class ParameterTuple:
    """``(epsilon, r, N)`` and optionally ``L``, all exact."""

    epsilon: Fraction
    r: Fraction
    N: Fraction
    L: Fraction | None = None

    def __post_init__(self):
        for name in ("epsilon", "r", "N"):
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        if self.L is not None:
            object.__setattr__(self, "L", parse_rational(self.L))

    def validate(self, *, strict_epsilon: bool = True, min_N=1) -> "ParameterTuple":
        """Range checks; ``strict_epsilon`` enforces ``0 < epsilon < 1/20``."""
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if strict_epsilon and not self.epsilon < Fraction(1, 20):
            raise ValidationError(f"epsilon={fmt(self.epsilon)} must be < 1/20")
        if not self.r >= 0:
            raise ValidationError("r must be non-negative")
        if self.N < min_N:
            raise ValidationError(f"N must be >= {min_N}")
        if self.L is not None and not self.L > 0:
            raise ValidationError("L must be positive")
        return self

    def as_json(self) -> dict:
        out = {"epsilon": fmt(self.epsilon), "r": fmt(self.r), "N": fmt(self.N)}
        if self.L is not None:
            out["L"] = fmt(self.L)
        return out

    @classmethod
    def from_json(cls, d: dict) -> "ParameterTuple":
        missing = [k for k in ("epsilon", "r", "N") if k not in d]
        if missing:
            raise ValidationError(f"params missing fields: {missing}")
        return cls(d["epsilon"], d["r"], d["N"], d.get("L"))


# ----------------------------------------------------------- parameter maps

def difference_params(eps, r, N):
    """Difference construction: ``(2^8 N^4 eps, 3r, 16 N^3)``."""
    return 2 ** 8 * N ** 4 * eps, 3 * r, 16 * N ** 3


def basic_product_params(eps, r, N, L):
    """Product with an ``L``-Lipschitz projection: ``(8 r N^2 L + eps, r, N)``."""
    return 8 * r * N ** 2 * L + eps, r, N


def inner_pairing_params(p: ParameterTuple):
    """``(2^11 r N^6 L + 2^8 N^4 eps, 3r, 16 N^3)``."""
    e, r, N, L = p.epsilon, p.r, p.N, p.L
    return 2 ** 11 * r * N ** 6 * L + 2 ** 8 * N ** 4 * e, 3 * r, 16 * N ** 3


def outer_pairing_params(p: ParameterTuple):
    """``(2^35 r N^18 L + 2^32 N^16 eps, 9r, 2^16 N^9)``."""
    e, r, N, L = p.epsilon, p.r, p.N, p.L
    return 2 ** 35 * r * N ** 18 * L + 2 ** 32 * N ** 16 * e, 9 * r, 2 ** 16 * N ** 9


@dataclass(frozen=True)
class DerivedParams:
    epsilon_prime: Fraction
    r_prime: Fraction
    N_prime: Fraction

    def as_json(self) -> dict:
        return {"epsilon_prime": fmt(self.epsilon_prime), "r_prime": fmt(self.r_prime),
                "N_prime": fmt(self.N_prime)}


def derived_params(p: ParameterTuple) -> DerivedParams:
    """``eps' = 2^70 r N^18 L + 2^64 N^16 eps``, ``r' = 9r``, ``N' = 2^32 N^9``."""
    if p.L is None:
        raise ValidationError("derived parameters need L")
    e, r, N, L = p.epsilon, p.r, p.N, p.L
    return DerivedParams(2 ** 70 * r * N ** 18 * L + 2 ** 64 * N ** 16 * e, 9 * r, 2 ** 32 * N ** 9)


def homotopy_budget(p: ParameterTuple):
    """``(2^72 r N^18 L + 2^66 N^16 eps, 9r, 2^34 N^9)``."""
    e, r, N, L = p.epsilon, p.r, p.N, p.L
    return 2 ** 72 * r * N ** 18 * L + 2 ** 66 * N ** 16 * e, 9 * r, 2 ** 34 * N ** 9


def pairability_sides(p: ParameterTuple):
    """Left and right side of ``2^6 r N^2 L + eps < 2^-68 N^-16``."""
    if p.L is None:
        raise ValidationError("pairability needs L")
    lhs = 2 ** 6 * p.r * p.N ** 2 * p.L + p.epsilon
    rhs = Fraction(1, 2 ** 68) / p.N ** 16
    return lhs, rhs


def is_pairable(p: ParameterTuple) -> bool:
    lhs, rhs = pairability_sides(p)
    return lhs < rhs
