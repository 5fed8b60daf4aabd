"""Exact evaluation of the closed-form curvature thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ValidationError
from .params import fmt, parse_rational

ROOT_DIGITS = 60


@dataclass(frozen=True)
class BoundConstants:
    """``L_k = C k^(C' k)``, the scale ``omega_0`` and ``N``; all user-supplied."""

    C: Fraction
    C_prime: Fraction
    omega_0: Fraction
    N: Fraction = Fraction(7)

    def __post_init__(self):
        for name in ("C", "C_prime", "omega_0", "N"):
            v = parse_rational(getattr(self, name))
            if not v > 0:
                raise ValidationError(f"{name} must be positive")
            object.__setattr__(self, name, v)
        if self.N < 7:
            raise ValidationError("N must be at least 7")

    def as_json(self) -> dict:
        return {"C": fmt(self.C), "C_prime": fmt(self.C_prime), "omega_0": fmt(self.omega_0),
                "N": fmt(self.N)}

    @classmethod
    def from_json(cls, d: dict) -> "BoundConstants":
        missing = [k for k in ("C", "C_prime", "omega_0") if k not in d]
        if missing:
            raise ValidationError(f"constants missing fields: {missing}")
        return cls(d["C"], d["C_prime"], d["omega_0"], d.get("N", 7))


@dataclass(frozen=True)
class LkValue:
    value: Fraction
    exact: bool
    error_bound: Fraction  # value - true value lies in [0, error_bound]

    def as_json(self) -> dict:
        return {"value": fmt(self.value), "exact": self.exact, "error_bound": fmt(self.error_bound)}


def _iroot_floor(x: int, n: int) -> int:
    """``floor(x ** (1/n))`` for integers ``x >= 0``, ``n >= 1``."""
    if x < 2 or n == 1:
        return x
    r = 1 << ((x.bit_length() + n - 1) // n)
    while True:
        s = ((n - 1) * r + x // r ** (n - 1)) // n
        if s >= r:
            break
        r = s
    while r ** n > x:
        r -= 1
    while (r + 1) ** n <= x:
        r += 1
    return r


def rational_power_up(base: Fraction, exponent: Fraction, digits: int = ROOT_DIGITS) -> LkValue:
    """``base ** exponent`` rounded up to a rational, exact when possible."""
    base, exponent = Fraction(base), Fraction(exponent)
    if base < 0:
        raise ValidationError("negative base")
    if exponent == 0:
        return LkValue(Fraction(1), True, Fraction(0))
    if base == 0:
        return LkValue(Fraction(0), True, Fraction(0))
    p, q = exponent.numerator, exponent.denominator
    x = base ** p  # exact rational
    if q == 1:
        return LkValue(x, True, Fraction(0))
    num, den = x.numerator, x.denominator
    rn, rd = _iroot_floor(num, q), _iroot_floor(den, q)
    if rn ** q == num and rd ** q == den:
        return LkValue(Fraction(rn, rd), True, Fraction(0))
    # upper bound: ceil of the root of num scaled, over floor of the root of den
    scale = 10 ** digits
    up_num = _iroot_floor(num * scale ** q, q) + 1
    lo_den = _iroot_floor(den * scale ** q, q)
    value = Fraction(up_num, lo_den)
    lower = Fraction(up_num - 1, lo_den + 1)
    return LkValue(value, False, value - lower)


def lipschitz_constant_Lk(k: int, constants: BoundConstants) -> LkValue:
    """``C * k^(C' k)`` with ``0^0 = 1``."""
    if int(k) != k or k < 0:
        raise ValidationError("k must be a non-negative integer")
    p = rational_power_up(Fraction(int(k)), constants.C_prime * int(k))
    return LkValue(constants.C * p.value, p.exact, constants.C * p.error_bound)


def _query(R, m):
    R = parse_rational(R)
    if not R > 0:
        raise ValidationError("R must be positive")
    if int(m) != m or m < 1:
        raise ValidationError("m must be a positive integer")
    return R, int(m)


def _core(R, m, constants):
    L = lipschitz_constant_Lk(m - 1, constants)
    return (m / R * L.value) ** 2, L


def C0(constants: BoundConstants) -> Fraction:
    """``2^150 N^36 omega_0^2``."""
    return 2 ** 150 * constants.N ** 36 * constants.omega_0 ** 2


def k_bound_main(R, m, constants: BoundConstants, *, with_report: bool = False):
    """``k(R, m) = C_0 (m R^-1 L_{m-1})^2``."""
    R, m = _query(R, m)
    core, L = _core(R, m, constants)
    k = C0(constants) * core
    if not with_report:
        return k
    r = float(constants.omega_0) / math.sqrt(float(k)) if k < 2 ** 1000 else \
        float(constants.omega_0) * math.exp(-0.5 * _log_fraction(k))
    return k, {"R": fmt(R), "m": m, "k": fmt(k), "L_m_minus_1": L.as_json(),
               "C0": fmt(C0(constants)), "propagation_scale_r": r,
               "constants": constants.as_json(), "exact": L.exact}


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def k_bound_closed(R, m, l, constants: BoundConstants, *, with_report: bool = False):
    """``k(R, m, l) = 8 l^2 (m R^-1 L_{m-1})^2``; any ``l >= 1`` is accepted."""
    R, m = _query(R, m)
    if int(l) != l or l < 1:
        raise ValidationError("l must be a positive integer")
    l = int(l)
    core, L = _core(R, m, constants)
    k = 8 * l * l * core
    if not with_report:
        return k
    return k, {"R": fmt(R), "m": m, "l": l, "l_even": l % 2 == 0, "k": fmt(k),
               "L_m_minus_1": L.as_json(), "constants": constants.as_json(), "exact": L.exact}


def curvature_bound(R, m, lam, constants: BoundConstants, *, with_report: bool = False):
    """``(2 m R^-1 L_{m-1} + lambda)^2``.

    ``lambda = 0`` is accepted and reported as the infimum over ``lambda > 0``.
    """
    R, m = _query(R, m)
    lam = parse_rational(lam)
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    L = lipschitz_constant_Lk(m - 1, constants)
    b = (2 * m / R * L.value + lam) ** 2
    if not with_report:
        return b
    return b, {"R": fmt(R), "m": m, "lambda": fmt(lam), "bound": fmt(b),
               "attained": lam > 0, "kind": "bound" if lam > 0 else "infimum",
               "L_m_minus_1": L.as_json(), "constants": constants.as_json()}
