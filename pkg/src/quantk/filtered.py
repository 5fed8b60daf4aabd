"""Finite-propagation operators, Lipschitz matrix functions and commutators."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from . import _accel
from .errors import ValidationError
from .linalg import opnorm
from .metric import FiniteMetricSpace

ENV_PROP_TOL = "QUANTK_PROP_TOLERANCE"
DEFAULT_PROP_TOL = 1e-12
MAX_DIM = 8192


def prop_tolerance_rel() -> float:
    """Relative zero threshold for propagation (``QUANTK_PROP_TOLERANCE``)."""
    raw = os.environ.get(ENV_PROP_TOL)
    if raw is None or raw.strip() == "":
        return DEFAULT_PROP_TOL
    try:
        val = float(raw)
    except ValueError:
        raise ValidationError(f"{ENV_PROP_TOL}={raw!r} is not a number") from None
    if not val >= 0:
        raise ValidationError(f"{ENV_PROP_TOL} must be non-negative")
    return val


@dataclass(frozen=True, eq=False)
class FilteredOperator:
    """Dense operator on ``points x C^k`` (index ``point * k + a``)."""

    space: FiniteMetricSpace
    internal_dim: int
    matrix: np.ndarray
    prop_tolerance: float | None = None  # absolute; None -> relative default

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=np.complex128)
        n = len(self.space) * self.internal_dim
        if M.shape != (n, n):
            raise ValidationError(f"matrix shape {M.shape} != ({n}, {n})")
        object.__setattr__(self, "matrix", M)

    @cached_property
    def norm(self) -> float:
        return opnorm(self.matrix)

    @property
    def tolerance(self) -> float:
        if self.prop_tolerance is not None:
            return float(self.prop_tolerance)
        return prop_tolerance_rel() * self.norm

    @cached_property
    def propagation(self) -> float:
        return _accel.propagation_scan(np.abs(self.matrix), self.space.dist,
                                       self.internal_dim, self.tolerance)

    def with_matrix(self, M) -> "FilteredOperator":
        return FilteredOperator(self.space, self.internal_dim, M, self.prop_tolerance)

    def __matmul__(self, other):
        return self.with_matrix(self.matrix @ other.matrix)

    def __add__(self, other):
        return self.with_matrix(self.matrix + other.matrix)

    def __sub__(self, other):
        return self.with_matrix(self.matrix - other.matrix)

    @property
    def H(self):
        return self.with_matrix(self.matrix.conj().T)


def propagation(T: FilteredOperator) -> float:
    return T.propagation


@dataclass(frozen=True, eq=False)
class UnitizedOperator:
    """``scalar_part * 1 + operator_part``."""

    scalar_part: complex
    operator_part: FilteredOperator

    @property
    def propagation(self) -> float:
        return self.operator_part.propagation

    def full(self) -> np.ndarray:
        M = self.operator_part.matrix
        return M + self.scalar_part * np.eye(M.shape[0])


@dataclass(frozen=True, eq=False)
class LipschitzElement:
    """Function ``points -> M_n(C)`` plus a constant value at infinity."""

    space: FiniteMetricSpace
    values: np.ndarray  # (points, n, n)
    lipschitz_L: float | None
    scalar_part: np.ndarray = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 3 or v.shape[0] != len(self.space) or v.shape[1] != v.shape[2]:
            raise ValidationError(f"values of shape {v.shape} do not fit the space")
        object.__setattr__(self, "values", v)
        s = np.zeros(v.shape[1:], dtype=np.complex128) if self.scalar_part is None \
            else np.asarray(self.scalar_part, dtype=np.complex128).reshape(v.shape[1:])
        object.__setattr__(self, "scalar_part", s)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def measured_lipschitz(self) -> tuple:
        """Exhaustive ``max ||f(x)-f(y)|| / d(x, y)`` with its witness pair."""
        return lipschitz_ratio(self.space, self.values)

    def projection_defect(self) -> float:
        v = self.values
        d = np.linalg.norm(v @ v - v, ord=2, axis=(1, 2)).max() if len(v) else 0.0
        h = np.linalg.norm(v - np.conj(np.transpose(v, (0, 2, 1))), ord=2, axis=(1, 2)).max() \
            if len(v) else 0.0
        return float(max(d, h))


def pairwise_opnorm_diff(values: np.ndarray) -> np.ndarray:
    """``out[i, j] = ||values[i] - values[j]||_op``."""
    P = values.shape[0]
    out = np.zeros((P, P))
    if values.shape[1] == 1:
        v = values[:, 0, 0]
        return np.abs(v[:, None] - v[None, :])
    for i in range(P):
        diff = values[i][None] - values[i + 1:]
        if diff.size:
            out[i, i + 1:] = np.linalg.norm(diff, ord=2, axis=(1, 2))
    return out + out.T


def lipschitz_ratio(space: FiniteMetricSpace, values: np.ndarray):
    num = pairwise_opnorm_diff(np.asarray(values, dtype=np.complex128))
    r, i, j = _accel.max_ratio(num, space.dist)
    return r, i, j


def lipschitz_element(space, values, L=None, scalar_part=None, rtol=1e-12) -> LipschitzElement:
    """Build and certify a Lipschitz element.

    With ``L=None`` the exact exhaustive ratio is used as the constant.  A
    given ``L`` must dominate the measured ratio (relative slack ``rtol``).
    """
    values = np.asarray(values, dtype=np.complex128)
    if values.ndim == 1:
        values = values[:, None, None]
    measured, i, j = lipschitz_ratio(space, values)
    if L is None:
        L = measured
    elif measured > float(L) * (1 + rtol) + rtol:
        raise ValidationError(
            f"claimed Lipschitz constant {L} < measured {measured} at pair ({i}, {j})")
    return LipschitzElement(space, values, float(L), scalar_part)


def amplify(T: FilteredOperator, n: int) -> FilteredOperator:
    """``T (x) I_n`` with internal index ``(a, j)``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if T.matrix.shape[0] * n > MAX_DIM:
        raise ValidationError(f"amplified dimension exceeds cap {MAX_DIM}")
    if n == 1:
        return T
    return FilteredOperator(T.space, T.internal_dim * n, np.kron(T.matrix, np.eye(n)),
                            T.prop_tolerance)


def embed(f: LipschitzElement, m: int) -> FilteredOperator:
    """``I_m (x) f`` acting pointwise, internal index ``(a, j)``."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    if len(f.space) * m * f.n > MAX_DIM:
        raise ValidationError(f"embedded dimension exceeds cap {MAX_DIM}")
    Im = np.eye(m)
    M = sla.block_diag(*[np.kron(Im, v) for v in f.values])
    return FilteredOperator(f.space, m * f.n, M)


def _comm_norm(T: FilteredOperator, f_values: np.ndarray, space) -> float:
    n = f_values.shape[1]
    A = np.kron(T.matrix, np.eye(n)) if n > 1 else T.matrix
    F = embed(LipschitzElement(space, f_values, None), T.internal_dim).matrix
    return opnorm(A @ F - F @ A)


def commutator_certificate(T: FilteredOperator, f: LipschitzElement, slack_rel: float = 1e-12) -> dict:
    """``||[T (x) I_n, I_m (x) f]|| <= 8 L prop(T) ||T||`` with both sides.

    For entrywise-real ``f`` the sharper ``4 L prop(T) ||T||`` is also checked.
    """
    lhs = _comm_norm(T, f.values, T.space)
    normT = T.norm
    prop = T.propagation
    L = float(f.lipschitz_L)
    slack = slack_rel * normT
    rhs = 8.0 * L * prop * normT
    real = bool(np.all(f.values.imag == 0))
    out = {
        "commutator_norm": lhs,
        "bound": rhs,
        "L": L,
        "propagation": prop,
        "norm_T": normT,
        "slack": slack,
        "passed": bool(lhs <= rhs + slack),
        "real_valued": real,
    }
    if real:
        rhs4 = 4.0 * L * prop * normT
        out["real_bound"] = rhs4
        out["real_passed"] = bool(lhs <= rhs4 + slack)
    return out


def staircase_discretization(f: LipschitzElement, delta: float, n: int | None = None) -> LipschitzElement:
    """Entrywise ``floor(f * n / delta) * delta / n`` (real and imaginary parts separately).

    Bins are half-open ``[k delta/n, (k+1) delta/n)``.  The result is a step
    function, so its Lipschitz constant is left uncertified (``None``).
    """
    if not delta > 0:
        raise ValidationError("delta must be positive")
    n = f.n if n is None else int(n)
    step = delta / n
    v = f.values
    g = _stair(v.real, step) + 1j * _stair(v.imag, step)
    return LipschitzElement(f.space, g, None, f.scalar_part)


SNAP_RTOL = 1e-12


def _stair(x, step):
    # quotients within SNAP_RTOL of an integer count as on the grid, so that
    # decimal inputs such as 0.3 with step 0.1 land in the intended bin
    q = x / step
    r = np.round(q)
    q = np.where(np.abs(q - r) <= SNAP_RTOL * np.maximum(1.0, np.abs(q)), r, q)
    return np.floor(q) * step


def staircase_certificate(T: FilteredOperator, f: LipschitzElement, slack_rel: float = 1e-12) -> dict:
    """Check the two staircase claims with ``delta = L * prop(T)``.

    (i)  ``||I_m (x) (f - g)|| <= delta``
    (ii) ``||[T (x) I_n, I_m (x) g]|| <= 2 delta ||T||`` (per real/imaginary part)
    """
    prop = T.propagation
    L = float(f.lipschitz_L)
    delta = L * prop
    if not delta > 0:
        raise ValidationError("staircase needs L * prop(T) > 0")
    normT = T.norm
    step = delta / f.n
    lhs_i = 0.0
    lhs_ii = 0.0
    for part in (np.real, np.imag):
        fv = part(f.values)
        if not np.any(fv):
            continue
        gv = _stair(fv, step)
        lhs_i = max(lhs_i, float(np.linalg.norm(fv - gv, ord=2, axis=(1, 2)).max()))
        lhs_ii = max(lhs_ii, _comm_norm(T, gv.astype(np.complex128), T.space))
    slack = slack_rel * max(normT, 1.0)
    return {
        "delta": delta,
        "claim_i_lhs": lhs_i,
        "claim_i_rhs": delta,
        "claim_i_passed": bool(lhs_i <= delta + slack),
        "claim_ii_lhs": lhs_ii,
        "claim_ii_rhs": 2 * delta * normT,
        "claim_ii_passed": bool(lhs_ii <= 2 * delta * normT + slack),
    }
