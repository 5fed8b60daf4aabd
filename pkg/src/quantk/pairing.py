"""Difference construction and the pairing with Lipschitz projections."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .blocks import BlockOperator
from .errors import CertificationError, PairabilityError, ValidationError
from .filtered import LipschitzElement
from .linalg import lt
from .params import (ParameterTuple, basic_product_params, derived_params, difference_params, fmt,
                     inner_pairing_params, is_pairable, outer_pairing_params, pairability_sides)
from .quantitative import (KClassQuantitative, QuasiIdempotent, as_block, certify, class_rank)

CLOSED_FORM_TOL = 1e-12
CLOSED_FORM_CHECK_CAP = 8192


def _wrap(x):
    dense = not isinstance(x, (BlockOperator, QuasiIdempotent))
    return as_block(x), dense


def _unwrap(M: BlockOperator, dense: bool):
    return M.to_dense() if dense else M


def _layout(ref: BlockOperator, rows):
    return BlockOperator.assemble(ref.space, ref.fiber, rows)


def z_matrix(beta):
    """``[[b, 0, 1-b, 0], [1-b, 0, 0, b], [0, 0, b, 1-b], [0, 1, 0, 0]]``."""
    b, dense = _wrap(beta)
    one, c = b.one(), b.one_minus()
    return _unwrap(_layout(b, [[b, None, c, None], [c, None, None, b],
                               [None, None, b, c], [None, one, None, None]]), dense)


def z_transpose(beta):
    """Block transpose of :func:`z_matrix` (entries are not transposed)."""
    b, dense = _wrap(beta)
    one, c = b.one(), b.one_minus()
    return _unwrap(_layout(b, [[b, c, None, None], [None, None, None, one],
                               [c, None, b, None], [None, b, c, None]]), dense)


def y_matrix(alpha, beta):
    """``diag(a, 1-b, 0, 0)``."""
    a, dense = _wrap(alpha)
    b, _ = _wrap(beta)
    if a.levels != b.levels or a.b != b.b:
        raise ValidationError("alpha and beta have different block sizes")
    return _unwrap(_layout(a, [[a, None, None, None], [None, b.one_minus(), None, None],
                               [None, None, None, None], [None, None, None, None]]), dense)


def difference_closed_form(alpha, beta):
    """Entrywise expansion of ``Z^T Y Z`` valid for arbitrary ``alpha``, ``beta``.

    With ``c = 1 - beta``::

        [[b a b + c^3,   0, b a c, c^2 b],
         [0,             0, 0,     0    ],
         [c a b,         0, c a c, 0    ],
         [b c^2,         0, 0,     b c b]]
    """
    a, dense = _wrap(alpha)
    b, _ = _wrap(beta)
    c = b.one_minus()
    ab, ac, c2 = a @ b, a @ c, c @ c
    rows = [[b @ ab + c2 @ c, None, b @ ac, c2 @ b],
            [None, None, None, None],
            [c @ ab, None, c @ ac, None],
            [b @ c2, None, None, b @ c @ b]]
    return _unwrap(_layout(a, rows), dense)


def difference_closed_form_displayed(alpha, beta):
    """The printed block formula, kept verbatim for comparison only.

    With ``x = alpha - beta``::

        [[1 + b x b, 0, b x,         0],
         [0,         0, 0,           0],
         [x a b,     0, c x c,       0],
         [0,         0, 0,           0]]

    It disagrees with ``Z^T Y Z`` even for exact idempotents: the (1,3) entry
    lacks a trailing ``1 - b`` and the (3,1) entry has ``x`` where ``1 - b``
    belongs.  Nothing in the package relies on it.
    """
    a, dense = _wrap(alpha)
    b, _ = _wrap(beta)
    c, x = b.one_minus(), a - b
    rows = [[b.one() + b @ x @ b, None, b @ x, None],
            [None, None, None, None],
            [x @ a @ b, None, c @ x @ c, None],
            [None, None, None, None]]
    return _unwrap(_layout(a, rows), dense)


def difference_matrix(alpha, beta):
    """``d(alpha, beta) = Z^T Y Z`` by explicit block products."""
    a, dense = _wrap(alpha)
    b, _ = _wrap(beta)
    Z, ZT, Y = z_matrix(b), z_transpose(b), y_matrix(a, b)
    return _unwrap(ZT @ (Y @ Z), dense)


def _max_abs(D: BlockOperator) -> float:
    worst = 0.0
    for row in D.grid:
        for blk in row:
            if blk is not None and blk.size:
                worst = max(worst, float(np.abs(blk).max()))
    return worst


def _max_abs_diff(A: BlockOperator, B: BlockOperator) -> float:
    return _max_abs(A - B)


def ztz_defect(beta) -> float:
    """``||Z^T Z - I_4||``."""
    b, _ = _wrap(beta)
    M = z_transpose(b) @ z_matrix(b)
    return (M - M.one()).norm()


def _ideal_check(a: BlockOperator, b: BlockOperator, atol=0.0):
    if a.levels != b.levels or a.fiber != b.fiber:
        raise ValidationError("alpha and beta have different block sizes")
    gap = np.abs(a.scalar - b.scalar).max(initial=0.0)
    if gap > atol:
        raise ValidationError(f"alpha - beta has non-zero scalar part (max entry {gap:.3g})")


@dataclass
class DifferenceResult:
    element: QuasiIdempotent
    closed_form_error: float | None
    ztz_defect: float | None
    ztz_bound: Fraction
    scalar_pattern_ok: bool

    def as_json(self) -> dict:
        out = {"certificate": self.element.certificate.as_json(),
               "closed_form_max_abs_diff": self.closed_form_error,
               "scalar_pattern_ok": self.scalar_pattern_ok}
        if self.ztz_defect is not None:
            out["ztz_minus_identity"] = {"lhs": self.ztz_defect, "rhs": fmt(self.ztz_bound),
                                         "relation": "<",
                                         "passed": lt(self.ztz_defect, self.ztz_bound)}
        return out


def difference_construction(alpha: QuasiIdempotent, beta: QuasiIdempotent, *,
                            check_closed_form: bool | None = None,
                            check_ztz: bool | None = None,
                            params: ParameterTuple | None = None) -> DifferenceResult:
    """``d(alpha, beta)`` certified at ``(2^8 N^4 eps, 3r, 16 N^3)``.

    ``params`` overrides the input parameters (for example when the inputs
    are certified at different budgets along a chain).
    """
    a, b = alpha.element, beta.element
    _ideal_check(a, b)
    p = params or alpha.params
    d = difference_matrix(a, b)
    big = d.shape[0] > CLOSED_FORM_CHECK_CAP
    err = None
    if check_closed_form if check_closed_form is not None else not big:
        ref = difference_closed_form(a, b)
        # entries are cubic in the inputs; compare relative to that scale
        scale = max(1.0, _max_abs(a), _max_abs(b)) ** 3
        err = _max_abs_diff(d, ref) / scale
    ztz = ztz_defect(b) if (check_ztz if check_ztz is not None else not big) else None
    e, r, N = difference_params(p.epsilon, p.r, p.N)
    out = certify(d, ParameterTuple(e, r, N))
    L = a.levels
    pattern = np.zeros((4, 4))
    pattern[0, 0] = 1
    scalar_ok = bool(np.abs(d.scalar - np.kron(pattern, np.eye(L))).max(initial=0.0) <= 1e-12) \
        if _idempotent_scalar(b.scalar) else False
    return DifferenceResult(out, err, ztz, 8 * p.epsilon, scalar_ok)


def _idempotent_scalar(s, atol=1e-12) -> bool:
    return bool(np.abs(s @ s - s).max(initial=0.0) <= atol)


# -------------------------------------------------------------- basic product

def lipschitz_block(p: LipschitzElement, fiber: int, m: int) -> BlockOperator:
    """``I_m (x) p`` as a ``(m n)``-level grid of multiplication operators."""
    n = p.n
    grid = [[None] * (m * n) for _ in range(m * n)]
    for i in range(m):
        for a in range(n):
            for c in range(n):
                vals = p.values[:, a, c]
                if np.any(vals):
                    grid[i * n + a][i * n + c] = np.repeat(vals, fiber)
    return BlockOperator(p.space, fiber, grid, np.kron(np.eye(m), p.scalar_part))


def basic_product(P: QuasiIdempotent, p: LipschitzElement, *, proj_tol: float = 1e-10,
                  require: bool = False) -> QuasiIdempotent:
    """``(P (x) I_n)(I_m (x) p)`` certified at ``(8 r N^2 L + eps, r, N)``."""
    if p.space.point_ids != P.element.space.point_ids:
        raise ValidationError("P and p live over different spaces")
    if p.projection_defect() > proj_tol:
        raise ValidationError(f"p is not projection-valued (defect {p.projection_defect():.3g})")
    el = P.element
    prod = el.kron_levels(p.n) @ lipschitz_block(p, el.fiber, el.levels)
    par = P.params
    e, r, N = basic_product_params(par.epsilon, par.r, par.N, Fraction(p.lipschitz_L))
    return certify(prod, ParameterTuple(e, r, N, Fraction(p.lipschitz_L)), require=require,
                   what="basic product")


# -------------------------------------------------------------------- pairing

@dataclass
class LipschitzClass:
    """Formal difference ``[p1] - [p2]`` of Lipschitz projections."""

    p1: LipschitzElement
    p2: LipschitzElement

    def __post_init__(self):
        if self.p1.n != self.p2.n:
            raise ValidationError("p1 and p2 have different matrix sizes")
        if np.abs(self.p1.scalar_part - self.p2.scalar_part).max(initial=0.0) > 0:
            raise ValidationError("p1 - p2 must vanish at infinity (equal scalar parts)")

    @property
    def L(self) -> float:
        return max(float(self.p1.lipschitz_L), float(self.p2.lipschitz_L))


def _cert_exp(x: QuasiIdempotent):
    return x.certificate.as_json()


def pair_classes(qc: KClassQuantitative, lc: LipschitzClass, params: ParameterTuple | None = None,
                 *, require: bool = True, check_closed_form: bool | None = None):
    """Double difference construction; returns ``(class, report)``.

    The class is ``[d(P_1p, P_2p)] - [e11-pattern (x) I_{4mn}]`` over
    compacts-plus-scalars.  Intermediates are certified along the chain
    ``(8rN^2L + eps, r, N) -> (2^11 r N^6 L + 2^8 N^4 eps, 3r, 16N^3)
    -> (2^35 r N^18 L + 2^32 N^16 eps, 9r, 2^16 N^9)``.
    """
    base = params or qc.plus.params
    if base.L is None:
        base = ParameterTuple(base.epsilon, base.r, base.N, Fraction(lc.L))
    report = {"params": base.as_json(), "inputs": {"plus": _cert_exp(qc.plus),
                                                   "minus": _cert_exp(qc.minus)}}
    inner = ParameterTuple(*inner_pairing_params(base))
    outer = ParameterTuple(*outer_pairing_params(base))
    firsts = []
    for tag, P in (("plus", qc.plus), ("minus", qc.minus)):
        A = basic_product(P, lc.p1)
        B = basic_product(P, lc.p2)
        for lab, X in (("p1", A), ("p2", B)):
            report[f"basic_{tag}_{lab}"] = _cert_exp(X)
        res = difference_construction(A, B, check_closed_form=check_closed_form,
                                      check_ztz=False, params=A.params)
        X = certify(res.element.element, inner)
        report[f"first_difference_{tag}"] = dict(_cert_exp(X),
                                                 closed_form_max_abs_diff=res.closed_form_error)
        if require and not X.valid:
            raise CertificationError(f"first difference ({tag}) fails its certificate", report)
        firsts.append(X)
    res = difference_construction(firsts[0], firsts[1], check_closed_form=check_closed_form,
                                  check_ztz=False, params=inner)
    final = certify(res.element.element, outer)
    report["final"] = dict(_cert_exp(final), closed_form_max_abs_diff=res.closed_form_error)
    if require and not final.valid:
        raise CertificationError("final difference fails its certificate", report)
    el = final.element
    ref = BlockOperator.from_scalar(el.space, el.fiber, el.scalar)
    ref_q = certify(ref, outer)
    report["reference_scalar_is_e11_pattern"] = bool(
        np.abs(el.scalar - _e11_pattern(el.levels // 4)).max(initial=0.0) <= 1e-12)
    return KClassQuantitative(final, ref_q), report


def _e11_pattern(k: int) -> np.ndarray:
    pat = np.zeros((4, 4))
    pat[0, 0] = 1
    return np.kron(pat, np.eye(k))


def pairability_report(params: ParameterTuple) -> dict:
    lhs, rhs = pairability_sides(params)
    dp = derived_params(params)
    return {"lhs": fmt(lhs), "rhs": fmt(rhs), "relation": "<", "pairable": lhs < rhs,
            "epsilon_prime": fmt(dp.epsilon_prime),
            "epsilon_prime_below_1_16": dp.epsilon_prime < Fraction(1, 16)}


def pair_to_integer(qc: KClassQuantitative, lc: LipschitzClass, params: ParameterTuple, *,
                    override: bool = False, with_report: bool = False,
                    check_closed_form: bool | None = None):
    """Integer obtained by pairing a quantitative class with a Lipschitz class.

    Without ``override`` the parameters must be pairable.  With ``override``
    the measured defect of the final element must be below ``1/4`` instead,
    which is what the comparison map needs.
    """
    pr = pairability_report(params)
    if not pr["pairable"] and not override:
        raise PairabilityError("parameters are not pairable", pr)
    cls, report = pair_classes(qc, lc, params, require=not override,
                               check_closed_form=check_closed_form)
    report["pairability"] = pr
    report["override"] = override
    measured = cls.plus.certificate.norm_e2_minus_e
    report["final_defect"] = {"lhs": measured, "rhs": "1/4", "relation": "<",
                              "passed": lt(measured, Fraction(1, 4))}
    if not report["final_defect"]["passed"]:
        raise CertificationError("final element is too far from an idempotent", report)
    k, info = class_rank(cls, with_report=True)
    report["class_rank"] = info
    report["integer"] = k
    return (k, report) if with_report else k


__all__ = [
    "z_matrix", "z_transpose", "y_matrix", "difference_matrix", "difference_closed_form",
    "difference_closed_form_displayed",
    "ztz_defect", "difference_construction", "DifferenceResult", "basic_product",
    "lipschitz_block", "LipschitzClass", "pair_classes", "pair_to_integer",
    "pairability_report", "is_pairable", "derived_params",
]
