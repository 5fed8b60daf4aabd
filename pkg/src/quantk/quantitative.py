"""Quasiidempotents, the comparison map to honest idempotents and rank extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator

from . import _accel
from .blocks import BLOCK_DENSE_CAP, BlockOperator
from .errors import QuantkError, SpectralGapError, ValidationError
from .filtered import FilteredOperator, LipschitzElement, UnitizedOperator, lipschitz_ratio
from .linalg import le, lt, opnorm, opnorm_report
from .metric import build_metric_space
from .params import ParameterTuple, fmt

CONTOUR_NODES = 256
CONTOUR_RADIUS = 0.5
IDEMPOTENT_TOL = 1e-10
INTEGER_TOL = 1e-6


# ------------------------------------------------------------------ elements

_POINT = None


def _one_point():
    global _POINT
    if _POINT is None:
        _POINT = build_metric_space(["*"], np.zeros((1, 1)), name="point")
    return _POINT


def as_block(element) -> BlockOperator:
    """Coerce the supported element types to a single-level :class:`BlockOperator`.

    A bare matrix is read as an operator on a one-point space (propagation 0)
    with zero scalar part.
    """
    if isinstance(element, QuasiIdempotent):
        return element.element
    if isinstance(element, BlockOperator):
        return element
    if isinstance(element, UnitizedOperator):
        op = element.operator_part
        return BlockOperator.from_dense(op.space, op.internal_dim, element.full(),
                                        scalar=[[element.scalar_part]])
    if isinstance(element, FilteredOperator):
        return BlockOperator.from_dense(element.space, element.internal_dim, element.matrix)
    M = np.atleast_2d(np.asarray(element, dtype=np.complex128))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"element of shape {M.shape} is not a square matrix")
    return BlockOperator.from_dense(_one_point(), M.shape[0], M)


def _as_dense(element) -> np.ndarray:
    if isinstance(element, np.ndarray) or np.isscalar(element) or isinstance(element, list):
        return np.atleast_2d(np.asarray(element, dtype=np.complex128))
    return as_block(element).to_dense()


def defect_norm(e: BlockOperator) -> dict:
    """``||e^2 - e||`` with the method used (dense or matrix-free Lanczos)."""
    n = e.shape[0]
    if e.dense_blocks == 0:
        return (e @ e - e).norm_report()
    if n <= BLOCK_DENSE_CAP:
        M = e.to_dense()
        return opnorm_report(M @ M - M)
    adj = e.adjoint()

    def mv(x):
        y = e.matvec(x)
        return e.matvec(y) - y

    def rmv(x):
        y = adj.matvec(x)
        return adj.matvec(y) - y

    return opnorm_report(LinearOperator((n, n), matvec=mv, rmatvec=rmv, dtype=np.complex128))


# --------------------------------------------------------------- certificate

@dataclass
class QuasiCertificate:
    params: ParameterTuple
    norm_e2_minus_e: float
    propagation: float
    norm_e: float
    norm_1_minus_e: float
    defect_ok: bool
    propagation_ok: bool
    norm_ok: bool
    methods: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.defect_ok and self.propagation_ok and self.norm_ok

    def as_json(self) -> dict:
        return {
            "epsilon": fmt(self.params.epsilon),
            "r": fmt(self.params.r),
            "N": fmt(self.params.N),
            "norm_e2_minus_e": self.norm_e2_minus_e,
            "propagation": self.propagation,
            "norm_e": self.norm_e,
            "norm_1_minus_e": self.norm_1_minus_e,
            "checks": {
                "defect": {"lhs": self.norm_e2_minus_e, "rhs": fmt(self.params.epsilon),
                           "relation": "<", "passed": self.defect_ok},
                "propagation": {"lhs": self.propagation, "rhs": fmt(self.params.r),
                                "relation": "<=", "passed": self.propagation_ok},
                "norm": {"lhs": max(self.norm_e, self.norm_1_minus_e), "rhs": fmt(self.params.N),
                         "relation": "<=", "passed": self.norm_ok},
            },
            "valid": self.valid,
        }


def validate_quasiidempotent(element, params: ParameterTuple, *, prop_tol: float | None = None
                             ) -> QuasiCertificate:
    """Measure ``||e^2-e||``, ``prop(e)``, ``||e||``, ``||1-e||`` against ``params``.

    Failure is a certificate state, never an exception.  Measured floats are
    converted to rationals exactly and compared with the exact thresholds.
    """
    e = as_block(element)
    d = defect_norm(e)
    ne = e.norm_report()
    n1 = e.one_minus().norm_report()
    prop = e.propagation(prop_tol)
    # propagation is a distance read off the (float) metric, not a computed
    # quantity, so it is compared with r at the metric's own precision
    return QuasiCertificate(
        params=params,
        norm_e2_minus_e=float(d["value"]),
        propagation=float(prop),
        norm_e=float(ne["value"]),
        norm_1_minus_e=float(n1["value"]),
        defect_ok=lt(d["value"], params.epsilon),
        propagation_ok=bool(prop <= float(params.r)),
        norm_ok=le(max(ne["value"], n1["value"]), params.N),
        methods={"defect": d["method"], "norm_e": ne["method"], "norm_1_minus_e": n1["method"]},
    )


@dataclass
class QuasiIdempotent:
    element: BlockOperator
    params: ParameterTuple
    certificate: QuasiCertificate

    @property
    def valid(self) -> bool:
        return self.certificate.valid


def certify(element, params: ParameterTuple, *, require: bool = False,
            what: str = "element") -> QuasiIdempotent:
    """Wrap ``element`` with its certificate; ``require`` turns failure into an error."""
    from .errors import CertificationError

    e = as_block(element)
    cert = validate_quasiidempotent(e, params)
    if require and not cert.valid:
        raise CertificationError(f"{what} is not an (epsilon, r, N)-quasiidempotent at "
                                 f"{params.as_json()}", cert.as_json())
    return QuasiIdempotent(e, params, cert)


@dataclass
class KClassQuantitative:
    """Formal difference ``[plus] - [minus]``."""

    plus: QuasiIdempotent
    minus: QuasiIdempotent

    def check(self, *, reduced: bool = True, atol: float = 0.0) -> None:
        if self.plus.params != self.minus.params:
            raise ValidationError("plus and minus are certified at different parameters")
        if reduced:
            a, b = self.plus.element.scalar, self.minus.element.scalar
            if a.shape != b.shape or np.abs(a - b).max(initial=0.0) > atol:
                raise ValidationError("scalar parts of plus and minus differ")


# ---------------------------------------------------------------------- kappa

def _fro(M) -> float:
    return float(np.linalg.norm(M))


def kappa_iteration(e, *, max_iter: int = 100) -> tuple[np.ndarray, dict]:
    """``e <- 3e^2 - 2e^3`` until the defect stops improving."""
    E = _as_dense(e).copy()
    history = []
    for k in range(max_iter):
        E2 = E @ E
        dfro = _fro(E2 - E)
        history.append(dfro)
        if dfro <= 1e-15 * max(1.0, _fro(E)) or (k >= 2 and dfro >= history[-2] and dfro < 1e-8):
            return E, {"iterations": k, "defect_history": history}
        if not math.isfinite(dfro) or dfro > 1e12:
            break
        E = 3.0 * E2 - 2.0 * (E2 @ E)
    raise SpectralGapError("cubic iteration did not converge",
                           {"iterations": len(history), "defect_history": history[-10:]})


def kappa_contour(e, *, nodes: int = CONTOUR_NODES, radius: float = CONTOUR_RADIUS,
                  center: complex = 1.0) -> np.ndarray:
    """Trapezoid rule for ``(2 pi i)^-1 \\oint (z - e)^-1 dz`` on ``|z - center| = radius``."""
    E = _as_dense(e)
    n = E.shape[0]
    I = np.eye(n)
    out = np.zeros((n, n), dtype=np.complex128)
    for j in range(nodes):
        w = radius * np.exp(2j * np.pi * (j + 0.5) / nodes)
        R = np.linalg.solve((center + w) * I - E, I)
        out += w * R
    return out / nodes


def kappa(e, *, method: str = "iteration", check: bool = True) -> np.ndarray:
    """Idempotent attached to a quasiidempotent with ``||e^2 - e|| < 1/4``.

    ``method`` is ``"iteration"`` (cubic purification) or ``"contour"``
    (Riesz projector by quadrature).  Both agree for valid input.
    """
    E = _as_dense(e)
    if check:
        pre = opnorm(E @ E - E)
        if not pre < 0.25:
            raise SpectralGapError(f"||e^2 - e|| = {pre:.6g} is not below 1/4",
                                   {"norm_e2_minus_e": pre})
    if method == "iteration":
        K, info = kappa_iteration(E)
    elif method == "contour":
        K, info = kappa_contour(E), {}
    else:
        raise ValidationError(f"unknown kappa method {method!r}")
    if check:
        res = opnorm(K @ K - K)
        if not res <= IDEMPOTENT_TOL:
            raise SpectralGapError(f"kappa result is not idempotent ({res:.3g})",
                                   dict(info, residual=res))
    return K


def _f0(c: complex) -> float:
    return 1.0 if c.real > 0.5 else 0.0


def kappa_trace(e, *, method: str = "iteration") -> tuple[float, dict]:
    """``trace kappa(e)`` with exact deflation.

    Indices whose off-diagonal row or column is exactly zero (repeatedly,
    within the surviving set) split off as ``1 x 1`` triangular blocks and
    contribute ``f0(e_jj)``.  The remainder splits into connected components
    and each is purified densely.
    """
    if isinstance(e, np.ndarray):
        S = sp.csr_matrix(np.atleast_2d(e))
    else:
        S = as_block(e).to_sparse()
    n = S.shape[0]
    coo = S.tocoo()
    removed = _accel.peel(n, coo.row, coo.col)
    diag = S.diagonal()
    gaps = [abs(c * c - c) for c in diag[removed]]
    if gaps and max(gaps) >= 0.25:
        raise SpectralGapError("a deflated diagonal entry is not near 0 or 1",
                               {"max_entry_defect": max(gaps)})
    trace = float(sum(_f0(c) for c in diag[removed]))
    keep = np.flatnonzero(~removed)
    sizes = []
    if keep.size:
        sub = S[keep][:, keep]
        pattern = (abs(sub) + abs(sub).T).tocsr()
        ncomp, labels = connected_components(pattern, directed=False)
        for c in range(ncomp):
            idx = np.flatnonzero(labels == c)
            blk = sub[idx][:, idx].toarray()
            sizes.append(int(idx.size))
            trace += float(np.trace(kappa(blk, method=method)).real)
    return trace, {"dimension": n, "deflated": int(removed.sum()),
                   "components": sorted(sizes, reverse=True)}


def class_rank(c: KClassQuantitative, *, tol: float = INTEGER_TOL, method: str = "iteration",
               with_report: bool = False):
    """Nearest integer to ``trace kappa(plus) - trace kappa(minus)``."""
    c.check()
    for side in (c.plus, c.minus):
        d = side.certificate.norm_e2_minus_e
        if not d < 0.25:
            raise SpectralGapError(f"class side has ||e^2 - e|| = {d:.6g}, not below 1/4",
                                   {"norm_e2_minus_e": d})
    tp, ip = kappa_trace(c.plus.element, method=method)
    tm, im = kappa_trace(c.minus.element, method=method)
    raw = tp - tm
    k = int(round(raw))
    if abs(raw - k) > tol:
        raise QuantkError(f"trace difference {raw!r} is not within {tol} of an integer")
    if with_report:
        return k, {"trace_plus": tp, "trace_minus": tm, "raw": raw, "plus": ip, "minus": im}
    return k


# --------------------------------------------------------- Lipschitz smoothing

def _eps_for_defect(eta: float) -> float:
    # smallest eps >= 0 with eps (3 + eps) >= eta
    return (-3.0 + math.sqrt(9.0 + 4.0 * eta)) / 2.0


def smooth_lipschitz_projection(p: LipschitzElement, lam: float, eps: float | None = None,
                                *, rtol: float = 1e-9) -> tuple[LipschitzElement, dict]:
    """Projection-valued ``q = Theta(f)`` near ``p`` with Lipschitz constant ``<= 2L + lam``.

    ``f`` is the pointwise Hermitian part of ``p``.  ``eps`` defaults to the
    smallest value consistent with the measured defect of ``f``; with
    ``delta = sqrt(eps (3 + eps))`` the achievable constant is
    ``2L (1 - 2 delta)^-2``, which must not exceed ``2L + lam``.
    """
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    L = float(p.lipschitz_L)
    v = p.values
    f = 0.5 * (v + np.conj(np.transpose(v, (0, 2, 1))))
    dist_fp = float(np.linalg.norm(f - v, ord=2, axis=(1, 2)).max())
    f_defect = float(np.linalg.norm(f @ f - f, ord=2, axis=(1, 2)).max())
    needed = max(dist_fp, _eps_for_defect(f_defect))
    if eps is None:
        eps = needed
    elif eps < needed * (1 - 1e-12):
        raise ValidationError(f"eps={eps} is below the measured distance {needed}")
    delta2 = eps * (3.0 + eps)
    diag = {"epsilon": eps, "delta_squared": delta2, "distance_f_p": dist_fp,
            "defect_f": f_defect, "L": L, "lambda": lam}
    if delta2 > 1.0 / 16.0:
        raise ValidationError("eps (3 + eps) exceeds 1/16", diag)
    delta = math.sqrt(delta2)
    bound = 2.0 * L / (1.0 - 2.0 * delta) ** 2
    diag["achievable_bound"] = bound
    diag["requested_bound"] = 2.0 * L + lam
    if bound > 2.0 * L + lam:
        raise ValidationError(
            f"lambda={lam} is too small: the minimum achievable constant is {bound!r}", diag)
    q = np.stack([kappa(x, check=False) for x in f]) if len(f) else f.copy()
    q = 0.5 * (q + np.conj(np.transpose(q, (0, 2, 1))))
    proj = float(np.linalg.norm(q @ q - q, ord=2, axis=(1, 2)).max()) if len(q) else 0.0
    measured, i, j = lipschitz_ratio(p.space, q)
    dist_qp = float(np.linalg.norm(q - v, ord=2, axis=(1, 2)).max()) if len(q) else 0.0
    slack = rtol * max(1.0, bound)
    report = dict(diag)
    report.update({
        "projection_defect": proj,
        "projection_ok": proj <= IDEMPOTENT_TOL,
        "measured_lipschitz": measured,
        "witness": None if i < 0 else [p.space.point_ids[i], p.space.point_ids[j]],
        "sharp_bound_ok": measured <= bound + slack,
        "lipschitz_ok": measured <= 2.0 * L + lam + slack,
        "distance_q_p": dist_qp,
        "distance_ok": dist_qp < 1.0,
    })
    report["passed"] = bool(report["projection_ok"] and report["sharp_bound_ok"]
                            and report["lipschitz_ok"] and report["distance_ok"])
    out = LipschitzElement(p.space, q, min(bound, 2.0 * L + lam), p.scalar_part)
    return out, report
