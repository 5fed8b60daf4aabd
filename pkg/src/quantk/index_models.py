"""Graded lattice Dirac-type operators, their quantitative index and a kernel oracle.

The shipped model is a two-dimensional Wilson-Dirac operator on a discrete
torus with a complex mass whose phase winds around the basepoint (a
Jackiw-Rossi vortex).  ``flux = q`` uses ``|q|`` flavours, each carrying one
vortex of sign ``sign(q)``, so the topological index is ``q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import chebyshev as C

from .blocks import BlockOperator
from .errors import CertificationError, SpectralGapError, ValidationError
from .filtered import FilteredOperator, LipschitzElement, lipschitz_element
from .metric import FiniteMetricSpace, torus_space
from .pairing import LipschitzClass, pair_to_integer
from .params import ParameterTuple
from .quantitative import KClassQuantitative, certify

KERNEL_RTOL = 1e-8
KERNEL_GAP = 100.0
SELF_ADJOINT_TOL = 1e-12

_s0 = np.eye(2, dtype=np.complex128)
_s1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_s2 = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_s3 = np.diag([1.0, -1.0]).astype(np.complex128)
GAMMAS = (np.kron(_s1, _s1), np.kron(_s1, _s2), np.kron(_s1, _s3), np.kron(_s2, _s0))
CHIRALITY = np.kron(_s3, _s0)


# ------------------------------------------------------------------ operators

@dataclass(frozen=True, eq=False)
class GradedOperator:
    """Odd self-adjoint operator on ``points x C^k`` with a ``+-1`` grading."""

    space: FiniteMetricSpace
    internal_dim: int
    matrix: sp.csr_matrix
    grading: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = sp.csr_matrix(self.matrix, dtype=np.complex128)
        n = len(self.space) * self.internal_dim
        if M.shape != (n, n):
            raise ValidationError(f"operator of shape {M.shape} does not fit ({n}, {n})")
        g = np.asarray(self.grading, dtype=np.int8).ravel()
        if g.shape != (n,) or not np.all(np.abs(g) == 1):
            raise ValidationError("grading must be a +-1 vector over all indices")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "grading", g)
        scale = max(1.0, abs(M).max() if M.nnz else 0.0)
        herm = abs(M - M.conj().T).max() if M.nnz else 0.0
        if herm > SELF_ADJOINT_TOL * scale:
            raise ValidationError(f"operator is not self-adjoint (max deviation {herm:.3g})")
        plus, minus = g > 0, g < 0
        even = max(_max_abs(M[plus][:, plus]), _max_abs(M[minus][:, minus]))
        if even > SELF_ADJOINT_TOL * scale:
            raise ValidationError(f"operator is not odd (even block entry {even:.3g})")

    @property
    def plus(self) -> np.ndarray:
        return np.flatnonzero(self.grading > 0)

    @property
    def minus(self) -> np.ndarray:
        return np.flatnonzero(self.grading < 0)

    @property
    def d_plus(self) -> sp.csr_matrix:
        """``D^+ : H^+ -> H^-``."""
        return self.matrix[self.minus][:, self.plus]

    @property
    def d_minus(self) -> sp.csr_matrix:
        """``D^- : H^- -> H^+``."""
        return self.matrix[self.plus][:, self.minus]

    @cached_property
    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @cached_property
    def spectrum(self) -> tuple:
        """Eigenvalues and eigenvectors (dense Hermitian solver)."""
        return np.linalg.eigh(self.dense)

    @cached_property
    def norm(self) -> float:
        return float(np.abs(self.spectrum[0]).max()) if self.matrix.shape[0] else 0.0

    def filtered(self) -> FilteredOperator:
        return FilteredOperator(self.space, self.internal_dim, self.dense)

    @cached_property
    def propagation(self) -> float:
        return self.filtered().propagation

    def flip_grading(self) -> "GradedOperator":
        return GradedOperator(self.space, self.internal_dim, self.matrix, -self.grading,
                              dict(self.meta, grading_flipped=not self.meta.get("grading_flipped",
                                                                                 False)))

    def split_fiber(self) -> int:
        """Fiber size of ``H^+`` when every point carries equally many of each sign."""
        k = self.internal_dim
        g = self.grading.reshape(len(self.space), k)
        counts = (g > 0).sum(axis=1)
        if not np.all(counts == counts[0]) or 2 * counts[0] != k:
            raise ValidationError("grading does not split every fiber in half")
        return int(counts[0])


def _max_abs(M) -> float:
    return float(abs(M).max()) if M.nnz else 0.0


def _vortex_mass(size: int, sign: int, mass: float, sharpness: float):
    x = np.repeat(np.arange(size), size)
    y = np.tile(np.arange(size), size)
    t1, t2 = 2 * np.pi * x / size, 2 * np.pi * y / size
    g = (np.sin(t1 / 2) * np.cos(t2 / 2) + 1j * np.cos(t1 / 2) * np.sin(t2 / 2)) \
        * np.exp(0.5j * (t1 + t2))
    a = np.abs(g)
    phase = np.where(a > 0, g / np.where(a > 0, a, 1.0), 0.0)
    if sign < 0:
        phase = np.conj(phase)
    return mass * phase * np.tanh(sharpness * a)


def _shifts(size: int):
    n = size * size
    x = np.repeat(np.arange(size), size)
    y = np.tile(np.arange(size), size)
    at = lambda a, b: (a % size) * size + (b % size)  # noqa: E731
    T1 = sp.csr_matrix((np.ones(n), (at(x + 1, y), at(x, y))), shape=(n, n))
    T2 = sp.csr_matrix((np.ones(n), (at(x, y + 1), at(x, y))), shape=(n, n))
    return T1, T2


def wilson_dirac(size: int, mass_profile: np.ndarray, wilson: float) -> sp.csr_matrix:
    """One flavour: ``sum_i S_i g_i + (W + Re m) g_3 + (Im m) g_4`` on ``C^4``."""
    n = size * size
    T1, T2 = _shifts(size)
    I = sp.identity(n, format="csr")
    S1 = (T1 - T1.T) / 2j
    S2 = (T2 - T2.T) / 2j
    W = wilson * (2 * I - (T1 + T1.T) / 2 - (T2 + T2.T) / 2)
    g1, g2, g3, g4 = GAMMAS
    D = sp.kron(S1, g1) + sp.kron(S2, g2) + sp.kron(W + sp.diags(mass_profile.real), g3) \
        + sp.kron(sp.diags(mass_profile.imag), g4)
    return sp.csr_matrix(D)


def bott_region(size: int) -> np.ndarray:
    """Sites within Euclidean torus distance ``size * sqrt(2) / 4`` of the basepoint."""
    x = np.repeat(np.arange(size), size)
    y = np.tile(np.arange(size), size)
    dx, dy = np.minimum(x, size - x), np.minimum(y, size - y)
    return np.sqrt(dx ** 2 + dy ** 2) < size * math.sqrt(2) / 4


def build_wilson_torus(size: int, flux: int, *, mass: float = 2.0, wilson: float = 1.5,
                       sharpness: float = 3.0):
    """Graded torus model and its rank-one Bott-type projection ``1_B``.

    Returns ``(GradedOperator, LipschitzElement)``.
    """
    size, flux = int(size), int(flux)
    if size < 4:
        raise ValidationError("size must be at least 4")
    flavours = max(1, abs(flux))
    n = size * size
    if flux == 0:
        profile = np.full(n, mass, dtype=np.complex128)
    else:
        profile = _vortex_mass(size, 1 if flux > 0 else -1, mass, sharpness)
    D1 = wilson_dirac(size, profile, wilson)
    # internal index (flavour, spinor)
    D = _kron_flavour(D1, n, flavours)
    k = 4 * flavours
    grading = np.tile(np.tile(np.diag(CHIRALITY).real.astype(np.int8), flavours), n)
    space = torus_space(size)
    G = GradedOperator(space, k, D, grading,
                       {"model": "wilson-torus", "size": size, "flux": flux, "flavours": flavours,
                        "mass": mass, "wilson": wilson, "sharpness": sharpness})
    region = bott_region(size).astype(np.float64)
    p = lipschitz_element(space, region)
    return G, p


def _kron_flavour(D1: sp.csr_matrix, n: int, f: int) -> sp.csr_matrix:
    if f == 1:
        return D1
    coo = D1.tocoo()
    si, ai = np.divmod(coo.row, 4)
    sj, aj = np.divmod(coo.col, 4)
    rows = np.concatenate([si * 4 * f + c * 4 + ai for c in range(f)])
    cols = np.concatenate([sj * 4 * f + c * 4 + aj for c in range(f)])
    vals = np.tile(coo.data, f)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n * 4 * f, n * 4 * f))


def single_site_operator(eigenvalue: float = 1.0) -> GradedOperator:
    """``[[0, t], [t, 0]]`` on one point: spectrum ``{-t, t}``."""
    space = _one_point_space()
    M = sp.csr_matrix(np.array([[0, eigenvalue], [eigenvalue, 0]], dtype=np.complex128))
    return GradedOperator(space, 2, M, np.array([1, -1]), {"model": "single-site"})


def _one_point_space():
    from .metric import build_metric_space

    return build_metric_space([0], np.zeros((1, 1)), name="point")


# --------------------------------------------------------- normalizing function

@dataclass(eq=False)
class NormalizingApproximant:
    """Odd polynomial ``chi(x) = sum_k c_k T_k(x / scale)`` and ``chi(D)``."""

    coefficients: np.ndarray
    degree: int
    scale: float
    gap: float
    sup_norm: float
    matrix: np.ndarray
    flatness: float
    propagation: float
    propagation_bound: float

    def __call__(self, x):
        return C.chebval(np.asarray(x) / self.scale, self.coefficients)

    def as_json(self) -> dict:
        return {"degree": self.degree, "scale": self.scale, "gap": self.gap,
                "sup_norm": {"lhs": self.sup_norm, "rhs": 1.0, "relation": "<=",
                             "passed": self.sup_norm <= 1.0},
                "flatness": self.flatness,
                "propagation": {"lhs": self.propagation, "rhs": self.propagation_bound,
                                "relation": "<=",
                                "passed": self.propagation <= self.propagation_bound}}


def _odd_fit(target, degree: int) -> np.ndarray:
    nodes = 4 * degree + 4
    t = np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes)
    c = C.chebfit(t, target(t), degree)
    c[0::2] = 0.0
    return c


def _sup_on_interval(c: np.ndarray) -> float:
    """Max of ``|p|`` on ``[-1, 1]``: endpoints and real critical points."""
    cand = [-1.0, 1.0]
    dc = C.chebder(c)
    if np.any(dc):
        for r in C.chebroots(dc):
            if abs(r.imag) < 1e-9 and -1 <= r.real <= 1:
                cand.append(r.real)
    return float(np.abs(C.chebval(np.array(cand), c)).max())


def _clenshaw(Ds: sp.csr_matrix, c: np.ndarray) -> np.ndarray:
    n = Ds.shape[0]
    I = np.eye(n, dtype=np.complex128)
    b1 = np.zeros((n, n), dtype=np.complex128)
    b2 = np.zeros_like(b1)
    for k in range(len(c) - 1, 0, -1):
        b0 = 2 * (Ds @ b1) - b2
        if c[k]:
            b0 += c[k] * I
        b2, b1 = b1, b0
    return Ds @ b1 - b2 + c[0] * I


STEEPNESS = 3.0
AUTO_STEEPNESS = tuple(3.0 * 1.25 ** i for i in range(13))


def _fit(w, scale, gap, degree, steepness):
    c = _odd_fit(lambda t: np.tanh(steepness * t * scale / gap), degree)
    c = c / _sup_on_interval(c)
    flat = float(np.abs(C.chebval(w / scale, c) ** 2 - 1).max()) if w.size else 0.0
    return c, flat


def normalizing_approximant(G: GradedOperator, r: float | None = None, degree_budget: int = 41,
                            *, gap: float | None = None, max_flatness: float | None = None,
                            steepness=STEEPNESS) -> NormalizingApproximant:
    """Odd Chebyshev approximation of ``tanh(s x / gap)`` on ``[-||D||, ||D||]``.

    The coefficients are rescaled so ``sup |chi| = 1`` on the interval.
    ``gap`` defaults to the smallest ``|eigenvalue|`` of ``D``.  With ``r``
    given, ``degree_budget * prop(D) <= r`` is enforced.  ``steepness="auto"``
    picks ``s`` from :data:`AUTO_STEEPNESS` to minimize the flatness, so the
    flatness of a gapped operator keeps falling as the budget grows.
    """
    if degree_budget < 1:
        raise ValidationError("degree budget must be >= 1")
    prop = G.propagation
    degree = degree_budget if degree_budget % 2 else degree_budget - 1
    w = G.spectrum[0]
    absw = np.sort(np.abs(w))
    if r is not None and degree * prop > r:
        best = int(r // prop) if prop > 0 else degree
        raise ValidationError(
            f"degree {degree} with prop(D) = {prop} exceeds r = {r}",
            {"max_degree": best,
             "min_flatness": _flatness_for(G, best if best % 2 else best - 1, gap, steepness)
             if best >= 1 else None})
    scale = G.norm if G.norm > 0 else 1.0
    gap = float(gap if gap is not None else (absw[0] if absw.size else 1.0))
    if not gap > 0:
        raise SpectralGapError("normalizing function needs a positive gap", {"gap": gap})
    candidates = AUTO_STEEPNESS if steepness == "auto" else (float(steepness),)
    c, flat = min((_fit(w, scale, gap, degree, s) for s in candidates), key=lambda cf: cf[1])
    X = _clenshaw(G.matrix / scale, c)
    fo = FilteredOperator(G.space, G.internal_dim, X)
    approx = NormalizingApproximant(c, degree, scale, gap, _sup_on_interval(c), X, flat,
                                    fo.propagation, degree * prop)
    if max_flatness is not None and flat > max_flatness:
        raise SpectralGapError(f"flatness {flat:.3g} exceeds the requested {max_flatness:.3g}",
                               {"flatness": flat, "degree": degree, "gap": gap})
    return approx


def _flatness_for(G, degree, gap, steepness=STEEPNESS):
    if degree < 1:
        return None
    w = G.spectrum[0]
    scale = G.norm or 1.0
    gap = gap if gap is not None else float(np.sort(np.abs(w))[0])
    candidates = AUTO_STEEPNESS if steepness == "auto" else (float(steepness),)
    return min(_fit(w, scale, gap, degree, s)[1] for s in candidates)


# ----------------------------------------------------------- quantitative index

def _graded_blocks(G: GradedOperator, X: np.ndarray):
    """``U`` (``H^+ -> H^-``) and ``V`` (``H^- -> H^+``) of an odd matrix."""
    G.split_fiber()
    return X[np.ix_(G.minus, G.plus)], X[np.ix_(G.plus, G.minus)]


def p_chi_closed_form(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``[[1 - (1-VU)^2, (2-VU) V (1-UV)], [U (1-VU), (1-UV)^2]]``."""
    n = U.shape[0]
    I = np.eye(n)
    VU, UV = V @ U, U @ V
    A, B = I - VU, I - UV
    return np.block([[I - A @ A, (2 * I - VU) @ V @ B], [U @ A, B @ B]])


def w_conjugate(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``W e11 W^-1`` from the four-factor product ``W``."""
    n = U.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    a = np.block([[I, V], [Z, I]])
    b = np.block([[I, Z], [-U, I]])
    j = np.block([[Z, -I], [I, Z]])
    ai = np.block([[I, -V], [Z, I]])
    bi = np.block([[I, Z], [U, I]])
    W = a @ b @ a @ j
    Winv = j.T @ ai @ bi @ ai
    return W[:, :n] @ Winv[:n, :]


def _p_block(G: GradedOperator, M: np.ndarray, scalar) -> BlockOperator:
    """2x2-level element over ``H^+ (+) H^-`` as a BlockOperator."""
    h = G.split_fiber()
    return BlockOperator.from_dense(G.space, h, M, levels=2, scalar=scalar)


def quantitative_index(G: GradedOperator, params: ParameterTuple, chi: NormalizingApproximant,
                       *, require: bool = False, check_w: bool = True):
    """``[P_chi(D)] - [e11]`` with both sides certified at ``params``.

    Returns ``(KClassQuantitative, report)``.
    """
    if params.N < 7:
        raise ValidationError("the index needs N >= 7")
    U, V = _graded_blocks(G, chi.matrix)
    P = p_chi_closed_form(U, V)
    report = {"chi": chi.as_json()}
    if check_w:
        report["closed_form_vs_w"] = float(np.abs(P - w_conjugate(U, V)).max())
    e11 = np.diag([1.0, 0.0])
    PB = _p_block(G, P, e11)
    EB = BlockOperator.from_scalar(G.space, G.split_fiber(), e11)
    plus = certify(PB, params)
    minus = certify(EB, params)
    report["P_chi"] = plus.certificate.as_json()
    report["e11"] = minus.certificate.as_json()
    report["smallest_passing_epsilon"] = plus.certificate.norm_e2_minus_e
    report["propagation_chi"] = chi.propagation
    if require and not plus.valid:
        raise CertificationError("P_chi(D) fails its certificate", report)
    return KClassQuantitative(plus, minus), report


# ----------------------------------------------------------------- oracles

def _count_zero(s: np.ndarray, thr: float) -> int:
    return int((s <= thr).sum())


def analytic_index_oracle(G: GradedOperator, bott: LipschitzElement | None = None,
                          threshold="auto", *, with_report: bool = False):
    """Kernel-count oracle.

    Without ``bott``: ``dim ker D^+ - dim ker D^-`` by singular values, with
    relative threshold ``KERNEL_RTOL`` (or the given float).

    With ``bott``: the index localized by the projection ``p``.  If ``Pi``
    is the spectral projection of ``D`` on its near-kernel, the value is
    ``-trace(Gamma p Pi)`` rounded to an integer, with the orientation of
    the pairing (``D^-`` kernel counted positively).  ``threshold="auto"``
    places the cut at the widest ratio gap of ``|spectrum|`` when that gap
    is at least ``KERNEL_GAP``, and otherwise at ``KERNEL_RTOL * ||D||``.
    """
    if bott is None:
        val, rep = _untwisted(G, KERNEL_RTOL if threshold == "auto" else float(threshold))
    else:
        val, rep = _twisted(G, bott, threshold)
    return (val, rep) if with_report else val


def _singular_values(M) -> np.ndarray:
    A = M.toarray() if sp.issparse(M) else np.asarray(M)
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def _untwisted(G: GradedOperator, rtol: float):
    scale = G.norm if G.norm > 0 else 1.0
    Dp, Dm = G.d_plus, G.d_minus
    out = {}
    dims = []
    for name, M in (("plus", Dp), ("minus", Dm)):
        s = _singular_values(M)
        ncols = M.shape[1]
        # kernel dimension = columns minus numerical rank
        padded = np.concatenate([s, np.zeros(max(0, ncols - s.size))])
        counts = [_count_zero(padded, f * rtol * scale) for f in (0.1, 1.0, 10.0)]
        if len(set(counts)) != 1:
            raise SpectralGapError("kernel count changes under threshold perturbation x10",
                                   {"block": name, "counts": counts,
                                    "threshold": rtol * scale})
        dims.append(counts[1])
        out[f"ker_{name}"] = counts[1]
    out["threshold"] = rtol * scale
    return dims[0] - dims[1], out


def _twisted(G: GradedOperator, bott: LipschitzElement, threshold):
    if bott.n != 1:
        raise ValidationError("the localized oracle expects a rank-one scalar projection")
    w, v = G.spectrum
    a = np.abs(w)
    order = np.sort(a)
    scale = G.norm if G.norm > 0 else 1.0
    method = "relative"
    if threshold == "auto":
        thr = KERNEL_RTOL * scale
        positive = order[order > 0]
        if positive.size >= 2:
            ratios = positive[1:] / positive[:-1]
            i = int(np.argmax(ratios))
            if ratios[i] >= KERNEL_GAP:
                thr = math.sqrt(positive[i] * positive[i + 1])
                method = "ratio-gap"
    else:
        thr = float(threshold) * scale
    counts = [int((a <= f * thr).sum()) for f in (0.1, 1.0, 10.0)]
    if len(set(counts)) != 1:
        raise SpectralGapError("near-kernel changes under threshold perturbation x10",
                               {"counts": counts, "threshold": thr})
    sel = a <= thr
    weight = np.repeat(bott.values[:, 0, 0].real, G.internal_dim) * G.grading
    Pi = v[:, sel]
    raw = -float(np.real(np.einsum("ij,i,ij->", Pi.conj(), weight, Pi)))
    k = int(round(raw))
    if abs(raw - k) > 0.25:
        raise SpectralGapError("localized index is not close to an integer",
                               {"raw": raw, "near_kernel": int(sel.sum())})
    return k, {"raw": raw, "near_kernel": int(sel.sum()), "threshold": thr,
               "threshold_method": method}


# -------------------------------------------------------------- pipelines

def default_index_params(G: GradedOperator, chi: NormalizingApproximant,
                         epsilon=Fraction(1, 25), N=7) -> ParameterTuple:
    """Desk-scale parameters: ``r`` is the certified propagation bound of ``P_chi``."""
    r = Fraction(5) * Fraction(chi.propagation_bound)
    return ParameterTuple(epsilon, r, N, Fraction(1))


def model_chi(G: GradedOperator, degree: int = 41) -> NormalizingApproximant:
    """Normalizing approximant tuned to the model's bulk gap."""
    q = abs(int(G.meta.get("flux", 0)))
    absw = np.sort(np.abs(G.spectrum[0]))
    gap = absw[2 * q] if q else absw[0]
    return normalizing_approximant(G, degree_budget=degree, gap=float(gap))


def index_pairing(G: GradedOperator, bott: LipschitzElement, *, degree: int = 41,
                  params: ParameterTuple | None = None) -> dict:
    """Pair the quantitative index with ``[1_B] - [0]`` and compare with the oracle."""
    chi = model_chi(G, degree)
    params = params or default_index_params(G, chi)
    qc, irep = quantitative_index(G, params, chi)
    zero = LipschitzElement(bott.space, np.zeros_like(bott.values), bott.lipschitz_L)
    lc = LipschitzClass(bott, zero)
    k, prep = pair_to_integer(qc, lc, params, override=True, with_report=True,
                              check_closed_form=False)
    oracle, orep = analytic_index_oracle(G, bott, with_report=True)
    return {"pairing": k, "oracle": oracle, "match": k == oracle, "params": params.as_json(),
            "index": irep, "pairing_report": prep, "oracle_report": orep}


def random_bott_class(space: FiniteMetricSpace, rng: np.random.Generator) -> LipschitzElement:
    """Indicator of a random open ball: a rank-one Lipschitz projection."""
    c = int(rng.integers(len(space)))
    radius = float(rng.uniform(1.0, max(1.5, space.diameter / 2)))
    vals = (space.dist[c] < radius).astype(np.float64)
    return lipschitz_element(space, vals)


def vanishing_consistency(G: GradedOperator, gap: float, params: ParameterTuple | None = None,
                          *, classes: int = 20, seed: int = 0, degree: int = 41) -> dict:
    """Gapped operator: every tested pairing must vanish and match the oracle."""
    w = G.spectrum[0]
    smallest = float(np.abs(w).min()) if w.size else 0.0
    if smallest < gap:
        raise SpectralGapError(f"operator is not gapped: smallest |eigenvalue| {smallest:.3g} "
                               f"< {gap}", {"smallest": smallest, "gap": gap})
    chi = normalizing_approximant(G, degree_budget=degree, gap=gap)
    params = params or default_index_params(G, chi)
    qc, irep = quantitative_index(G, params, chi)
    rng = np.random.default_rng(seed)
    trials = []
    for t in range(classes + 1):
        if t == 0:
            p = lipschitz_element(G.space, np.zeros(len(G.space)), L=1.0)
        else:
            p = random_bott_class(G.space, rng)
        zero = LipschitzElement(p.space, np.zeros_like(p.values), p.lipschitz_L)
        k, rep = pair_to_integer(qc, LipschitzClass(p, zero), params, override=True,
                                 with_report=True, check_closed_form=False)
        oracle = analytic_index_oracle(G, p)
        trials.append({"trial": t, "kind": "trivial" if t == 0 else "ball",
                       "support": int(p.values[:, 0, 0].real.sum()), "pairing": k,
                       "oracle": oracle, "final_defect": rep["final_defect"]["lhs"],
                       "passed": k == 0 and oracle == 0})
    return {"gap": gap, "smallest_abs_eigenvalue": smallest, "flatness": chi.flatness,
            "params": params.as_json(), "trials": trials,
            "passed": all(t["passed"] for t in trials)}
