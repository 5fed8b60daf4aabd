"""Operator norms and small numerical helpers."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, svds

DENSE_CAP = 1536


def opnorm(A, *, method: str = "auto", seed: int = 0) -> float:
    """Largest singular value.

    Dense LAPACK up to ``DENSE_CAP`` rows, ARPACK Lanczos beyond that (or for
    sparse / LinearOperator input).
    """
    return opnorm_report(A, method=method, seed=seed)["value"]


def opnorm_report(A, *, method: str = "auto", seed: int = 0) -> dict:
    """Operator norm plus how it was obtained.

    The Lanczos path also returns the residual ``||A v - s u||`` of the
    returned singular triple.
    """
    shape = A.shape
    if shape[0] == 0 or shape[1] == 0:
        return {"value": 0.0, "method": "empty", "residual": 0.0}
    dense_ok = isinstance(A, np.ndarray) and max(shape) <= DENSE_CAP
    if method == "dense" or (method == "auto" and dense_ok):
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        return {"value": float(np.linalg.norm(M, 2)), "method": "dense", "residual": 0.0}
    if min(shape) <= 2:
        M = _materialize(A)
        return {"value": float(np.linalg.norm(M, 2)), "method": "dense", "residual": 0.0}
    op = A if isinstance(A, LinearOperator) else _as_linop(A)
    try:
        return _gram_lanczos(op, shape, seed)
    except Exception:  # pragma: no cover - ARPACK failure fallback
        pass
    v0 = np.random.default_rng(seed).standard_normal(min(shape))
    u, s, vh = svds(op, k=1, tol=1e-10, v0=v0, maxiter=5000)
    sval = float(s[0])
    res = float(np.linalg.norm(op.matvec(vh[0].conj()) - sval * u[:, 0]))
    return {"value": sval, "method": "lanczos-svds", "residual": res}


def _gram_lanczos(op, shape, seed):
    # largest eigenvalue of A^H A; a wide Krylov space copes with clustered tops
    n = shape[1]
    gram = LinearOperator((n, n), matvec=lambda x: op.rmatvec(op.matvec(x)), dtype=np.complex128)
    v0 = np.random.default_rng(seed).standard_normal(n)
    w, v = eigsh(gram, k=1, which="LA", tol=1e-10, v0=v0, ncv=min(n - 1, 40), maxiter=5000)
    val = math.sqrt(max(float(w[0]), 0.0))
    res = float(np.linalg.norm(gram.matvec(v[:, 0]) - w[0] * v[:, 0]))
    return {"value": val, "method": "lanczos", "residual": res}


def _as_linop(A):
    if sp.issparse(A):
        A = A.tocsr()
        AH = A.conj().T.tocsr()
        return LinearOperator(A.shape, matvec=lambda x: A @ x, rmatvec=lambda x: AH @ x,
                              dtype=np.complex128)
    A = np.asarray(A)
    return LinearOperator(A.shape, matvec=lambda x: A @ x, rmatvec=lambda x: A.conj().T @ x,
                          dtype=np.complex128)


def _materialize(A):
    if sp.issparse(A):
        return A.toarray()
    if isinstance(A, LinearOperator):
        return A @ np.eye(A.shape[1])
    return np.asarray(A)


def norm_upper(A) -> float:
    """Cheap upper bound ``sqrt(||A||_1 ||A||_inf) >= ||A||_2``."""
    if sp.issparse(A):
        a = abs(A)
        c = float(a.sum(axis=0).max()) if A.nnz else 0.0
        r = float(a.sum(axis=1).max()) if A.nnz else 0.0
    else:
        a = np.abs(np.asarray(A))
        if a.size == 0:
            return 0.0
        c = float(a.sum(axis=0).max())
        r = float(a.sum(axis=1).max())
    return math.sqrt(c * r)


def exact_rational(x: float) -> Fraction:
    """The exact rational value of the float ``x``; the conversion never rounds down."""
    if math.isinf(x) or math.isnan(x):
        raise ValueError(f"cannot convert {x!r} to a rational")
    return Fraction(float(x))


def le(measured: float, bound) -> bool:
    """``measured <= bound`` compared exactly; ``bound`` is a rational."""
    return exact_rational(measured) <= Fraction(bound)


def lt(measured: float, bound) -> bool:
    """``measured < bound`` compared exactly; ``bound`` is a rational."""
    return exact_rational(measured) < Fraction(bound)
