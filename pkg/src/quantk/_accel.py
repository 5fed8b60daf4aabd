"""Hot loops with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and the environment
variable ``QUANTK_DISABLE_NUMBA`` is unset (or set to ``0``).  Both paths
return identical results; the numpy versions are the reference and are what
the test-suite cross-checks the compiled kernels against.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = "QUANTK_DISABLE_NUMBA"


def _numba_wanted() -> bool:
    return os.environ.get(_FLAG, "0").strip().lower() in ("", "0", "false", "no")


try:  # pragma: no cover - exercised implicitly by the backend switch
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False
    njit = None


def backend() -> str:
    """Name of the backend that the public wrappers dispatch to."""
    return "numba" if (NUMBA_AVAILABLE and _numba_wanted()) else "numpy"


# ---------------------------------------------------------------- numpy

def propagation_scan_np(absT, dist, k, tol):
    n = dist.shape[0]
    mask = (absT > tol).reshape(n, k, n, k).any(axis=(1, 3))
    if not mask.any():
        return 0.0
    return float(dist[mask].max())


def complement_distance_np(dist, member):
    c, n = member.shape
    out = np.empty((c, n))
    for i in range(c):
        outside = ~member[i]
        if outside.any():
            out[i] = dist[:, outside].min(axis=1)
        else:
            out[i] = np.inf
    return out


def ball_hit_counts_np(dist, member, h):
    near = (dist < h).astype(np.int64)
    return ((near @ member.T.astype(np.int64)) > 0).sum(axis=1)


def max_ratio_np(numer, denom):
    iu = np.triu_indices(numer.shape[0], 1)
    d = denom[iu]
    ok = d > 0
    if not ok.any():
        return 0.0, -1, -1
    r = numer[iu][ok] / d[ok]
    j = int(np.argmax(r))
    return float(r[j]), int(iu[0][ok][j]), int(iu[1][ok][j])


def peel_np(n, rows, cols):
    """Indices removable by repeated empty-row / empty-column deflation.

    ``rows``/``cols`` list the off-diagonal nonzero positions.  Returns a
    boolean mask of removed indices.
    """
    import scipy.sparse as sp

    if rows.size == 0:
        return np.ones(n, dtype=bool)
    alive = np.ones(n, dtype=bool)
    A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    AT = A.T.tocsr()
    while True:
        a = alive.astype(float)
        rdeg = A @ a
        cdeg = AT @ a
        kill = alive & ((rdeg == 0) | (cdeg == 0))
        if not kill.any():
            return ~alive
        alive &= ~kill


# ---------------------------------------------------------------- numba

if NUMBA_AVAILABLE:

    @njit(cache=True)
    def propagation_scan_nb(absT, dist, k, tol):  # pragma: no cover - compiled
        m = absT.shape[0]
        best = 0.0
        for i in range(m):
            xi = i // k
            for j in range(m):
                if absT[i, j] > tol:
                    d = dist[xi, j // k]
                    if d > best:
                        best = d
        return best

    @njit(cache=True)
    def complement_distance_nb(dist, member):  # pragma: no cover
        c, n = member.shape
        out = np.empty((c, n))
        for i in range(c):
            for x in range(n):
                best = np.inf
                for y in range(n):
                    if not member[i, y]:
                        if dist[x, y] < best:
                            best = dist[x, y]
                out[i, x] = best
        return out

    @njit(cache=True)
    def ball_hit_counts_nb(dist, member, h):  # pragma: no cover
        c, n = member.shape
        out = np.zeros(n, dtype=np.int64)
        for x in range(n):
            for i in range(c):
                for y in range(n):
                    if member[i, y] and dist[x, y] < h:
                        out[x] += 1
                        break
        return out

    @njit(cache=True)
    def max_ratio_nb(numer, denom):  # pragma: no cover
        n = numer.shape[0]
        best = 0.0
        bi = -1
        bj = -1
        for i in range(n):
            for j in range(i + 1, n):
                if denom[i, j] > 0:
                    r = numer[i, j] / denom[i, j]
                    if bi < 0 or r > best:
                        best = r
                        bi = i
                        bj = j
        return best, bi, bj

    @njit(cache=True)
    def _peel_core(n, rptr, ridx, cptr, cidx):  # pragma: no cover
        rdeg = np.zeros(n, dtype=np.int64)
        cdeg = np.zeros(n, dtype=np.int64)
        for i in range(n):
            rdeg[i] = rptr[i + 1] - rptr[i]
            cdeg[i] = cptr[i + 1] - cptr[i]
        removed = np.zeros(n, dtype=np.bool_)
        queued = np.zeros(n, dtype=np.bool_)
        stack = np.empty(n, dtype=np.int64)
        top = 0
        for i in range(n):
            if rdeg[i] == 0 or cdeg[i] == 0:
                stack[top] = i
                top += 1
                queued[i] = True
        while top > 0:
            top -= 1
            j = stack[top]
            removed[j] = True
            # row j disappears: its columns lose one entry
            for t in range(rptr[j], rptr[j + 1]):
                c = ridx[t]
                if not removed[c]:
                    cdeg[c] -= 1
                    if cdeg[c] == 0 and not queued[c]:
                        queued[c] = True
                        stack[top] = c
                        top += 1
            # column j disappears: its rows lose one entry
            for t in range(cptr[j], cptr[j + 1]):
                r = cidx[t]
                if not removed[r]:
                    rdeg[r] -= 1
                    if rdeg[r] == 0 and not queued[r]:
                        queued[r] = True
                        stack[top] = r
                        top += 1
        return removed

    def peel_nb(n, rows, cols):
        order = np.lexsort((cols, rows))
        r, c = rows[order], cols[order]
        rptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(rptr, r + 1, 1)
        rptr = np.cumsum(rptr)
        order = np.lexsort((r, c))
        cptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(cptr, c[order] + 1, 1)
        cptr = np.cumsum(cptr)
        return _peel_core(n, rptr, c.astype(np.int64), cptr, r[order].astype(np.int64))


# ---------------------------------------------------------------- dispatch

def _pick(name):
    if backend() == "numba":
        return globals()[name + "_nb"]
    return globals()[name + "_np"]


def propagation_scan(absT, dist, k, tol):
    """Largest ``dist[x, y]`` over site pairs carrying an entry above ``tol``."""
    absT = np.ascontiguousarray(absT, dtype=np.float64)
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    return float(_pick("propagation_scan")(absT, dist, int(k), float(tol)))


def complement_distance(dist, member):
    """``out[i, x] = min{dist[x, y] : y not in set i}`` (``inf`` if empty)."""
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    member = np.ascontiguousarray(member, dtype=np.bool_)
    return _pick("complement_distance")(dist, member)


def ball_hit_counts(dist, member, h):
    """For each point, the number of sets meeting its open ``h``-ball."""
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    member = np.ascontiguousarray(member, dtype=np.bool_)
    return np.asarray(_pick("ball_hit_counts")(dist, member, float(h)), dtype=np.int64)


def max_ratio(numer, denom):
    """Max of ``numer/denom`` over pairs ``i < j`` with ``denom > 0``.

    Returns ``(ratio, i, j)``; ``(0.0, -1, -1)`` when no pair qualifies.
    """
    numer = np.ascontiguousarray(numer, dtype=np.float64)
    denom = np.ascontiguousarray(denom, dtype=np.float64)
    r, i, j = _pick("max_ratio")(numer, denom)
    return float(r), int(i), int(j)


def peel(n, rows, cols):
    """Mask of indices removed by empty-row/empty-column deflation."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    keep = rows != cols
    return np.asarray(_pick("peel")(int(n), rows[keep], cols[keep]), dtype=bool)
