"""Brute-force reference computations that share no code with the package."""

from __future__ import annotations

import itertools

import numpy as np
import sympy


def floyd_warshall(n, edges):
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for a, b, w in edges:
        D[a, b] = D[b, a] = min(D[a, b], w)
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def open_ball(D, x, radius):
    return {j for j in range(D.shape[0]) if D[x, j] < radius}


def lebesgue_by_balls(D, sets):
    """Largest ``lam`` among distance values with every open ``lam``-ball inside a member.

    On a finite space the answer is one of the pairwise distances (or ``inf``).
    """
    n = D.shape[0]
    if any(len(s) == n for s in sets):
        return float("inf")
    radii = sorted({float(v) for v in D.ravel() if v > 0})
    best = 0.0
    for lam in radii:
        if all(any(open_ball(D, x, lam) <= s for s in sets) for x in range(n)):
            best = lam
        else:
            break
    return best


def multiplicity_by_balls(D, sets, h):
    n = D.shape[0]
    return max(sum(1 for s in sets if open_ball(D, x, h) & s) for x in range(n))


def complement_distance(D, s):
    n = D.shape[0]
    out = np.zeros(n)
    comp = [j for j in range(n) if j not in s]
    for x in range(n):
        out[x] = min(D[x, j] for j in comp) if comp else np.inf
    return out


def riesz_projector(e):
    """Spectral projector onto the eigenvalues with real part above 1/2."""
    w, V = np.linalg.eig(e)
    sel = np.diag((w.real > 0.5).astype(float))
    return V @ sel @ np.linalg.inv(V)


def commuting_trace_oracle(P, p_minus_diag, n_fiber):
    """``trace((P (x) 1)(1 (x) (p1 - p2)))`` for a diagonal multiplication operator."""
    F = np.diag(np.repeat(p_minus_diag, n_fiber))
    return float(np.trace(P @ F).real)


def banded_propagation(M, D, k, tol=0.0):
    P = D.shape[0]
    worst = 0.0
    for x, y in itertools.product(range(P), repeat=2):
        if np.abs(M[x * k:(x + 1) * k, y * k:(y + 1) * k]).max() > tol:
            worst = max(worst, D[x, y])
    return worst


def symbolic_difference():
    """``Z^T Y Z`` over noncommuting symbols ``a``, ``b``, expanded entrywise."""
    a, b = sympy.symbols("a b", commutative=False)
    one = sympy.Integer(1)
    c = one - b
    Z = sympy.Matrix([[b, 0, c, 0], [c, 0, 0, b], [0, 0, b, c], [0, one, 0, 0]])
    ZT = Z.T  # block transpose; entries are not transposed
    Y = sympy.diag(a, c, 0, 0)
    return a, b, (ZT * Y * Z).applyfunc(sympy.expand)


def symbolic_ztz():
    b = sympy.symbols("b", commutative=False)
    one = sympy.Integer(1)
    c = one - b
    Z = sympy.Matrix([[b, 0, c, 0], [c, 0, 0, b], [0, 0, b, c], [0, one, 0, 0]])
    return b, (Z.T * Z).applyfunc(sympy.expand)
