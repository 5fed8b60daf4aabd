"""Matrices over a Hilbert module, stored as a grid of blocks.

An element of ``M_L(B(H))`` with ``H = points x fiber`` is kept as an
``L x L`` grid.  Each block is ``None`` (zero), a 1-D array (a diagonal
multiplication operator) or a dense 2-D array.  Multiplication operators
(functions on the space, projections onto the grading, scalars) stay
diagonal, so products that only involve them cost ``O(b^2)`` instead of
``O(b^3)``.

The grid is level-outer: global index ``level * b + (point * fiber + a)``.
Every element also records its scalar part ``s`` in ``M_L(C)``; the blocks
always hold the *full* element ``operator_part + s (x) 1_H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from . import _accel
from .errors import ValidationError
from .filtered import prop_tolerance_rel
from .linalg import opnorm, opnorm_report
from .metric import FiniteMetricSpace


BLOCK_DENSE_CAP = 512


def _bmul(a, b):
    if a is None or b is None:
        return None
    if a.ndim == 1 and b.ndim == 1:
        return a * b
    if a.ndim == 1:
        return a[:, None] * b
    if b.ndim == 1:
        return a * b[None, :]
    return a @ b


def _badd(a, b, sb=1.0):
    if b is None:
        return a
    if a is None:
        return b * sb if sb != 1.0 else b
    if a.ndim == 1 and b.ndim == 1:
        return a + sb * b
    if a.ndim == 1:
        out = sb * b
        out = out.copy() if sb == 1.0 else out
        out[np.diag_indices_from(out)] += a
        return out
    out = a.copy()
    if b.ndim == 1:
        out[np.diag_indices_from(out)] += sb * b
    else:
        out += sb * b
    return out


def _bscale(a, c):
    return None if a is None else a * c


def _bdense(a, b):
    if a is None:
        return np.zeros((b, b), dtype=np.complex128)
    if a.ndim == 1:
        return np.diag(a).astype(np.complex128)
    return a


@dataclass(eq=False)
class BlockOperator:
    """``L x L`` grid of blocks over ``H = points x fiber``."""

    space: FiniteMetricSpace
    fiber: int
    grid: list  # list of lists of blocks
    scalar: np.ndarray  # (L, L) complex

    def __post_init__(self):
        L = len(self.grid)
        self.scalar = np.asarray(self.scalar, dtype=np.complex128).reshape(L, L)
        b = self.b
        for row in self.grid:
            if len(row) != L:
                raise ValidationError("block grid must be square")
            for blk in row:
                if blk is None:
                    continue
                if blk.ndim == 1 and blk.shape != (b,) or blk.ndim == 2 and blk.shape != (b, b):
                    raise ValidationError(f"block of shape {blk.shape} in a grid of size {b}")

    # ------------------------------------------------------------ shape
    @property
    def levels(self) -> int:
        return len(self.grid)

    @property
    def b(self) -> int:
        return len(self.space) * self.fiber

    @property
    def shape(self):
        n = self.levels * self.b
        return (n, n)

    # ------------------------------------------------------------ builders
    @classmethod
    def zeros(cls, space, fiber, levels):
        return cls(space, fiber, [[None] * levels for _ in range(levels)],
                   np.zeros((levels, levels)))

    @classmethod
    def from_scalar(cls, space, fiber, s):
        """``s (x) 1_H`` for a scalar matrix ``s``."""
        s = np.atleast_2d(np.asarray(s, dtype=np.complex128))
        L = s.shape[0]
        b = len(space) * fiber
        grid = [[None if s[i, j] == 0 else np.full(b, s[i, j]) for j in range(L)]
                for i in range(L)]
        return cls(space, fiber, grid, s.copy())

    @classmethod
    def identity(cls, space, fiber, levels=1):
        return cls.from_scalar(space, fiber, np.eye(levels))

    @classmethod
    def from_dense(cls, space, fiber, M, levels=1, scalar=None):
        M = np.asarray(M, dtype=np.complex128)
        b = len(space) * fiber
        if M.shape != (levels * b, levels * b):
            raise ValidationError(f"dense matrix {M.shape} does not fit {levels} levels of {b}")
        grid = [[M[i * b:(i + 1) * b, j * b:(j + 1) * b].copy() for j in range(levels)]
                for i in range(levels)]
        s = np.zeros((levels, levels)) if scalar is None else scalar
        return cls(space, fiber, grid, s)

    @classmethod
    def from_grid(cls, space, fiber, grid, scalar):
        return cls(space, fiber, [list(r) for r in grid], scalar)

    # ------------------------------------------------------------ algebra
    def _check(self, other):
        if other.space is not self.space and other.space.point_ids != self.space.point_ids:
            raise ValidationError("operands live over different spaces")
        if other.fiber != self.fiber or other.levels != self.levels:
            raise ValidationError("operand block structures differ")

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        self._check(other)
        L = self.levels
        grid = [[None] * L for _ in range(L)]
        for i in range(L):
            for j in range(L):
                acc = None
                for k in range(L):
                    acc = _badd(acc, _bmul(self.grid[i][k], other.grid[k][j]))
                grid[i][j] = acc
        return BlockOperator(self.space, self.fiber, grid, self.scalar @ other.scalar)

    def __add__(self, other):
        self._check(other)
        L = self.levels
        grid = [[_badd(self.grid[i][j], other.grid[i][j]) for j in range(L)] for i in range(L)]
        return BlockOperator(self.space, self.fiber, grid, self.scalar + other.scalar)

    def __sub__(self, other):
        self._check(other)
        L = self.levels
        grid = [[_badd(self.grid[i][j], other.grid[i][j], -1.0) for j in range(L)]
                for i in range(L)]
        return BlockOperator(self.space, self.fiber, grid, self.scalar - other.scalar)

    def scale(self, c) -> "BlockOperator":
        L = self.levels
        return BlockOperator(self.space, self.fiber,
                             [[_bscale(self.grid[i][j], c) for j in range(L)] for i in range(L)],
                             self.scalar * c)

    def one(self) -> "BlockOperator":
        return BlockOperator.identity(self.space, self.fiber, self.levels)

    def one_minus(self) -> "BlockOperator":
        return self.one() - self

    # ------------------------------------------------------------ structure
    @staticmethod
    def assemble(space, fiber, outer):
        """Glue a ``K x K`` nested list of equally sized BlockOperators (or None)."""
        K = len(outer)
        L = None
        for row in outer:
            for e in row:
                if e is not None:
                    L = e.levels
        if L is None:
            raise ValidationError("cannot infer block size from an all-zero layout")
        grid = [[None] * (K * L) for _ in range(K * L)]
        scalar = np.zeros((K * L, K * L), dtype=np.complex128)
        for I in range(K):
            for J in range(K):
                e = outer[I][J]
                if e is None:
                    continue
                for i in range(L):
                    for j in range(L):
                        grid[I * L + i][J * L + j] = e.grid[i][j]
                scalar[I * L:(I + 1) * L, J * L:(J + 1) * L] = e.scalar
        return BlockOperator(space, fiber, grid, scalar)

    def sub_grid(self, I, J, L):
        """Extract the ``L x L`` super-block at ``(I, J)``."""
        grid = [[self.grid[I * L + i][J * L + j] for j in range(L)] for i in range(L)]
        return BlockOperator(self.space, self.fiber, grid,
                             self.scalar[I * L:(I + 1) * L, J * L:(J + 1) * L])

    def kron_levels(self, n: int) -> "BlockOperator":
        """``X (x) I_n``: each level is split into ``n`` copies."""
        L = self.levels
        grid = [[None] * (L * n) for _ in range(L * n)]
        for i in range(L):
            for j in range(L):
                for a in range(n):
                    grid[i * n + a][j * n + a] = self.grid[i][j]
        return BlockOperator(self.space, self.fiber, grid, np.kron(self.scalar, np.eye(n)))

    def operator_part(self) -> "BlockOperator":
        return self - BlockOperator.from_scalar(self.space, self.fiber, self.scalar)

    def adjoint(self) -> "BlockOperator":
        L = self.levels
        grid = [[None] * L for _ in range(L)]
        for i in range(L):
            for j in range(L):
                blk = self.grid[j][i]
                grid[i][j] = None if blk is None else (blk.conj() if blk.ndim == 1 else blk.conj().T)
        return BlockOperator(self.space, self.fiber, grid, self.scalar.conj().T)

    # ------------------------------------------------------------ views
    def to_dense(self) -> np.ndarray:
        b = self.b
        return np.block([[_bdense(blk, b) for blk in row] for row in self.grid])

    def to_sparse(self) -> sp.csr_matrix:
        """Exact sparse copy; only entries that are exactly zero are dropped."""
        b = self.b
        rows, cols, vals = [], [], []
        for i, row in enumerate(self.grid):
            for j, blk in enumerate(row):
                if blk is None:
                    continue
                if blk.ndim == 1:
                    nz = np.flatnonzero(blk)
                    rows.append(i * b + nz)
                    cols.append(j * b + nz)
                    vals.append(blk[nz])
                else:
                    r, c = np.nonzero(blk)
                    rows.append(i * b + r)
                    cols.append(j * b + c)
                    vals.append(blk[r, c])
        n = self.shape[0]
        if not rows:
            return sp.csr_matrix((n, n), dtype=np.complex128)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))

    def matvec(self, x):
        b = self.b
        x = np.asarray(x).ravel()
        out = np.zeros(self.shape[0], dtype=np.complex128)
        for i, row in enumerate(self.grid):
            acc = out[i * b:(i + 1) * b]
            for j, blk in enumerate(row):
                if blk is None:
                    continue
                xj = x[j * b:(j + 1) * b]
                acc += blk * xj if blk.ndim == 1 else blk @ xj
        return out

    def rmatvec(self, x):
        return self.adjoint().matvec(x)

    def linear_operator(self) -> LinearOperator:
        adj = self.adjoint()
        return LinearOperator(self.shape, matvec=self.matvec, rmatvec=adj.matvec,
                              dtype=np.complex128)

    # ------------------------------------------------------------ measures
    def norm(self) -> float:
        return self.norm_report()["value"]

    def norm_report(self) -> dict:
        # grids are never mutated after construction, so the norm is cached
        cached = self.__dict__.get("_norm_cache")
        if cached is None:
            cached = self.__dict__["_norm_cache"] = self._norm_report()
        return dict(cached)

    def _norm_report(self) -> dict:
        if all(blk is None for row in self.grid for blk in row):
            return {"value": 0.0, "method": "zero", "residual": 0.0}
        if self.dense_blocks == 0:
            return {"value": self._diagonal_norm(), "method": "pointwise", "residual": 0.0}
        if self.shape[0] <= BLOCK_DENSE_CAP:
            return opnorm_report(self.to_dense())
        return opnorm_report(self.linear_operator())

    def _diagonal_norm(self) -> float:
        # all blocks diagonal: the operator is a direct sum of L x L matrices
        L, b = self.levels, self.b
        stack = np.zeros((b, L, L), dtype=np.complex128)
        for i, row in enumerate(self.grid):
            for j, blk in enumerate(row):
                if blk is not None:
                    stack[:, i, j] = blk
        return float(np.linalg.norm(stack, ord=2, axis=(1, 2)).max()) if b else 0.0

    def propagation(self, tol: float | None = None) -> float:
        """Max distance between points linked by an entry above ``tol``.

        ``tol`` defaults to the package's relative tolerance times the norm.
        Scalar (diagonal) blocks never contribute.
        """
        if tol is None:
            tol = prop_tolerance_rel() * self.norm()
        dist = self.space.dist
        best = 0.0
        for row in self.grid:
            for blk in row:
                if blk is None or blk.ndim == 1:
                    continue
                best = max(best, _accel.propagation_scan(np.abs(blk), dist, self.fiber, tol))
        return best

    def trace(self) -> complex:
        t = 0.0 + 0.0j
        for i in range(self.levels):
            blk = self.grid[i][i]
            if blk is None:
                continue
            t += blk.sum() if blk.ndim == 1 else np.trace(blk)
        return t

    def is_zero_scalar(self, atol=0.0) -> bool:
        return bool(np.all(np.abs(self.scalar) <= atol))

    @cached_property
    def dense_blocks(self) -> int:
        return sum(1 for row in self.grid for blk in row if blk is not None and blk.ndim == 2)
