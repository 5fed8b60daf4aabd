"""Finite metric spaces, open covers and covering statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import _accel
from .errors import ValidationError

INF = math.inf
TRIANGLE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite point set with its full distance matrix."""

    point_ids: tuple
    dist: np.ndarray
    name: str = "space"
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.point_ids)})
        self.dist.setflags(write=False)

    def __len__(self) -> int:
        return len(self.point_ids)

    def index(self, x) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise ValidationError(f"unknown point {x!r}") from None

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if len(self) else 0.0


def build_metric_space(labels: Sequence[Hashable], distance_matrix, *, name="space",
                       rtol: float = TRIANGLE_RTOL) -> FiniteMetricSpace:
    """Validate ``distance_matrix`` and wrap it as a :class:`FiniteMetricSpace`.

    Every failure names the offending indices.
    """
    labels = tuple(labels)
    D = np.array(distance_matrix, dtype=np.float64)
    n = len(labels)
    if D.ndim != 2 or D.shape != (n, n):
        raise ValidationError(f"distance matrix shape {D.shape} does not match {n} labels")
    if len(set(labels)) != n:
        raise ValidationError("point labels must be distinct")
    if not np.all(np.isfinite(D)):
        i, j = np.argwhere(~np.isfinite(D))[0]
        raise ValidationError(f"non-finite distance at ({i}, {j})")
    bad = np.argwhere(D < 0)
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"negative distance at ({i}, {j})")
    bad = np.argwhere(D != D.T)
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"asymmetric distance at ({i}, {j}): {D[i, j]} vs {D[j, i]}")
    diag = np.flatnonzero(np.diag(D) != 0)
    if diag.size:
        raise ValidationError(f"non-zero self distance at ({diag[0]}, {diag[0]})")
    off = D + np.eye(n)
    bad = np.argwhere(off <= 0)
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"zero distance between distinct points ({i}, {j})")
    scale = D.max() if n else 0.0
    slack = rtol * max(scale, 1.0)
    for k in range(n):
        # d(i, j) <= d(i, k) + d(k, j) for all i, j
        viol = D > D[:, k][:, None] + D[k, :][None, :] + slack
        if viol.any():
            i, j = np.argwhere(viol)[0]
            raise ValidationError(
                f"triangle inequality fails on ({i}, {j}, {k}): "
                f"d({i},{j})={D[i, j]} > d({i},{k})+d({k},{j})={D[i, k] + D[k, j]}")
    return FiniteMetricSpace(labels, D, name)


def path_space(n: int, step: float = 1.0, name: str = "path") -> FiniteMetricSpace:
    """Points ``0..n-1`` on a line with ``d(i, j) = step*|i-j|``."""
    idx = np.arange(n)
    return build_metric_space(list(range(n)), step * np.abs(idx[:, None] - idx[None, :]), name=name)


def graph_space(labels, edges, weights=None, name="graph") -> FiniteMetricSpace:
    """Shortest-path metric of a connected undirected graph."""
    labels = list(labels)
    pos = {p: i for i, p in enumerate(labels)}
    n = len(labels)
    if weights is None:
        weights = [1.0] * len(edges)
    r = [pos[a] for a, _ in edges]
    c = [pos[b] for _, b in edges]
    G = csr_matrix((weights, (r, c)), shape=(n, n))
    D = shortest_path(G, directed=False)
    if not np.all(np.isfinite(D)):
        raise ValidationError("graph is disconnected")
    return build_metric_space(labels, D, name=name)


def grid_space(rows: int, cols: int, name: str | None = None) -> FiniteMetricSpace:
    """Grid graph ``rows x cols`` with the hop (Manhattan) metric."""
    ij = [(i, j) for i in range(rows) for j in range(cols)]
    a = np.array(ij)
    D = np.abs(a[:, None, :] - a[None, :, :]).sum(-1)
    return build_metric_space(ij, D, name=name or f"grid{rows}x{cols}")


def torus_space(size: int, name: str | None = None) -> FiniteMetricSpace:
    """Discrete ``size x size`` torus with the wrap-around hop metric."""
    ij = [(i, j) for i in range(size) for j in range(size)]
    a = np.array(ij)
    d = np.abs(a[:, None, :] - a[None, :, :])
    d = np.minimum(d, size - d).sum(-1)
    return build_metric_space(ij, d, name=name or f"torus{size}")


def ball(space: FiniteMetricSpace, x, radius: float) -> frozenset:
    """Open ball ``{y : d(x, y) < radius}``."""
    if radius < 0:
        raise ValidationError("radius must be non-negative")
    i = space.index(x)
    hit = np.flatnonzero(space.dist[i] < radius)
    return frozenset(space.point_ids[j] for j in hit)


@dataclass(frozen=True, eq=False)
class OpenCover:
    """Named subsets of a finite space whose union is everything."""

    space: FiniteMetricSpace
    names: tuple
    sets: tuple  # tuple of frozensets of point labels
    member: np.ndarray = field(repr=False)  # bool (n_sets, n_points)

    def __len__(self) -> int:
        return len(self.names)


def build_cover(space: FiniteMetricSpace, sets, names=None) -> OpenCover:
    """Validate a cover given as an iterable of point collections (or a name->points dict)."""
    if isinstance(sets, dict):
        names = list(sets.keys())
        sets = list(sets.values())
    sets = [frozenset(s) for s in sets]
    if names is None:
        names = [f"U{i + 1}" for i in range(len(sets))]
    names = tuple(names)
    if len(names) != len(sets):
        raise ValidationError("one name per set required")
    if len(set(names)) != len(names):
        raise ValidationError("cover member names must be distinct")
    if not sets:
        raise ValidationError("cover has no members")
    member = np.zeros((len(sets), len(space)), dtype=bool)
    for i, s in enumerate(sets):
        if not s:
            raise ValidationError(f"cover member {names[i]!r} is empty")
        for p in s:
            member[i, space.index(p)] = True
    missing = np.flatnonzero(~member.any(axis=0))
    if missing.size:
        raise ValidationError(
            f"cover misses point {space.point_ids[missing[0]]!r} ({missing.size} uncovered)")
    member.setflags(write=False)
    return OpenCover(space, names, tuple(sets), member)


@dataclass(frozen=True)
class CoverStats:
    lebesgue: float
    multiplicity: int
    h: float
    dimension: int


def complement_distances(cover: OpenCover) -> np.ndarray:
    """``psi[i, x] = d(x, M \\ U_i)`` with ``inf`` for a full member."""
    return _accel.complement_distance(cover.space.dist, cover.member)


def lebesgue_number(space: FiniteMetricSpace, cover: OpenCover) -> float:
    """``min_x max_i d(x, M \\ U_i)``; ``inf`` when some member is all of ``M``."""
    _check_same_space(space, cover)
    psi = complement_distances(cover)
    return float(psi.max(axis=0).min())


def h_multiplicity(space: FiniteMetricSpace, cover: OpenCover, h: float) -> int:
    """Max over points of the number of members meeting the open ``h``-ball."""
    _check_same_space(space, cover)
    if not h > 0:
        raise ValidationError("h must be positive")
    return int(_accel.ball_hit_counts(space.dist, cover.member, h).max())


def cover_stats(space: FiniteMetricSpace, cover: OpenCover, h: float | None = None) -> CoverStats:
    """Lebesgue number and multiplicity; ``h`` defaults to the Lebesgue number.

    With an infinite Lebesgue number and no ``h`` the multiplicity is taken at
    ``h = 1 + diameter`` (every ball is the whole space).
    """
    R = lebesgue_number(space, cover)
    if h is None:
        h = R if math.isfinite(R) else 1.0 + space.diameter
    m = h_multiplicity(space, cover, h)
    return CoverStats(R, m, float(h), m - 1)


def _check_same_space(space, cover):
    if cover.space is not space and cover.space.point_ids != space.point_ids:
        raise ValidationError("cover belongs to a different space")
