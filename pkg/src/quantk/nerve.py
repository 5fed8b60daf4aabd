"""Nerve complexes, the distance-based partition of unity and the nerve map."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import _accel
from .errors import QuantkError, ValidationError
from .metric import FiniteMetricSpace, OpenCover, complement_distances, cover_stats

DEFAULT_GRID = 8


@dataclass(frozen=True, eq=False)
class NerveComplex:
    vertices: tuple
    simplices: tuple  # frozensets of vertex names, closed under subsets
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "_set", frozenset(self.simplices))

    def is_simplex(self, vs) -> bool:
        return frozenset(vs) in self._set

    def maximal_simplices(self) -> list:
        out = []
        for s in self.simplices:
            if not any(s < t for t in self.simplices):
                out.append(s)
        return sorted(out, key=lambda s: (len(s), sorted(s)))


@dataclass(frozen=True)
class NervePoint:
    """Point of a nerve complex in barycentric form."""

    carrier: frozenset
    weights: tuple  # ((vertex, weight), ...) sorted by vertex name

    def weight(self, v) -> float:
        for name, w in self.weights:
            if name == v:
                return w
        return 0.0

    def as_dict(self) -> dict:
        return dict(self.weights)


def nerve_point(weights: dict, tol: float = 1e-12) -> NervePoint:
    """Build a :class:`NervePoint` from ``{vertex: weight}`` (zeros dropped)."""
    items = tuple(sorted((v, float(w)) for v, w in weights.items() if w != 0))
    if any(w < 0 for _, w in items):
        raise ValidationError("barycentric weights must be non-negative")
    if abs(sum(w for _, w in items) - 1.0) > tol:
        raise ValidationError("barycentric weights must sum to 1")
    return NervePoint(frozenset(v for v, _ in items), items)


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    names: tuple
    weights: np.ndarray  # (n_sets, n_points)
    psi: np.ndarray
    full_member_value: float  # value used for d(x, empty set)

    def at(self, j: int) -> np.ndarray:
        return self.weights[:, j]


def build_nerve(space: FiniteMetricSpace, cover: OpenCover) -> NerveComplex:
    """Every family of members with a common point spans a simplex."""
    names = cover.names
    carriers = set()
    for j in range(len(space)):
        carriers.add(frozenset(names[i] for i in np.flatnonzero(cover.member[:, j])))
    simplices = set()
    for c in carriers:
        c = sorted(c)
        for k in range(1, len(c) + 1):
            for sub in itertools.combinations(c, k):
                simplices.add(frozenset(sub))
    order = sorted(simplices, key=lambda s: (len(s), sorted(s)))
    dim = max(len(s) for s in order) - 1
    return NerveComplex(tuple(names), tuple(order), dim)


def partition_of_unity(space: FiniteMetricSpace, cover: OpenCover) -> PartitionOfUnity:
    """``phi_i = psi_i / sum_j psi_j`` with ``psi_i(x) = d(x, M \\ U_i)``.

    A member equal to the whole space has no complement; its ``psi`` is the
    constant ``1 + diameter``.
    """
    psi = complement_distances(cover)
    big = 1.0 + space.diameter
    psi = np.where(np.isinf(psi), big, psi)
    total = psi.sum(axis=0)
    if np.any(total <= 0):
        j = int(np.flatnonzero(total <= 0)[0])
        raise QuantkError(f"partition of unity undefined at point {space.point_ids[j]!r}")
    return PartitionOfUnity(cover.names, psi / total, psi, big)


def nerve_map(space: FiniteMetricSpace, cover: OpenCover, pou: PartitionOfUnity | None = None,
              complex_: NerveComplex | None = None) -> dict:
    """``x -> sum_i phi_i(x) U_i`` as a dict of :class:`NervePoint` keyed by label."""
    pou = pou or partition_of_unity(space, cover)
    cx = complex_ or build_nerve(space, cover)
    out = {}
    for j, x in enumerate(space.point_ids):
        w = pou.at(j)
        nz = np.flatnonzero(w > 0)
        pt = NervePoint(frozenset(cover.names[i] for i in nz),
                        tuple(sorted((cover.names[i], float(w[i])) for i in nz)))
        if not cx.is_simplex(pt.carrier):
            raise QuantkError(f"carrier of phi({x!r}) is not a simplex")
        out[x] = pt
    return out


def l1_distance(p: NervePoint, q: NervePoint) -> float:
    a, b = p.as_dict(), q.as_dict()
    return float(_l1(a, b))


class WaypointGraph:
    """Barycentric grid of resolution ``grid`` on every maximal simplex.

    Two nodes are joined when they lie in a common maximal simplex, with the
    l1 barycentric distance as edge weight.  Shortest paths in this graph
    bound the polyhedral path metric from above.
    """

    def __init__(self, cx: NerveComplex, grid: int = DEFAULT_GRID):
        if grid < 1:
            raise ValidationError("grid resolution must be >= 1")
        self.complex = cx
        self.grid = grid
        self.maximal = cx.maximal_simplices()
        self._key_to_node = {}
        self._vectors = []
        self._members = []  # per maximal simplex: node ids
        for s in self.maximal:
            verts = sorted(s)
            ids = []
            for comp in _compositions(grid, len(verts)):
                key = tuple((v, c) for v, c in zip(verts, comp) if c)
                node = self._key_to_node.get(key)
                if node is None:
                    node = len(self._vectors)
                    self._key_to_node[key] = node
                    self._vectors.append({v: c / grid for v, c in key})
                ids.append(node)
            self._members.append(ids)

    def distances(self, points: list) -> np.ndarray:
        """All-pairs surrogate distances between ``points`` (NervePoints)."""
        base = len(self._vectors)
        vecs = self._vectors + [p.as_dict() for p in points]
        rows, cols, w = [], [], []

        def connect(group):
            for a, b in itertools.combinations(group, 2):
                d = _l1(vecs[a], vecs[b])
                rows.append(a)
                cols.append(b)
                w.append(d if d > 0 else 1e-300)

        groups = [list(ids) for ids in self._members]
        for k, p in enumerate(points):
            for g, s in zip(groups, self.maximal):
                if p.carrier <= s:
                    g.append(base + k)
        for g in groups:
            connect(g)
        n = len(vecs)
        G = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
        src = np.arange(base, n)
        D = dijkstra(G, directed=False, indices=src)[:, base:]
        # direct l1 whenever the two carriers span a simplex
        for a, b in itertools.combinations(range(len(points)), 2):
            if self.complex.is_simplex(points[a].carrier | points[b].carrier):
                D[a, b] = D[b, a] = l1_distance(points[a], points[b])
        np.fill_diagonal(D, 0.0)
        return D


def _l1(a: dict, b: dict) -> float:
    # fixed summation order: set order depends on the per-process hash seed
    return sum(abs(a.get(v, 0.0) - b.get(v, 0.0)) for v in sorted(set(a) | set(b), key=str))


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def simplicial_distance(cx: NerveComplex, p: NervePoint, q: NervePoint,
                        grid: int = DEFAULT_GRID) -> float:
    """l1 barycentric distance inside a common simplex, else a waypoint path.

    Returns ``inf`` when no path joins the two carriers.
    """
    for pt in (p, q):
        if not cx.is_simplex(pt.carrier):
            raise ValidationError("point does not belong to the complex")
    if cx.is_simplex(p.carrier | q.carrier):
        return l1_distance(p, q)
    return float(WaypointGraph(cx, grid).distances([p, q])[0, 1])


def coordinate_lipschitz(space: FiniteMetricSpace, pou: PartitionOfUnity):
    """Worst Lipschitz ratio of each coordinate ``x -> phi_i(x)``."""
    D = space.dist
    out = []
    for i in range(pou.weights.shape[0]):
        w = pou.weights[i]
        out.append(_accel.max_ratio(np.abs(w[:, None] - w[None, :]), D)[0])
    return np.array(out)


def certify_lipschitz_nerve_map(space: FiniteMetricSpace, cover: OpenCover,
                                claimed_L: float | None = None,
                                grid: int = DEFAULT_GRID) -> dict:
    """Exhaustive check of ``d_N(phi x, phi y) <= L * d(x, y)`` over all pairs.

    ``claimed_L`` defaults to ``m/R`` with ``R`` the Lebesgue number and ``m``
    the multiplicity at ``h = R``.  An infinite Lebesgue number (some member is
    all of ``M``) is replaced by ``1 + diameter``, the value used for ``psi``.
    """
    stats = cover_stats(space, cover)
    R, m = stats.lebesgue, stats.multiplicity
    R_eff = R if math.isfinite(R) else 1.0 + space.diameter
    default_L = m / R_eff if R_eff > 0 else 0.0
    L = default_L if claimed_L is None else float(claimed_L)
    cx = build_nerve(space, cover)
    pou = partition_of_unity(space, cover)
    phi = nerve_map(space, cover, pou, cx)
    pts = [phi[x] for x in space.point_ids]
    distinct = {}
    for p in pts:
        distinct.setdefault(p, len(distinct))
    uniq = list(distinct)
    if len(uniq) > 1:
        Du = WaypointGraph(cx, grid).distances(uniq)
        idx = np.array([distinct[p] for p in pts])
        DN = Du[np.ix_(idx, idx)]
    else:
        DN = np.zeros((len(pts), len(pts)))
    ratio, i, j = _accel.max_ratio(DN, space.dist)
    if len(space) < 2:
        ratio, i, j = 0.0, -1, -1
    pair_ok = DN <= L * space.dist + 1e-12 * np.maximum(1.0, L * space.dist)
    np.fill_diagonal(pair_ok, True)
    return {
        "lebesgue": R,
        "lebesgue_effective": R_eff,
        "multiplicity": m,
        "claimed_L": L,
        "max_ratio": ratio,
        "witness": None if i < 0 else [space.point_ids[i], space.point_ids[j]],
        "witness_lhs": None if i < 0 else float(DN[i, j]),
        "witness_rhs": None if i < 0 else float(L * space.dist[i, j]),
        "pairs": len(space) * (len(space) - 1) // 2,
        "failures": int((~pair_ok).sum() // 2),
        "passed": bool(pair_ok.all()),
        "grid": grid,
        "surrogate": "waypoint",
        "empty_complement_value": pou.full_member_value,
    }
