import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import complement_distance
from quantk.errors import ValidationError
from quantk.metric import build_cover, cover_stats, grid_space, path_space
from quantk.nerve import (WaypointGraph, build_nerve, certify_lipschitz_nerve_map,
                          coordinate_lipschitz, l1_distance, nerve_map, nerve_point,
                          partition_of_unity, simplicial_distance)


def test_two_overlapping_sets_span_an_edge(path4, running_cover):
    cx = build_nerve(path4, running_cover)
    assert cx.vertices == ("U1", "U2")
    assert sorted(map(sorted, cx.simplices)) == [["U1"], ["U1", "U2"], ["U2"]]
    assert cx.dim == 1


def test_disjoint_sets_have_no_edge(path4):
    cx = build_nerve(path4, build_cover(path4, [[0, 1], [2, 3]], ["A", "B"]))
    assert cx.dim == 0 and len(cx.simplices) == 2


def test_chain_cover_has_no_triangle(path4):
    cover = build_cover(path4, [[0, 1], [1, 2], [2, 3]], ["U1", "U2", "U3"])
    cx = build_nerve(path4, cover)
    edges = sorted(sorted(s) for s in cx.simplices if len(s) == 2)
    assert edges == [["U1", "U2"], ["U2", "U3"]]
    assert not cx.is_simplex({"U1", "U2", "U3"})
    assert not cx.is_simplex({"U1", "U3"})


def test_partition_at_running_example(path4, running_cover):
    pou = partition_of_unity(path4, running_cover)
    assert np.allclose(pou.at(1), [2 / 3, 1 / 3])
    # x = 1 and x = 2 are mirror images
    assert np.allclose(pou.at(2), [1 / 3, 2 / 3])
    # x = 0 lies only in U1
    assert np.array_equal(pou.at(0), [1.0, 0.0])


def test_nerve_map_running_example(path4, running_cover):
    phi = nerve_map(path4, running_cover)
    assert phi[1].carrier == {"U1", "U2"}
    assert phi[1].weight("U1") == pytest.approx(2 / 3)
    assert phi[0] == nerve_point({"U1": 1.0})


def test_one_member_cover_maps_to_its_vertex(path4):
    cover = build_cover(path4, [[0, 1, 2, 3]], ["M"])
    phi = nerve_map(path4, cover)
    assert all(p.carrier == {"M"} for p in phi.values())
    rep = certify_lipschitz_nerve_map(path4, cover, claimed_L=0.0)
    assert rep["max_ratio"] == 0 and rep["passed"]
    assert math.isinf(rep["lebesgue"])


def test_l1_distance_examples(path4, running_cover):
    cx = build_nerve(path4, running_cover)
    p, q = nerve_point({"U1": 1.0}), nerve_point({"U2": 1.0})
    assert simplicial_distance(cx, p, p) == 0
    assert simplicial_distance(cx, p, q) == 2


def test_opposite_ends_of_two_edge_path():
    s = path_space(4)
    cx = build_nerve(s, build_cover(s, [[0, 1], [1, 2], [2, 3]], ["U1", "U2", "U3"]))
    d = simplicial_distance(cx, nerve_point({"U1": 1.0}), nerve_point({"U3": 1.0}))
    assert d == pytest.approx(4.0)


def test_disconnected_nerve_gives_infinite_distance():
    s = path_space(3)
    cx = build_nerve(s, build_cover(s, [[0], [1, 2]], ["A", "B"]))
    assert math.isinf(simplicial_distance(cx, nerve_point({"A": 1.0}), nerve_point({"B": 1.0})))


def test_nerve_point_validation():
    with pytest.raises(ValidationError):
        nerve_point({"a": 0.5, "b": 0.6})
    with pytest.raises(ValidationError):
        nerve_point({"a": 1.5, "b": -0.5})


def test_point_outside_complex_rejected(path4, running_cover):
    cx = build_nerve(path4, running_cover)
    with pytest.raises(ValidationError):
        simplicial_distance(cx, nerve_point({"Z": 1.0}), nerve_point({"U1": 1.0}))


def test_waypoint_grid_must_be_positive(path4, running_cover):
    with pytest.raises(ValidationError):
        WaypointGraph(build_nerve(path4, running_cover), 0)


def test_running_example_passes_at_L_one(path4, running_cover):
    rep = certify_lipschitz_nerve_map(path4, running_cover)
    assert (rep["lebesgue"], rep["multiplicity"], rep["claimed_L"]) == (2, 2, 1)
    assert rep["passed"] and rep["failures"] == 0
    assert rep["max_ratio"] == pytest.approx(2 / 3)


def test_claimed_constant_below_ratio_fails(path4, running_cover):
    rep = certify_lipschitz_nerve_map(path4, running_cover, claimed_L=0.5)
    assert not rep["passed"]
    assert rep["witness_lhs"] > rep["witness_rhs"]


def test_unit_lebesgue_on_a_graph_breaks_the_bound():
    # open balls of radius 1 are single points, so m = 1 while the nerve is disconnected
    s = path_space(3)
    cover = build_cover(s, [[0], [1, 2]])
    rep = certify_lipschitz_nerve_map(s, cover)
    assert (rep["lebesgue"], rep["multiplicity"]) == (1, 1)
    assert math.isinf(rep["max_ratio"]) and not rep["passed"]


def test_coordinates_can_exceed_one_over_R():
    # pinned: phi_1 drops from 1 to 2/5 across one edge while R = 2
    s = path_space(4)
    cover = build_cover(s, [[0, 1, 2], [1], [1, 2], [1, 2, 3]])
    stats = cover_stats(s, cover)
    pou = partition_of_unity(s, cover)
    assert np.allclose(pou.weights[0], [1, 2 / 5, 1 / 4, 0])
    worst = coordinate_lipschitz(s, pou).max()
    assert worst == pytest.approx(0.6) and worst > 1 / stats.lebesgue
    assert worst <= (1 + stats.multiplicity) / stats.lebesgue
    assert certify_lipschitz_nerve_map(s, cover)["passed"]


def test_full_member_uses_diameter_plus_one(path4):
    cover = build_cover(path4, [[0, 1, 2, 3], [0, 1]], ["M", "A"])
    pou = partition_of_unity(path4, cover)
    assert pou.full_member_value == 4.0
    assert np.allclose(pou.psi[0], 4.0)


# ---------------------------------------------------------------- properties

@st.composite
def grid_covers(draw):
    rows, cols = draw(st.integers(2, 5)), draw(st.integers(2, 5))
    space = grid_space(rows, cols)
    P = len(space)
    k = draw(st.integers(1, 4))
    centers = draw(st.lists(st.integers(0, P - 1), min_size=k, max_size=k))
    radii = draw(st.lists(st.sampled_from([1.5, 2, 2.5, 3, 4]), min_size=k, max_size=k))
    sets = [set(np.flatnonzero(space.dist[c] < r)) for c, r in zip(centers, radii)]
    sets[0] |= set(range(P)) - set().union(*sets)
    cover = build_cover(space, [[space.point_ids[j] for j in s] for s in sets])
    return space, cover, sets


@given(grid_covers())
def test_partition_is_normalized_and_supported(data):
    space, cover, sets = data
    pou = partition_of_unity(space, cover)
    assert np.abs(pou.weights.sum(axis=0) - 1).max() <= 1e-12
    assert (pou.weights >= 0).all()
    for i, s in enumerate(sets):
        off = [j for j in range(len(space)) if j not in s]
        assert np.all(pou.weights[i, off] == 0)


@given(grid_covers())
def test_psi_matches_brute_force(data):
    space, cover, sets = data
    pou = partition_of_unity(space, cover)
    for i, s in enumerate(sets):
        ref = complement_distance(space.dist, s)
        ref = np.where(np.isinf(ref), 1 + space.diameter, ref)
        assert np.array_equal(pou.psi[i], ref)


@given(grid_covers())
def test_nerve_is_closed_under_faces_and_carriers_are_simplices(data):
    space, cover, _ = data
    cx = build_nerve(space, cover)
    for s in cx.simplices:
        for v in s:
            if len(s) > 1:
                assert cx.is_simplex(s - {v})
    for p in nerve_map(space, cover).values():
        assert cx.is_simplex(p.carrier)


@given(grid_covers())
def test_surrogate_never_undercuts_l1(data):
    space, cover, _ = data
    cx = build_nerve(space, cover)
    pts = list(nerve_map(space, cover).values())
    D = WaypointGraph(cx, 4).distances(pts)
    for a in range(len(pts)):
        for b in range(len(pts)):
            assert D[a, b] >= l1_distance(pts[a], pts[b]) - 1e-12


@given(grid_covers())
def test_lipschitz_claim_when_lebesgue_is_at_least_two(data):
    space, cover, _ = data
    rep = certify_lipschitz_nerve_map(space, cover)
    if math.isfinite(rep["lebesgue"]) and rep["lebesgue"] >= 2:
        assert rep["passed"], rep
