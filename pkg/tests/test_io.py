import json
from fractions import Fraction

import numpy as np
import pytest

from quantk.errors import QuantkError, ValidationError
from quantk.io import (constants_from_json, cover_from_json, dumps, lipschitz_from_json,
                       params_from_json, quasi_class_from_json, read_json, space_from_json,
                       to_jsonable, write_report)
from quantk.metric import path_space

PATH4 = {"name": "path4", "points": [0, 1, 2, 3],
         "distance": [[0, 1, 2, 3], [1, 0, 1, 2], [2, 1, 0, 1], [3, 2, 1, 0]]}


# ---------------------------------------------------------------- encoding

def test_non_finite_floats_become_strings():
    assert to_jsonable([np.inf, -np.inf, np.nan, 1.5]) == ["inf", "-inf", "nan", 1.5]


def test_fractions_and_complex():
    assert to_jsonable(Fraction(2 ** 70, 3)) == f"{2 ** 70}/3"
    assert to_jsonable(1 + 2j) == {"re": 1.0, "im": 2.0}


def test_dumps_is_sorted_and_strict():
    text = dumps({"b": 1, "a": float("inf")})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": "inf", "b": 1}


def test_unencodable_object():
    with pytest.raises(TypeError):
        to_jsonable(object())


def test_unwritable_report(tmp_path):
    with pytest.raises(QuantkError, match="cannot write"):
        write_report({}, tmp_path / "missing" / "out.json")


# ---------------------------------------------------------------- reading

def test_read_json_reports_line_and_column(tmp_path):
    f = tmp_path / "broken.json"
    f.write_text('{"a": 1,\n "b": }')
    with pytest.raises(ValidationError, match="broken.json: line 2 column 7") as info:
        read_json(f)
    assert info.value.diagnostics == {"line": 2, "column": 7}


def test_read_json_needs_an_object(tmp_path):
    f = tmp_path / "list.json"
    f.write_text("[1, 2]")
    with pytest.raises(ValidationError, match="top level"):
        read_json(f)


def test_read_json_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="cannot read"):
        read_json(tmp_path / "nope.json")


# ---------------------------------------------------------------- spaces

def test_explicit_distance_space():
    s = space_from_json(PATH4)
    assert s.name == "path4" and len(s) == 4 and s.dist[0, 3] == 3


def test_edge_list_space_with_tuple_labels():
    s = space_from_json({"points": [[0, 0], [0, 1], [1, 1]],
                         "edges": [[[0, 0], [0, 1]], [[0, 1], [1, 1], 2.5]]})
    assert s.dist[0, 2] == 3.5
    assert (1, 1) in s.point_ids


@pytest.mark.parametrize("d, n", [({"generator": "path", "n": 5}, 5),
                                  ({"generator": "grid", "rows": 2, "cols": 3}, 6),
                                  ({"generator": "torus", "size": 4}, 16)])
def test_generated_spaces(d, n):
    assert len(space_from_json(d)) == n


@pytest.mark.parametrize("d, match", [
    ({"generator": "sphere"}, "unknown generator"),
    ({"generator": "path", "n": 0}, r"space.n: must be at least 1"),
    ({"generator": "path", "n": 2.5}, "expected an integer"),
    ({"points": []}, "non-empty"),
    ({"points": [0, 1], "edges": [[0, 7]]}, r"space.edges\[0\]: unknown point 7"),
    ({"points": [0, 1], "edges": [[0]]}, r"edges\[0\]"),
    ({"points": [0, 1], "distance": [[0, 1], [2, 0]]}, "space.distance"),
    ({"points": [0, 1], "distance": [[0, "x"], [1, 0]]}, "rectangular"),
])
def test_space_diagnostics(d, match):
    with pytest.raises(ValidationError, match=match):
        space_from_json(d)


# ---------------------------------------------------------------- covers

@pytest.mark.parametrize("d", [
    {"sets": [{"name": "U1", "points": [0, 1, 2]}, {"name": "U2", "points": [1, 2, 3]}]},
    {"sets": {"U1": [0, 1, 2], "U2": [1, 2, 3]}},
    {"sets": [[0, 1, 2], [1, 2, 3]], "names": ["U1", "U2"]},
])
def test_cover_formats_agree(d):
    c = cover_from_json(d, space_from_json(PATH4))
    assert c.names == ("U1", "U2")
    assert c.sets == (frozenset({0, 1, 2}), frozenset({1, 2, 3}))


def test_ball_cover():
    c = cover_from_json({"balls": [{"center": 0, "radius": 2}, {"center": 3, "radius": 2}]},
                        space_from_json(PATH4))
    assert c.sets == (frozenset({0, 1}), frozenset({2, 3}))


def test_cover_must_cover():
    with pytest.raises(ValidationError, match="cover.*2"):
        cover_from_json({"sets": [[0, 1], [3]]}, space_from_json(PATH4))


def test_cover_set_must_be_a_list():
    with pytest.raises(ValidationError, match=r"cover.sets\[1\]"):
        cover_from_json({"sets": [[0, 1], 3]}, space_from_json(PATH4))


# ---------------------------------------------------------------- params

def test_params_and_constants():
    p = params_from_json({"epsilon": "1/100", "r": 3, "N": 7, "L": "1/2"})
    assert p.L == Fraction(1, 2)
    c = constants_from_json({"C": "1", "C_prime": "1", "omega_0": "1", "N": "7"})
    assert c.N == 7
    with pytest.raises(ValidationError, match="^params"):
        params_from_json({"epsilon": "1/100"})


# ---------------------------------------------------------------- classes

def test_class_with_pair_entries_and_named_space():
    space = space_from_json(PATH4)
    M = np.zeros((4, 4, 2))
    M[0, 0, 0] = M[1, 1, 0] = 1.0
    M[0, 1, 1] = 0.0
    d = {"space": "path4", "internal_dim": 1,
         "plus": {"matrix": M.tolist(), "scalar_part": [0, 0]},
         "minus": {"scalar_part": [0, 0]}}
    sp_, k, levels, plus, minus = quasi_class_from_json(d, space=space)
    assert k == 1 and levels == 1
    assert np.array_equal(plus.to_dense(), np.diag([1, 1, 0, 0]))
    assert np.array_equal(minus.to_dense(), np.zeros((4, 4)))


def test_class_with_imag_part_and_embedded_space():
    d = {"space": PATH4, "fiber": 1,
         "plus": {"matrix": np.eye(4).tolist(), "imag": (0.5 * np.eye(4)).tolist(),
                  "scalar": [[1]]},
         "minus": {"scalar": [[1]]}}
    _, _, _, plus, _ = quasi_class_from_json(d)
    assert np.allclose(plus.to_dense(), (1 + 0.5j) * np.eye(4))


@pytest.mark.parametrize("d, space, match", [
    ({"space": "path4", "plus": {}, "minus": {}}, None, "no space file"),
    ({"space": "grid", "plus": {}, "minus": {}}, "path4", "the space file is 'path4'"),
    ({"space": PATH4, "minus": {}}, None, "missing field 'plus'"),
    ({"space": PATH4, "plus": {"matrix": np.eye(3).tolist()}, "minus": {}}, None,
     r"class.plus.matrix: expected shape \(4, 4\)"),
    ({"space": PATH4, "plus": {"matrix": np.eye(4).tolist(), "imag": [[0]]}, "minus": {}}, None,
     "class.plus.imag"),
    ({"space": PATH4, "plus": {"scalar_part": [1, 2, 3]}, "minus": {}}, None, "re, im"),
])
def test_class_diagnostics(d, space, match):
    s = space_from_json(PATH4) if space else None
    with pytest.raises(ValidationError, match=match):
        quasi_class_from_json(d, space=s)


# ---------------------------------------------------------------- lipschitz

def test_indicator_and_zero():
    space = path_space(4)
    plus, minus = lipschitz_from_json({"plus": {"indicator": [0, 1]}, "minus": "zero"}, space)
    assert np.array_equal(plus.values[:, 0, 0], [1, 1, 0, 0])
    assert not minus.values.any()
    assert plus.lipschitz_L == minus.lipschitz_L == 1


def test_function_values_with_declared_constant():
    space = path_space(3)
    plus, _ = lipschitz_from_json({"L": 2, "plus": {"function": [0, 1, 1]}}, space)
    assert plus.lipschitz_L == 2


def test_projection_values_with_pair_entries():
    space = path_space(2)
    V = np.zeros((2, 2, 2, 2))
    V[0, 0, 0, 0] = 1.0
    V[1, 1, 1, 0] = 1.0
    plus, minus = lipschitz_from_json({"plus": {"values": V.tolist()}, "minus": "zero"}, space)
    assert plus.values.shape == minus.values.shape == (2, 2, 2)


@pytest.mark.parametrize("d, match", [
    ({}, "missing field 'plus'"),
    ({"plus": {"indicator": [9]}}, r"lipschitz.plus"),
    ({"plus": {"function": [1, 0]}}, "expected 3 values"),
    ({"plus": 5}, "zero"),
])
def test_lipschitz_diagnostics(d, match):
    with pytest.raises(ValidationError, match=match):
        lipschitz_from_json(d, path_space(3))


def test_mismatched_sizes_are_rejected():
    V = np.zeros((3, 2, 2))
    with pytest.raises(ValidationError, match="different matrix sizes"):
        lipschitz_from_json({"plus": {"values": V.tolist()}, "minus": {"function": [1, 1, 1]}},
                            path_space(3))
