"""JSON input files and report encoding.

Every loader raises :class:`ValidationError` whose message starts with the
file name and the offending field path, e.g. ``cover.json: sets[2]: ...``.
Decoding errors carry the line and column reported by :mod:`json`.

Formats
-------
space    ``{"name": str, "points": [...], "distance": [[...]]}``
         ``{"points": [...], "edges": [[a, b], [a, b, w], ...]}``
         ``{"generator": "path" | "grid" | "torus", ...}``
cover    ``{"sets": [{"name": str, "points": [...]}]}``, ``{"sets": {"name": [...]}}``
         or ``{"balls": [{"center": x, "radius": r}]}``
params   ``{"epsilon": "1/100", "r": 3, "N": 7, "L": 1}``
constants ``{"C": 1, "C_prime": 1, "omega_0": 1, "N": 7}``
class    ``{"space": {...} | "name", "fiber": k, "levels": l,
           "plus": {"matrix": [[...]], "imag": [[...]], "scalar": [[...]]},
           "minus": {...}}``; ``"internal_dim"`` may replace ``"fiber"``,
         ``"scalar_part": [re, im]`` may replace ``"scalar"``
matrices may also be written with ``[re, im]`` entries
lipschitz ``{"L": 1, "plus": {"indicator": [labels]} | {"function": [...]} | {"values": [...]},
            "minus": ... | "zero"}``

Point labels that are JSON arrays become tuples, so ``[0, 1]`` names the grid
point ``(0, 1)``.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bounds import BoundConstants
from .errors import QuantkError, ValidationError
from .filtered import LipschitzElement, lipschitz_element
from .metric import (FiniteMetricSpace, OpenCover, ball, build_cover, build_metric_space,
                     graph_space, grid_space, path_space, torus_space)
from .params import ParameterTuple, fmt

SCHEMA = "quantk/1"


# ---------------------------------------------------------------- encoding
def to_jsonable(obj):
    """Plain JSON types; non-finite floats become ``"inf"``, ``"-inf"``, ``"nan"``."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, Fraction):
        return fmt(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj, key=repr) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if hasattr(obj, "as_json"):
        return to_jsonable(obj.as_json())
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: dict, out) -> None:
    text = dumps(report)
    if out is None or str(out) == "-":
        print(text, end="")
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise QuantkError(f"cannot write report to {out}: {exc.strerror}") from exc


# ---------------------------------------------------------------- decoding
def _fail(where: str, msg: str):
    raise ValidationError(f"{where}: {msg}")


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path.name}: cannot read: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path.name}: line {exc.lineno} column {exc.colno}: {exc.msg}",
                              {"line": exc.lineno, "column": exc.colno}) from exc
    if not isinstance(data, dict):
        _fail(path.name, "top level must be a JSON object")
    return data


def _label(x):
    return tuple(_label(v) for v in x) if isinstance(x, list) else x


def _require(d: dict, key: str, where: str):
    if key not in d:
        _fail(where, f"missing field {key!r}")
    return d[key]


def _int_field(d, key, where, minimum=None, default=None):
    v = d.get(key, default)
    if v is None:
        _fail(where, f"missing field {key!r}")
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{where}.{key}", f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(f"{where}.{key}", f"must be at least {minimum}")
    return v


def _wrapped(where: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}", exc.diagnostics) from exc


def space_from_json(d: dict, where: str = "space") -> FiniteMetricSpace:
    if not isinstance(d, dict):
        _fail(where, "expected an object")
    gen = d.get("generator")
    if gen is not None:
        if gen == "path":
            return path_space(_int_field(d, "n", where, 1), float(d.get("step", 1.0)))
        if gen == "grid":
            return grid_space(_int_field(d, "rows", where, 1), _int_field(d, "cols", where, 1))
        if gen == "torus":
            return torus_space(_int_field(d, "size", where, 1))
        _fail(f"{where}.generator", f"unknown generator {gen!r}")
    key = "points" if "points" in d or "labels" not in d else "labels"
    labels = _require(d, key, where)
    if not isinstance(labels, list) or not labels:
        _fail(f"{where}.{key}", "expected a non-empty list")
    labels = [_label(x) for x in labels]
    if "distance" in d:
        D = _real_array(d["distance"], f"{where}.distance") if d["distance"] else d["distance"]
        return _wrapped(f"{where}.distance", build_metric_space, labels, D,
                        name=str(d.get("name", "space")))
    edges = _require(d, "edges", where)
    pairs, weights = [], []
    known = set(labels)
    for k, e in enumerate(edges):
        if not isinstance(e, list) or len(e) not in (2, 3):
            _fail(f"{where}.edges[{k}]", "expected [a, b] or [a, b, weight]")
        a, b = _label(e[0]), _label(e[1])
        for x in (a, b):
            if x not in known:
                _fail(f"{where}.edges[{k}]", f"unknown point {x!r}")
        pairs.append((a, b))
        weights.append(float(e[2]) if len(e) == 3 else 1.0)
    return _wrapped(f"{where}.edges", graph_space, labels, pairs, weights,
                    name=str(d.get("name", "graph")))


def cover_from_json(d: dict, space: FiniteMetricSpace, where: str = "cover") -> OpenCover:
    if "balls" in d:
        sets, names = [], []
        for k, b in enumerate(d["balls"]):
            w = f"{where}.balls[{k}]"
            if not isinstance(b, dict):
                _fail(w, "expected {center, radius}")
            c = _label(_require(b, "center", w))
            r = _require(b, "radius", w)
            sets.append(_wrapped(w, ball, space, c, float(r)))
            names.append(str(b.get("name", f"B{k + 1}")))
        return _wrapped(where, build_cover, space, sets, names)
    sets = _require(d, "sets", where)
    if isinstance(sets, dict):
        names = list(sets)
        sets = list(sets.values())
    elif isinstance(sets, list) and sets and all(isinstance(x, dict) for x in sets):
        names = [str(_require(x, "name", f"{where}.sets[{k}]")) for k, x in enumerate(sets)]
        sets = [_require(x, "points", f"{where}.sets[{k}]") for k, x in enumerate(sets)]
    else:
        names = d.get("names")
    if not isinstance(sets, list):
        _fail(f"{where}.sets", "expected a list")
    for k, s in enumerate(sets):
        if not isinstance(s, list):
            _fail(f"{where}.sets[{k}]", "expected a list of point labels")
    return _wrapped(where, build_cover, space, [[_label(x) for x in s] for s in sets], names)


def space_to_json(space: FiniteMetricSpace) -> dict:
    return {"name": space.name, "points": list(space.point_ids), "distance": space.dist}


def nerve_to_json(cx) -> dict:
    return {"vertices": list(cx.vertices), "simplices": [sorted(s) for s in cx.simplices],
            "dim": cx.dim}


def params_from_json(d: dict, where: str = "params") -> ParameterTuple:
    return _wrapped(where, ParameterTuple.from_json, d)


def constants_from_json(d: dict, where: str = "constants") -> BoundConstants:
    return _wrapped(where, BoundConstants.from_json, d)


def _matrix(d: dict, key: str, where: str, shape=None, ndim=None) -> np.ndarray:
    """Real array plus optional ``<key>_imag``, or entries written as ``[re, im]``."""
    im_key = "imag" if key == "matrix" else f"{key}_imag"
    ndim = len(shape) if shape is not None else ndim
    M = _real_array(_require(d, key, where), f"{where}.{key}")
    if ndim is not None and M.ndim == ndim + 1 and M.shape[-1] == 2:
        M = M[..., 0] + 1j * M[..., 1]
    else:
        M = M.astype(np.complex128)
        if im_key in d:
            im = _real_array(d[im_key], f"{where}.{im_key}")
            if im.shape != M.shape:
                _fail(f"{where}.{im_key}", f"shape {im.shape} differs from {key} {M.shape}")
            M = M + 1j * im
    if shape is not None and M.shape != shape:
        _fail(f"{where}.{key}", f"expected shape {shape}, got {M.shape}")
    return M


def _complex_scalar(x, where) -> complex:
    a = _real_array(x, where)
    if a.shape == ():
        return complex(float(a))
    if a.shape == (2,):
        return complex(a[0], a[1])
    _fail(where, "expected a number or [re, im]")


def _real_array(x, where) -> np.ndarray:
    try:
        a = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError):
        _fail(where, "expected a rectangular array of numbers")
    if not np.all(np.isfinite(a)):
        _fail(where, "non-finite entry")
    return a


def quasi_class_from_json(d: dict, where: str = "class", space: FiniteMetricSpace | None = None):
    """``(space, fiber, levels, plus, minus)`` with dense BlockOperators.

    ``"space"`` is either an embedded space object or the name of ``space``.
    Each side takes ``"matrix"`` and a ``levels x levels`` ``"scalar"``, or a
    single ``"scalar_part"`` that multiplies the identity.
    """
    from .blocks import BlockOperator

    sd = _require(d, "space", where)
    if isinstance(sd, str):
        if space is None:
            _fail(f"{where}.space", f"refers to {sd!r} but no space file was given")
        if space.name != sd:
            _fail(f"{where}.space", f"refers to {sd!r}, the space file is {space.name!r}")
    else:
        space = space_from_json(sd, f"{where}.space")
    if "internal_dim" in d and "fiber" not in d:
        d = dict(d, fiber=d["internal_dim"])
    fiber = _int_field(d, "fiber", where, 1, default=1)
    levels = _int_field(d, "levels", where, 1, default=1)
    n = levels * len(space) * fiber
    out = []
    for side in ("plus", "minus"):
        w = f"{where}.{side}"
        e = _require(d, side, where)
        if not isinstance(e, dict):
            _fail(w, "expected an object")
        if "scalar" in e:
            S = _matrix(e, "scalar", w, (levels, levels))
        elif "scalar_part" in e:
            S = _complex_scalar(e["scalar_part"], f"{w}.scalar_part") * np.eye(levels)
        else:
            S = np.zeros((levels, levels), dtype=np.complex128)
        if "matrix" in e:
            M = _matrix(e, "matrix", w, (n, n))
            out.append(BlockOperator.from_dense(space, fiber, M, levels, S))
        else:
            out.append(BlockOperator.from_scalar(space, fiber, S))
    return space, fiber, levels, out[0], out[1]


def lipschitz_from_json(d: dict, space: FiniteMetricSpace, where: str = "lipschitz"):
    """``(plus, minus)`` LipschitzElements; ``minus`` defaults to ``"zero"``."""
    L = d.get("L")
    elems = []
    for side in ("plus", "minus"):
        w = f"{where}.{side}"
        e = d.get(side, "zero" if side == "minus" else None)
        if e is None:
            _fail(where, f"missing field {side!r}")
        elems.append(_lipschitz_values(e, space, w))
    n = max(v.shape[1] for v in elems)
    for k, v in enumerate(elems):
        if v.shape[1] != n and not v.any():  # "zero" takes the other side's size
            elems[k] = np.zeros((len(space), n, n), dtype=np.complex128)
        elif v.shape[1] != n:
            _fail(where, "plus and minus have different matrix sizes")
    out = []
    for side, v in zip(("plus", "minus"), elems):
        out.append(_wrapped(f"{where}.{side}", lipschitz_element, space, v,
                            None if L is None else float(L)))
    # both sides share one constant, the larger measured one
    Lmax = max(p.lipschitz_L for p in out)
    return tuple(LipschitzElement(space, p.values, Lmax) for p in out)


def _lipschitz_values(e, space, where) -> np.ndarray:
    P = len(space)
    if e == "zero":
        return np.zeros((P, 1, 1), dtype=np.complex128)
    if not isinstance(e, dict):
        _fail(where, 'expected an object or "zero"')
    if "indicator" in e:
        v = np.zeros(P)
        for x in e["indicator"]:
            v[_wrapped(where, space.index, _label(x))] = 1.0
        return v[:, None, None].astype(np.complex128)
    if "function" in e:
        v = np.asarray(e["function"], dtype=np.float64)
        if v.shape != (P,):
            _fail(f"{where}.function", f"expected {P} values, got shape {v.shape}")
        return v[:, None, None].astype(np.complex128)
    V = _matrix(e, "values", where, ndim=3)
    if V.ndim != 3 or V.shape[0] != P or V.shape[1] != V.shape[2]:
        _fail(f"{where}.values", f"expected shape ({P}, n, n), got {V.shape}")
    return V
