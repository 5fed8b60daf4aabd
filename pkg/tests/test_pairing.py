from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from oracles import commuting_trace_oracle, symbolic_difference, symbolic_ztz
from quantk.blocks import BlockOperator
from quantk.errors import PairabilityError, ValidationError
from quantk.filtered import LipschitzElement, lipschitz_element
from quantk.metric import path_space
from quantk.pairing import (LipschitzClass, basic_product, difference_closed_form,
                            difference_closed_form_displayed, difference_construction,
                            difference_matrix, pair_to_integer, ztz_defect, z_matrix)
from quantk.params import ParameterTuple
from quantk.quantitative import KClassQuantitative, certify, class_rank
from quantk.suites import random_quasi_pair

A_SYM, B_SYM, SYMBOLIC_D = symbolic_difference()


def evaluate(expr, a, b):
    """Substitute square matrices for the noncommuting symbols ``a`` and ``b``."""
    n = a.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for term in sympy.Add.make_args(sympy.expand(expr)):
        if term == 0:
            continue
        coeff, factors = term.as_coeff_mul()
        M = complex(coeff) * np.eye(n, dtype=complex)
        for f in factors:
            base, exp = f.as_base_exp()
            mat = {A_SYM: a, B_SYM: b}.get(base)
            if mat is None:  # a bare number folded into the product
                M = M * complex(f)
                continue
            M = M @ np.linalg.matrix_power(mat, int(exp))
        out += M
    return out


def symbolic_blocks(a, b):
    n = a.shape[0]
    return np.block([[evaluate(SYMBOLIC_D[i, j], a, b) for j in range(4)] for i in range(4)]) \
        if n else None


def projection(rng, n, rank):
    S = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    return S @ np.diag([1.0] * rank + [0.0] * (n - rank)) @ np.linalg.inv(S)


# ---------------------------------------------------------------- Z matrices

def test_z_at_zero():
    Z = z_matrix(np.zeros((1, 1))).real
    assert np.array_equal(Z, [[0, 0, 1, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 1, 0, 0]])


def test_ztz_is_identity_for_idempotents(rng):
    b = projection(rng, 3, 2)
    assert ztz_defect(b) <= 1e-12


def test_symbolic_ztz_vanishes_on_idempotents():
    b, M = symbolic_ztz()
    # every off-identity entry is a multiple of b - b^2
    reduced = M.applyfunc(lambda e: sympy.expand(e).subs(b ** 3, b).subs(b ** 2, b))
    assert reduced == sympy.eye(4)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5), st.floats(1e-6, 0.04))
def test_ztz_bound(seed, n, eta):
    rng = np.random.default_rng(seed)
    b = projection(rng, n, int(rng.integers(0, n + 1)))
    E = rng.standard_normal((n, n))
    b = b + eta * E / np.linalg.norm(E, 2)
    eps = np.linalg.norm(b @ b - b, 2)
    if eps == 0:
        return
    assert ztz_defect(b) < 8 * eps


# ------------------------------------------------------- difference construction

def test_equal_inputs_collapse():
    a = np.diag([1.0, 0.0])
    D = difference_matrix(a, a)
    expected = np.zeros((8, 8))
    expected[:2, :2] = np.eye(2)
    assert np.allclose(D, expected, atol=1e-15)


def test_zero_beta_gives_alpha_in_third_slot(rng):
    a = rng.standard_normal((2, 2))
    D = difference_matrix(a, np.zeros((2, 2)))
    expected = np.zeros((8, 8))
    expected[:2, :2] = np.eye(2)
    expected[4:6, 4:6] = a
    assert np.allclose(D, expected, atol=1e-15)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
def test_closed_form_matches_symbolic_expansion(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    ref = symbolic_blocks(a, b)
    assert np.abs(difference_matrix(a, b) - ref).max() <= 1e-10 * max(1, np.abs(ref).max())
    assert np.abs(difference_closed_form(a, b) - ref).max() <= 1e-10 * max(1, np.abs(ref).max())


def test_displayed_form_disagrees_even_for_projections():
    # pinned: two non-commuting rank-one projections in the plane
    a = np.diag([1.0, 0.0])
    b = 0.5 * np.ones((2, 2))
    true = difference_matrix(a, b)
    shown = difference_closed_form_displayed(a, b)
    c = np.eye(2) - b
    assert np.allclose(true[:2, 4:6], b @ (a - b) @ c)
    assert np.allclose(true[4:6, :2], c @ (a - b) @ b)
    assert np.abs(true - shown).max() == pytest.approx(0.25)


def test_construction_certifies_random_pairs():
    for t in range(20):
        rng = np.random.default_rng(1000 + t)
        a, b, params, _ = random_quasi_pair(rng, path_space(5), 2)
        res = difference_construction(a, b, check_closed_form=True, check_ztz=True)
        assert res.element.valid, res.as_json()
        assert res.closed_form_error <= 1e-12
        assert res.ztz_defect < 8 * float(params.epsilon)
        e = res.element.params
        assert (e.epsilon, e.r, e.N) == (2 ** 8 * params.N ** 4 * params.epsilon, 3 * params.r,
                                         16 * params.N ** 3)


def test_construction_needs_equal_scalar_parts():
    space = path_space(2)
    p = ParameterTuple("1/100", 0, 1)
    a = certify(BlockOperator.from_scalar(space, 1, [[1.0]]), p)
    b = certify(BlockOperator.from_scalar(space, 1, [[0.0]]), p)
    with pytest.raises(ValidationError, match="scalar"):
        difference_construction(a, b)


# ----------------------------------------------------------- basic product

TINY = Fraction(1, 2 ** 200)


EXACT_2x2 = (np.zeros((2, 2)), np.eye(2), np.diag([1.0, 0.0]), np.diag([0.0, 1.0]),
             0.5 * np.ones((2, 2)), 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]]))


def _point_projection_field(rng, space, k):
    """Pointwise projections whose float products are exact (defect exactly 0)."""
    M = np.zeros((len(space) * k,) * 2, dtype=complex)
    for x in range(len(space)):
        if k == 2:
            blk = EXACT_2x2[int(rng.integers(len(EXACT_2x2)))]
        else:
            blk = np.diag(rng.integers(0, 2, size=k).astype(float))
        M[x * k:(x + 1) * k, x * k:(x + 1) * k] = blk
    return M


def test_product_with_identity_projection(rng):
    space = path_space(4)
    P = certify(BlockOperator.from_dense(space, 2, _point_projection_field(rng, space, 2)),
                ParameterTuple(TINY, 0, 1))
    one = lipschitz_element(space, np.ones(4))
    Q = basic_product(P, one)
    assert np.allclose(Q.element.to_dense(), P.element.to_dense())
    assert Q.valid


def test_product_with_scalar_one():
    space = path_space(4)
    P = certify(BlockOperator.from_scalar(space, 1, [[1.0]]), ParameterTuple(TINY, 0, 1))
    p = lipschitz_element(space, np.array([1.0, 1.0, 0.0, 0.0]))
    Q = basic_product(P, p)
    assert np.allclose(Q.element.to_dense(), np.diag([1.0, 1.0, 0.0, 0.0]))
    assert Q.certificate.norm_e2_minus_e == 0


def test_product_rejects_non_projection():
    space = path_space(3)
    P = certify(BlockOperator.from_scalar(space, 1, [[1.0]]), ParameterTuple(TINY, 0, 1))
    with pytest.raises(ValidationError, match="projection"):
        basic_product(P, lipschitz_element(space, np.array([0.0, 0.5, 1.0])))


# ----------------------------------------------------------------- pairing

def _class(space, k, M_plus, M_minus, params):
    plus = certify(BlockOperator.from_dense(space, k, M_plus), params)
    minus = certify(BlockOperator.from_dense(space, k, M_minus), params)
    return KClassQuantitative(plus, minus)


def test_zero_class_pairs_to_zero(rng):
    space = path_space(5)
    M = _point_projection_field(rng, space, 2)
    params = ParameterTuple(TINY, 0, 1, 1)
    qc = _class(space, 2, M, M, params)
    lc = LipschitzClass(lipschitz_element(space, np.array([1, 1, 1, 0, 0.0])),
                        LipschitzElement(space, np.zeros((5, 1, 1)), 1.0))
    assert pair_to_integer(qc, lc, params) == 0


def test_equal_lipschitz_representatives_pair_to_zero(rng):
    space = path_space(5)
    params = ParameterTuple(TINY, 0, 1, 1)
    qc = _class(space, 2, _point_projection_field(rng, space, 2), np.zeros((10, 10)), params)
    p = lipschitz_element(space, np.array([0, 1, 1, 1, 0.0]))
    assert pair_to_integer(qc, LipschitzClass(p, p), params) == 0


@pytest.mark.parametrize("seed", range(6))
def test_commuting_projections_match_trace_oracle(seed):
    rng = np.random.default_rng(seed)
    space = path_space(6)
    k = 2
    Mp = _point_projection_field(rng, space, k)
    Mm = _point_projection_field(rng, space, k)
    params = ParameterTuple(TINY, 0, 1, 1)
    qc = _class(space, k, Mp, Mm, params)
    v1 = np.array([1, 1, 1, 0, 0, 0.0])
    v2 = np.array([0, 0, 1, 1, 0, 0.0])
    lc = LipschitzClass(lipschitz_element(space, v1), lipschitz_element(space, v2))
    oracle = commuting_trace_oracle(Mp, v1 - v2, k) - commuting_trace_oracle(Mm, v1 - v2, k)
    k_pair, report = pair_to_integer(qc, lc, params, with_report=True)
    assert k_pair == round(oracle)
    assert report["final"]["valid"]
    assert report["reference_scalar_is_e11_pattern"]


def test_non_pairable_parameters_are_refused():
    space = path_space(3)
    params = ParameterTuple("1/100", 1, 2, 1)
    qc = _class(space, 1, np.diag([1.0, 0, 0]), np.zeros((3, 3)), params)
    lc = LipschitzClass(lipschitz_element(space, np.array([1, 0, 0.0])),
                        LipschitzElement(space, np.zeros((3, 1, 1)), 1.0))
    with pytest.raises(PairabilityError) as info:
        pair_to_integer(qc, lc, params)
    rep = info.value.report
    assert rep["pairable"] is False and rep["relation"] == "<"
    assert pair_to_integer(qc, lc, params, override=True) == 1


def test_lipschitz_class_needs_matching_scalars():
    space = path_space(2)
    a = LipschitzElement(space, np.zeros((2, 1, 1)), 1.0, np.ones((1, 1)))
    b = LipschitzElement(space, np.zeros((2, 1, 1)), 1.0)
    with pytest.raises(ValidationError):
        LipschitzClass(a, b)


def test_class_rank_of_pairing_output_is_consistent(rng):
    space = path_space(4)
    params = ParameterTuple(TINY, 0, 1, 1)
    Mp = _point_projection_field(rng, space, 1)
    qc = _class(space, 1, Mp, np.zeros((4, 4)), params)
    assert class_rank(qc) == round(np.trace(Mp).real)


# ------------------------------------------------------ additivity / homotopy

def _direct_sum(M1, k1, M2, k2, n_pts):
    k = k1 + k2
    out = np.zeros((n_pts * k, n_pts * k), dtype=complex)
    for x in range(n_pts):
        for y in range(n_pts):
            out[x * k:x * k + k1, y * k:y * k + k1] = M1[x * k1:(x + 1) * k1, y * k1:(y + 1) * k1]
            out[x * k + k1:(x + 1) * k, y * k + k1:(y + 1) * k] = \
                M2[x * k2:(x + 1) * k2, y * k2:(y + 1) * k2]
    return out


@pytest.mark.parametrize("seed", range(4))
def test_pairing_is_additive_over_direct_sums(seed):
    rng = np.random.default_rng(50 + seed)
    space = path_space(5)
    params = ParameterTuple(TINY, 0, 1, 1)
    A = [_point_projection_field(rng, space, 2) for _ in range(4)]
    lc = LipschitzClass(lipschitz_element(space, np.array([1, 1, 0, 0, 0.0])),
                        lipschitz_element(space, np.array([0, 0, 0, 1, 0.0])))
    first = pair_to_integer(_class(space, 2, A[0], A[1], params), lc, params)
    second = pair_to_integer(_class(space, 2, A[2], A[3], params), lc, params)
    both = _class(space, 4, _direct_sum(A[0], 2, A[2], 2, 5), _direct_sum(A[1], 2, A[3], 2, 5),
                  params)
    assert pair_to_integer(both, lc, params) == first + second


def test_pairing_is_constant_along_a_straight_line_homotopy(rng):
    space = path_space(4)
    M0 = _point_projection_field(rng, space, 2)
    E = rng.standard_normal(M0.shape) * np.kron(np.eye(4), np.ones((2, 2)))
    M1 = M0 + 0.01 * E / np.linalg.norm(E, 2)
    params = ParameterTuple("1/50", 0, 2, 1)
    lc = LipschitzClass(lipschitz_element(space, np.array([1, 1, 0, 0.0])),
                        LipschitzElement(space, np.zeros((4, 1, 1)), 1.0))
    values = set()
    for t in np.linspace(0, 1, 6):
        qc = _class(space, 2, (1 - t) * M0 + t * M1, np.zeros_like(M0), params)
        assert qc.plus.valid
        values.add(pair_to_integer(qc, lc, params, override=True))
    assert values == {round(np.trace(M0[:4, :4]).real)}
