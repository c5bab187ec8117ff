import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncpsatz.freealg import (
    DimensionError, MalformedInput, MatPoly, ParseError, enumerate_basis, evaluate, format_poly,
    parse_poly, poly_arith, random_tuple, sigma, word_ops,
)
from instances import random_poly


# ---- words and bases

def test_word_involution_reverses():
    assert word_ops("involution", (1, 2, 3)) == (3, 2, 1)


def test_word_concat_with_empty():
    assert word_ops("concat", (), (2, 1)) == (2, 1)


def test_word_degree():
    assert word_ops("degree", (1, 1, 2)) == 3


def test_word_index_out_of_range():
    with pytest.raises(MalformedInput):
        word_ops("involution", (1, 4), g=3)


def test_star_of_product_letters():
    """(2 - 3 x1^2 x2 x3)* = 2 - 3 x3 x2 x1^2."""
    p = parse_poly("2 - 3*x1*x1*x2*x3", 3)
    assert p.adjoint() == parse_poly("2 - 3*x3*x2*x1*x1", 3)


def test_basis_g2_d2_order():
    assert enumerate_basis(2, 2) == [(), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]


@pytest.mark.parametrize("g,d,n", [(1, 3, 4), (3, 2, 13), (2, 2, 7)])
def test_basis_lengths(g, d, n):
    assert len(enumerate_basis(g, d)) == n == sigma(g, d)


def test_basis_length_formula_small_range():
    for g in range(1, 5):
        for d in range(6):
            assert len(enumerate_basis(g, d)) == sum(g**j for j in range(d + 1))


# ---- arithmetic

def test_noncommutativity():
    x1, x2 = MatPoly.var(1, 2), MatPoly.var(2, 2)
    diff = x1 * x2 - x2 * x1
    assert not diff.is_zero()
    assert diff == parse_poly("x1*x2 - x2*x1", 2)


def test_row_times_column():
    row = parse_poly('[["1", "-x1"]]', 1)
    col = parse_poly('[["1"], ["-x1"]]', 1)
    assert row * col == parse_poly("1 + x1*x1", 1)


def test_shape_mismatch_raises():
    a = MatPoly.zero((2, 3), 1)
    with pytest.raises(DimensionError):
        poly_arith("add", a, MatPoly.zero((3, 2), 1))
    with pytest.raises(DimensionError):
        poly_arith("mul", a, a)


def test_pruning_drops_tiny_terms():
    p = MatPoly({(1,): [[1e-15]], (): [[1.0]]}, (1, 1), 1)
    assert list(p.terms) == [()]
    assert MatPoly.zero().degree == -np.inf


def test_poly_arith_kinds():
    p = parse_poly("1 + x1*x2", 2)
    assert poly_arith("scale", p, 2.0) == parse_poly("2 + 2*x1*x2", 2)
    assert poly_arith("adjoint", p) == parse_poly("1 + x2*x1", 2)
    assert poly_arith("sub", p, p).is_zero()


@given(st.integers(0, 10_000))
def test_ring_axioms(seed):
    rng = np.random.default_rng(seed)
    P, Q, R = (random_poly(2, 2, (2, 2), rng) for _ in range(3))
    assert ((P + Q) * R).allclose(P * R + Q * R, 1e-10)
    assert ((P * Q) * R).allclose(P * (Q * R), 1e-10)
    assert (P * Q).adjoint().allclose(Q.adjoint() * P.adjoint(), 1e-12)
    assert P.adjoint().adjoint() == P


# ---- evaluation

def test_evaluate_product():
    X1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    X2 = np.array([[1.0, 0.0], [0.0, -1.0]])
    out = evaluate(MatPoly.monomial((1, 2), 1.0, 2), [X1, X2])
    assert np.array_equal(out, [[0.0, -1.0], [1.0, 0.0]])


def test_evaluate_constant_block():
    c = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = evaluate(MatPoly.const(c, 1), [np.zeros((3, 3))])
    assert np.allclose(out, np.kron(c, np.eye(3)))


def test_evaluate_arity_mismatch():
    with pytest.raises(DimensionError):
        evaluate(MatPoly.var(1, 2), [np.eye(2)])


@given(st.integers(0, 10_000))
def test_evaluation_is_homomorphism(seed):
    rng = np.random.default_rng(seed)
    P = random_poly(2, 2, (2, 3), rng)
    Q = random_poly(2, 2, (3, 2), rng)
    X = random_tuple(2, 3, rng)
    assert np.max(np.abs((P * Q)(X) - P(X) @ Q(X))) <= 1e-9
    assert np.max(np.abs(P.adjoint()(X) - P(X).T)) <= 1e-9


def test_symmetric_poly_symmetric_value():
    rng = np.random.default_rng(3)
    for _ in range(20):
        P = random_poly(3, 4, (2, 2), rng, symmetric=True)
        V = P(random_tuple(3, 3, rng))
        assert np.max(np.abs(V - V.T)) <= 1e-10


# ---- text form

def test_parse_basic():
    p = parse_poly("2 - x1*x2", 2)
    assert p.terms.keys() == {(), (1, 2)}
    assert p.coeff(())[0, 0] == 2 and p.coeff((1, 2))[0, 0] == -1


def test_parse_involution_postfix():
    assert parse_poly("(x1*x2)'", 2) == parse_poly("x2*x1", 2)


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_poly("1 +\n  * x1", 1)
    assert info.value.line == 2


def test_parse_rejects_large_index():
    with pytest.raises((ParseError, MalformedInput)):
        parse_poly("x3", 2)


def test_round_trip_corpus():
    rng = np.random.default_rng(11)
    for _ in range(100):
        g = int(rng.integers(1, 4))
        P = random_poly(g, int(rng.integers(0, 4)), (1, 1), rng, density=0.5)
        assert parse_poly(format_poly(P), g) == P


def test_round_trip_matrix():
    rng = np.random.default_rng(12)
    P = random_poly(2, 2, (2, 2), rng)
    assert parse_poly(format_poly(P), 2) == P
    assert MatPoly.from_dict(json.loads(json.dumps(P.to_dict())), 2) == P
