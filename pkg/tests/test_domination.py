import numpy as np
import pytest

from ncpsatz.domination import (
    DominationCertificate, check_domination, compose, domination_residual, strengthen_bounded, witness_margins,
)
from ncpsatz.freealg import DimensionError
from ncpsatz.moment import Witness
from ncpsatz.pencil import MonicPencil, NoUnitCertificate
from instances import ball_pencil, random_pencil


def scaled(L, c):
    """``I + c sum x_j A_j``: contains ``L`` for ``0 < c <= 1``."""
    return MonicPencil(tuple(c * a for a in L.A))


def test_reflexive_ball(ball):
    cert = check_domination(ball, ball)
    assert isinstance(cert, DominationCertificate)
    assert np.abs(cert.S).max() <= 1e-8
    assert np.allclose(sum(v.T @ v for v in cert.V), np.eye(2), atol=1e-7)
    assert cert.residual(ball, ball) <= 1e-8


def test_ball_in_half_line(ball, halfline):
    cert = check_domination(ball, halfline)
    assert isinstance(cert, DominationCertificate)
    assert cert.residual(ball, halfline) <= 1e-8
    assert np.abs(cert.S).max() <= 1e-7
    V = sum((v @ v.T for v in cert.V), np.zeros((2, 2)))  # V V^T, sign free
    target = np.array([[0.5, -0.5], [-0.5, 0.5]])
    assert np.allclose(V, target, atol=1e-6)


def test_half_line_not_in_ball(ball, halfline):
    W = check_domination(halfline, ball)
    assert isinstance(W, Witness)
    mL, mLp = witness_margins(halfline, ball, W)
    assert mL >= -1e-8 and mLp <= -1e-7


def test_dimension_mismatch(ball):
    L2 = ball_pencil(2)
    with pytest.raises(DimensionError):
        check_domination(ball, L2)


def test_seeded_reflexivity_and_shrinking():
    rng = np.random.default_rng(11)
    for _ in range(4):
        L = ball_pencil(2, rng)
        for Lp in (L, scaled(L, 0.5)):
            cert = check_domination(L, Lp)
            assert isinstance(cert, DominationCertificate)
            assert cert.residual(L, Lp) <= 1e-8
            assert np.linalg.eigvalsh((cert.S + cert.S.T) / 2)[0] >= -1e-8


def test_failed_domination_witness_margins():
    rng = np.random.default_rng(12)
    for _ in range(3):
        L = ball_pencil(2, rng)
        Lp = scaled(L, 2.0)  # strictly smaller domain
        W = check_domination(L, Lp)
        assert isinstance(W, Witness)
        mL, mLp = witness_margins(L, Lp, W)
        assert mL >= -1e-8 and mLp <= -1e-7


def test_composition():
    rng = np.random.default_rng(13)
    for _ in range(3):
        L = ball_pencil(2, rng)
        L1, L2 = scaled(L, 0.7), scaled(L, 0.4)
        c1, c2 = check_domination(L, L1), check_domination(L1, L2)
        both = compose(c1, c2)
        assert domination_residual(L, L2, both) <= 2e-8


def test_composition_with_random_pencil():
    rng = np.random.default_rng(14)
    L = random_pencil(2, 3, rng)
    c1 = check_domination(L, L)
    c2 = check_domination(L, scaled(L, 0.5))
    assert domination_residual(L, scaled(L, 0.5), compose(c1, c2)) <= 2e-8


# ---- strengthening

def test_strengthen_zero_s(ball):
    V = [np.eye(2)]
    assert strengthen_bounded(ball, DominationCertificate(np.zeros((2, 2)), V)) == V


def test_strengthen_identity_on_ball(ball):
    cert = DominationCertificate(np.eye(1), [])
    V = strengthen_bounded(ball, cert)
    pure = DominationCertificate(np.zeros((1, 1)), V)
    Lp = MonicPencil((np.zeros((1, 1)),))  # the constant 1
    assert domination_residual(ball, Lp, pure) <= 1e-8


def test_strengthen_found_certificate(ball, halfline):
    cert = check_domination(ball, halfline)
    cert = DominationCertificate(cert.S + 0.25 * np.eye(1), cert.V)  # L' + 1/4 still dominated
    Lp = MonicPencil(halfline.A)
    pure = DominationCertificate(np.zeros((1, 1)), strengthen_bounded(ball, cert))
    target = DominationCertificate(cert.S, cert.V)
    assert abs(domination_residual(ball, Lp, pure) - domination_residual(ball, Lp, target)) <= 1e-8


def test_strengthen_unbounded_fails(halfline):
    with pytest.raises(NoUnitCertificate):
        strengthen_bounded(halfline, DominationCertificate(np.eye(1), []))


def test_certificate_json_round_trip(ball, halfline):
    cert = check_domination(ball, halfline)
    again = DominationCertificate.from_json(cert.to_json())
    assert domination_residual(ball, halfline, again) == pytest.approx(cert.residual(ball, halfline), abs=1e-15)
