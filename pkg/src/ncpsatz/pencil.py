"""Monic linear pencils ``L(x) = I - sum_j A_j x_j`` and concave reductions."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import sdp
from .freealg import MatPoly, DimensionError, SYM_TOL, as_tuple

CONCAVE_TOL = 1e-9
RANK_TOL = 1e-9


class NotConcave(ValueError):
    pass


class NotMonic(ValueError):
    pass


class Indeterminate(RuntimeError):
    pass


@dataclass(frozen=True)
class MonicPencil:
    A: tuple

    def __post_init__(self):
        mats = tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in self.A)
        if not mats:
            raise DimensionError("a pencil needs at least one variable")
        ell = mats[0].shape[0]
        for a in mats:
            if a.shape != (ell, ell):
                raise DimensionError("pencil coefficients must be square and equal-sized")
            if np.max(np.abs(a - a.T)) > SYM_TOL:
                raise ValueError("pencil coefficients must be symmetric")
        object.__setattr__(self, "A", mats)

    @property
    def size(self):
        return self.A[0].shape[0]

    @property
    def nvars(self):
        return len(self.A)

    def as_poly(self) -> MatPoly:
        terms = {(): np.eye(self.size)}
        for j, a in enumerate(self.A, start=1):
            terms[(j,)] = -a
        return MatPoly(terms, (self.size, self.size), self.nvars)

    def __call__(self, X):
        X = as_tuple(X, self.nvars)
        n = X[0].shape[0]
        out = np.eye(self.size * n)
        for a, x in zip(self.A, X):
            out -= np.kron(a, x)
        return out

    def min_eig(self, X):
        return float(np.linalg.eigvalsh(self(X))[0])

    @classmethod
    def from_poly(cls, q: MatPoly, tol=1e-12):
        if q.degree > 1:
            raise ValueError("not a linear pencil (degree > 1)")
        check_monic(q, tol)
        if not q.is_symmetric():
            raise ValueError("pencil polynomial must be symmetric")
        return cls(tuple(-q.coeff((j,)) for j in range(1, q.nvars + 1)))

    def to_json(self):
        return {"size": self.size, "nvars": self.nvars, "A": [a.tolist() for a in self.A]}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        pen = cls(tuple(np.asarray(a, dtype=float) for a in data["A"]))
        if pen.size != data.get("size", pen.size) or pen.nvars != data.get("nvars", pen.nvars):
            raise DimensionError("pencil JSON size/nvars disagree with coefficients")
        return pen


def check_monic(q: MatPoly, tol=1e-12):
    if q.nrows != q.ncols or np.max(np.abs(q.coeff(()) - np.eye(q.nrows))) > tol:
        raise NotMonic(
            "q(0) must be the identity; without monicity the degree-bounded "
            "certificates can fail (e.g. q = [[x,1],[1,0]] has empty domain yet "
            "-1 is not in M_{0,0}, and q = [[1,x],[x,0]] leaves x outside every M_{a,b})")


@dataclass(frozen=True)
class ConcaveDecomposition:
    """``q = I - Lambda - s* s`` with ``Lambda`` and ``s`` homogeneous linear."""

    Lambda: MatPoly
    s: MatPoly  # (l' x l); l' may be 0

    @property
    def rank(self):
        return self.s.nrows

    def reconstruct(self):
        ell = self.Lambda.nrows
        out = MatPoly.identity(ell, self.Lambda.nvars) - self.Lambda
        if self.rank:
            out = out - self.s.adjoint() * self.s
        return out


def concave_decompose(q: MatPoly, tol=CONCAVE_TOL) -> ConcaveDecomposition:
    if not q.is_symmetric():
        raise ValueError("q must be symmetric")
    check_monic(q)
    if q.degree > 2:
        raise NotConcave(f"degree {q.degree} > 2: a monic concave polynomial is at most quadratic")
    g, ell = q.nvars, q.nrows
    Lam = -q.homogeneous_part(1)
    # block (i, j) of B is -q_{x_i x_j}; q concave iff B >= 0, and B = C^T C gives s
    B = np.zeros((ell * g, ell * g))
    for i in range(g):
        for j in range(g):
            B[i * ell:(i + 1) * ell, j * ell:(j + 1) * ell] = -q.coeff((i + 1, j + 1))
    B = (B + B.T) / 2
    w, V = np.linalg.eigh(B)
    if w.size and w[0] < -tol:
        raise NotConcave(f"quadratic part is not negative semidefinite (eigenvalue {w[0]:.3g})")
    keep = w > RANK_TOL * max(w[-1], 0.0) if w.size and w[-1] > 0 else np.zeros(w.size, bool)
    C = (np.sqrt(w[keep])[:, None] * V[:, keep].T)  # l' x (l g)
    lp = C.shape[0]
    terms = {(j + 1,): C[:, j * ell:(j + 1) * ell] for j in range(g)}
    s = MatPoly(terms, (lp, ell), g)
    return ConcaveDecomposition(Lam, s)


def linearize(q: MatPoly) -> tuple[MonicPencil, ConcaveDecomposition]:
    """Schur-complement pencil ``[[I, s], [s*, I - Lambda]]`` with the same domain as ``q``."""
    dec = concave_decompose(q)
    return linearize_decomposition(dec), dec


def linearize_decomposition(dec: ConcaveDecomposition) -> MonicPencil:
    ell, lp, g = dec.Lambda.nrows, dec.rank, dec.Lambda.nvars
    A = []
    for j in range(1, g + 1):
        a = np.zeros((lp + ell, lp + ell))
        Cj = dec.s.coeff((j,)) if lp else np.zeros((0, ell))
        a[:lp, lp:] = -Cj
        a[lp:, :lp] = -Cj.T
        a[lp:, lp:] = dec.Lambda.coeff((j,))
        A.append(a)
    return MonicPencil(tuple(A))


def pullback_certificate(cert, dec: ConcaveDecomposition):
    """Rewrite a certificate against the linearized pencil as one against ``q``.

    Each weighted factor ``[f; g]`` (top ``l'`` rows, bottom ``l`` rows)
    contributes the square ``(f + s g)*(f + s g)`` and the weighted term
    ``g* q g``.
    """
    from .certify import Certificate

    lp, ell = dec.rank, dec.Lambda.nrows
    sos = list(cert.sos)
    weighted = []
    for F in cert.weighted.get(0, []):
        if F.nrows != lp + ell:
            raise DimensionError(f"factor has {F.nrows} rows, expected {lp + ell}")
        top = F.block(slice(0, lp), slice(None))
        bot = F.block(slice(lp, lp + ell), slice(None))
        if lp:
            sq = top + dec.s * bot
            if not sq.is_zero():
                sos.append(sq)
        if not bot.is_zero():
            weighted.append(bot)
    return Certificate(sos=sos, weighted={0: weighted} if weighted else {})


def is_bounded(L: MonicPencil, tol=1e-7) -> bool:
    """Decide boundedness from the level-1 recession cone ``{x : Lambda_A(x) <= 0}``.

    Solves ``max +-x_j`` over that cone intersected with the unit box.
    """
    g, ell = L.nvars, L.size
    # dual-form LMI: S = F - sum_i y_i C_i with blocks [pencil part, box upper, box lower]
    blocks = [ell] + [1] * (2 * g)
    F = [np.zeros((ell, ell))] + [np.ones((1, 1))] * (2 * g)
    optima = []
    for j in range(g):
        for sign in (1.0, -1.0):
            cons = []
            for i in range(g):
                mats = [L.A[i]] + [np.zeros((1, 1))] * (2 * g)
                mats[1 + i] = np.ones((1, 1))
                mats[1 + g + i] = -np.ones((1, 1))
                cons.append((mats, sign if i == j else 0.0))
            prob = sdp.SdpProblem.from_constraints(blocks, cons, F)
            sol = sdp.solve(prob)
            if sol.status != "optimal":
                raise Indeterminate(f"boundedness SDP ended with status {sol.status}")
            optima.append(sol.residuals["dual_objective"])
    return max(optima) <= tol


@dataclass
class UnitCertificate:
    W: list  # each l x out_size
    H: np.ndarray

    def residual(self, L: MonicPencil):
        return unit_certificate_residual(L, self.W)


class NoUnitCertificate(ValueError):
    def __init__(self, coeffs, combination):
        super().__init__("span of the pencil coefficients contains a positive definite matrix")
        self.coeffs = coeffs
        self.combination = combination


def unit_certificate_residual(L, W):
    P = L.as_poly()
    out_size = W[0].shape[1] if W else 1
    acc = MatPoly.zero((out_size, out_size), L.nvars)
    for w in W:
        Wp = MatPoly.const(w, L.nvars)
        acc = acc + Wp.adjoint() * P * Wp
    return (acc - MatPoly.identity(out_size, L.nvars)).max_abs_coeff()


def unit_certificate(L: MonicPencil, out_size=1) -> UnitCertificate:
    """Matrices ``W_j`` with ``sum_j W_j* L(x) W_j = I``.

    Exists iff some PSD ``H`` with unit trace annihilates every ``A_j``; on
    failure raises :class:`NoUnitCertificate` carrying ``c`` with
    ``sum_j c_j A_j`` positive definite (smallest eigenvalue 1).
    """
    ell = L.size
    cons = [([np.eye(ell)], 1.0)] + [([a], 0.0) for a in L.A]
    prob = sdp.SdpProblem.from_constraints([ell], cons, [np.eye(ell)])
    sol = sdp.solve(prob)
    if sol.status == "infeasible":
        y = sol.farkas
        comb_coeffs = -y[1:] / y[0]
        comb = sum(c * a for c, a in zip(comb_coeffs, L.A))
        lo = np.linalg.eigvalsh(comb)[0]
        raise NoUnitCertificate(comb_coeffs / lo, comb / lo)
    if sol.status != "optimal":
        raise Indeterminate(f"unit-certificate SDP ended with status {sol.status}")
    H = _polish_unit(sol.Z[0], L)
    w, V = np.linalg.eigh(H)
    keep = w > RANK_TOL * w[-1]
    W = []
    for lam, h in zip(w[keep], V[:, keep].T):
        hk = np.sqrt(lam) * h
        for s in range(out_size):
            Wk = np.zeros((ell, out_size))
            Wk[:, s] = hk
            W.append(Wk)
    return UnitCertificate(W, H)


def _polish_unit(H, L, iters=50):
    """Alternate projections onto {tr H = 1, tr A_j H = 0} and the PSD cone."""
    ell = L.size
    K = np.array([np.eye(ell).ravel()] + [a.ravel() for a in L.A])
    rhs = np.zeros(K.shape[0])
    rhs[0] = 1.0
    pinv = np.linalg.pinv(K)
    for _ in range(iters):
        h = H.ravel()
        h = h - pinv @ (K @ h - rhs)
        H = h.reshape(ell, ell)
        H = (H + H.T) / 2
        w, V = np.linalg.eigh(H)
        if w[0] >= 0 and np.max(np.abs(K @ H.ravel() - rhs)) < 1e-14:
            break
        H = (V * np.clip(w, 0, None)) @ V.T
    return H
