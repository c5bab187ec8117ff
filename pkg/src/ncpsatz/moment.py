"""Moment functionals, Hankel/localizing matrices and GNS witness extraction.

A functional on ``nu x nu`` matrix polynomials is stored as ``{word: Lam_w}``
with ``Lam_w[s, t] = lam(E_st (x) w)``; symmetry means
``Lam_{w*} = Lam_w^T``. Pairing with a polynomial is
``lam(P) = sum_w <P_w, Lam_w>_F``.

The Hankel matrix has entries ``M[(v,s),(u,t)] = Lam_{v* u}[s, t]``, so
that ``lam(h* h) = c^T M c`` for a row polynomial ``h`` with coefficient
vector ``c``; functionals coming from ``(X, gamma)`` give
``Lam_w = Gamma^T w(X) Gamma`` with ``Gamma = [gamma_1 ... gamma_nu]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import sdp
from ._index import ClassIndex, canonical, hankel_incidence, localizing_incidence, to_csr, vector_to_values
from .freealg import MatPoly, DimensionError, WordEvaluator, as_tuple, enumerate_basis, sigma, star
from .pencil import MonicPencil

log = logging.getLogger(__name__)

NEG_TOL = 1e-7
PD_TOL = 1e-10


class MissingMoment(KeyError):
    pass


class SingularMomentMatrix(ValueError):
    pass


class MixingFailed(ValueError):
    pass


@dataclass
class MomentFunctional:
    nvars: int
    nu: int
    degree: int
    values: dict

    def __getitem__(self, w):
        w = tuple(w)
        try:
            return self.values[w]
        except KeyError:
            if len(w) > self.degree:
                raise MissingMoment(f"no moment for word {w} (degree bound {self.degree})") from None
            return np.zeros((self.nu, self.nu))

    def __call__(self, P: MatPoly) -> float:
        if P.shape != (self.nu, self.nu):
            raise DimensionError("functional and polynomial sizes differ")
        return float(sum(np.sum(c * self[w]) for w, c in P.terms.items()))

    def __add__(self, other):
        return self.combine(other, 1.0)

    def scaled(self, mu):
        return MomentFunctional(self.nvars, self.nu, self.degree, {w: mu * v for w, v in self.values.items()})

    def combine(self, other, mu):
        if (self.nvars, self.nu) != (other.nvars, other.nu):
            raise DimensionError("functionals live on different spaces")
        deg = min(self.degree, other.degree)
        words = {w for w in set(self.values) | set(other.values) if len(w) <= deg}
        return MomentFunctional(self.nvars, self.nu, deg, {w: self[w] + mu * other[w] for w in words})

    def symmetry_defect(self):
        return max((float(np.max(np.abs(v - self[star(w)].T))) for w, v in self.values.items()), default=0.0)

    def to_json(self):
        from .freealg import word_str
        return {"nvars": self.nvars, "nu": self.nu, "degree": self.degree,
                "values": {word_str(w): v.tolist() for w, v in self.values.items()}}

    @classmethod
    def zero(cls, nvars, nu, degree):
        return cls(nvars, nu, degree, {})


def moment_matrix(lam: MomentFunctional, k: int) -> np.ndarray:
    basis = enumerate_basis(lam.nvars, k)
    nu = lam.nu
    n = len(basis) * nu
    M = np.zeros((n, n))
    for iv, v in enumerate(basis):
        vs = star(v)
        for iu, u in enumerate(basis):
            M[iv * nu:(iv + 1) * nu, iu * nu:(iu + 1) * nu] = lam[vs + u]
    return M


def localizing_matrix(lam: MomentFunctional, q: MatPoly, k: int) -> np.ndarray:
    """``Loc[(v,c,a),(u,d,b)] = sum_w Q_w[c,d] lam(E_ab (x) v* w u)``."""
    basis = enumerate_basis(lam.nvars, k)
    nu, ell = lam.nu, q.nrows
    nb = len(basis)
    out = np.zeros((nb, ell, nu, nb, ell, nu))
    for iv, v in enumerate(basis):
        vs = star(v)
        for iu, u in enumerate(basis):
            for w, Qw in q.terms.items():
                L = lam[vs + w + u]
                out[iv, :, :, iu, :, :] += np.einsum("cd,ab->cadb", Qw, L)
    n = nb * ell * nu
    return out.reshape(n, n)


def functional_from_witness(X, gamma, nu: int, kmax: int) -> MomentFunctional:
    """Tabulate ``lam(E_st (x) w) = <w(X) gamma_t, gamma_s>`` for ``deg w <= 2 kmax + 2``."""
    X = as_tuple(X)
    N = X[0].shape[0]
    gamma = np.asarray(gamma, dtype=float).ravel()
    if gamma.size != N * nu:
        raise DimensionError(f"gamma has length {gamma.size}, expected {N * nu}")
    Gam = gamma.reshape(nu, N).T
    ev = WordEvaluator(X)
    deg = 2 * kmax + 2
    vals = {w: Gam.T @ ev(w) @ Gam for w in enumerate_basis(len(X), deg)}
    return MomentFunctional(len(X), nu, deg, vals)


def _sample_ball(g, n, eps, rng):
    dim = g * n * (n + 1) // 2
    Y = []
    for _ in range(g):
        a = rng.standard_normal((n, n))
        Y.append((a + a.T) / math.sqrt(2))
    nrm = math.sqrt(sum(np.sum(y * y) for y in Y))
    r = eps * rng.random() ** (1.0 / dim)
    return [r * y / nrm for y in Y]


def reference_functional(L: MonicPencil, nu: int, k: int, nsamples=None, seed=0, retries=5) -> MomentFunctional:
    """Weighted trace functional ``sum_i 2^-i tr p(X_i)`` over a small ball.

    Samples sit at level ``k + 1`` inside the ball of radius
    ``1 / (2 sum ||A_j||)``, on which ``L(X) >= 1/2``. Moments are tabulated
    to degree ``2k + 2``.
    """
    g = L.nvars
    n = k + 1
    if nsamples is None:
        nsamples = max(8, 2 * nu * sigma(g, k))
    eps = 1.0 / (2.0 * sum(np.linalg.norm(a, 2) for a in L.A))
    basis = enumerate_basis(g, 2 * k + 2)
    for attempt in range(retries + 1):
        rng = np.random.default_rng([seed, attempt])
        acc = {w: 0.0 for w in basis}
        for i in range(1, nsamples + 1):
            X = _sample_ball(g, n, eps, rng)
            ev = WordEvaluator(X)
            wt = 0.5**i
            for w in basis:
                acc[w] += wt * np.trace(ev(w))
        lam = MomentFunctional(g, nu, 2 * k + 2, {w: v * np.eye(nu) for w, v in acc.items()})
        if np.linalg.eigvalsh(moment_matrix(lam, k))[0] >= PD_TOL:
            return lam
    raise SingularMomentMatrix(f"reference functional not positive definite after {retries} retries")


@dataclass
class RefutationSdp:
    """Moment SDP in dual form: the variables ``y`` are free moments."""

    problem: sdp.SdpProblem
    classes: ClassIndex
    offset: np.ndarray  # class values of the fixed part (normalization)
    basis_map: np.ndarray  # class values = offset + basis_map @ y
    p_offset: float
    nu: int
    nvars: int
    degree: int
    tau: float

    def functional(self, y) -> MomentFunctional:
        vals = self.offset + self.basis_map @ y
        return MomentFunctional(self.nvars, self.nu, self.degree, vector_to_values(vals, self.classes, self.nu))

    def value(self, solution):
        return self.p_offset - solution.residuals["dual_objective"]


def assemble_refutation_sdp(p: MatPoly, L: MonicPencil, d: int, tau=None) -> RefutationSdp:
    """``min lam(p)`` over ``M_{d+1}(lam) >= 0``, ``Loc_d(lam) >= 0``, ``lam(I) = 1``, ``tr M <= tau``."""
    g, nu = p.nvars, p.nrows
    if p.degree > 2 * d + 1:
        raise ValueError(f"deg p = {p.degree} exceeds 2d+1")
    if tau is None:
        tau = 1e3 * nu * sigma(g, d + 1)
    classes = ClassIndex()
    inc = [hankel_incidence(g, d + 1, nu, classes),
           localizing_incidence(L.as_poly(), d, nu, classes)]
    nc = len(classes)
    mats = [to_csr(r, c, v, nc, n) for n, r, c, v in inc]
    nM = inc[0][0]
    diag = np.arange(nM) * (nM + 1)
    trace_row = np.asarray(mats[0][:, diag].sum(axis=1)).ravel()  # tr M(e_i)

    # normalization sum_s lam(E_ss (x) 1) = 1: eliminate the last diagonal slot
    fixed = classes.pos[((), nu - 1, nu - 1)]
    free = [i for i in range(nc) if i != fixed]
    offset = np.zeros(nc)
    offset[fixed] = 1.0
    B = np.zeros((nc, len(free)))
    for j, i in enumerate(free):
        B[i, j] = 1.0
    for s in range(nu - 1):
        B[fixed, free.index(classes.pos[((), s, s)])] = -1.0

    A_blocks, F = [], []
    for (n, *_), Mk in zip(inc, mats):
        base = (Mk.T @ offset).reshape(n, n)
        Cs = -(Mk.T @ B)  # columns are vec(C_i)
        A_blocks.append(Cs.T)
        F.append(base)
    # cap: tau - tr M(lam) >= 0
    A_blocks.append((trace_row @ B)[:, None])
    F.append(np.array([[tau - trace_row @ offset]]))

    pv = np.zeros(nc)
    for w, c in p.terms.items():
        for a in range(nu):
            for b in range(nu):
                if c[a, b] != 0:
                    pv[classes.pos[canonical(w, a, b)]] += c[a, b]
    # pv pairs with class values: lam(p) = pv . vals
    problem = sdp.SdpProblem([inc[0][0], inc[1][0], 1], A_blocks, -(pv @ B), F)
    return RefutationSdp(problem, classes, offset, B, float(pv @ offset), nu, g, 2 * d + 2, tau)


def solve_refutation(p, L, d, tau=None, feas_tol=1e-8, witness_tol=NEG_TOL):
    """Solve the moment SDP; if the trace cap binds while the optimum is not yet
    negative, enlarge it (x10, at most twice). A failed enlarged solve falls
    back to the last good one. Returns ``(rs, sol, lam, cap_hit)``.
    """
    rs = assemble_refutation_sdp(p, L, d, tau)
    best = None
    for _ in range(3):
        sol = sdp.solve(rs.problem, feas_tol=feas_tol)
        if sol.status != "optimal":
            break
        lam = rs.functional(sol.y)
        cap_hit = rs.tau - float(np.trace(moment_matrix(lam, d + 1))) <= 1e-6 * rs.tau
        best = (rs, sol, lam, cap_hit)
        if not cap_hit or rs.value(sol) < -witness_tol:
            break
        rs = assemble_refutation_sdp(p, L, d, rs.tau * 10)
    if best is None:
        return rs, sol, None, False
    return best


def mix(lam: MomentFunctional, lam_hat: MomentFunctional, mu=None, p: MatPoly | None = None, k=None,
        min_eig=1e-9):
    """``lam + mu * lam_hat``; with ``mu=None`` pick the smallest decade >= 1e-8 that
    makes the degree-``k`` Hankel block safely definite while keeping
    ``lam(p)`` below half its original (negative) value.

    Returns ``(mixed, mu)``.
    """
    if mu is not None:
        return lam.combine(lam_hat, mu), mu
    if k is None:
        k = (lam.degree - 2) // 2
    base = lam(p) if p is not None else None
    diag = []
    for e in range(-8, 1):
        mu = 10.0**e
        mixed = lam.combine(lam_hat, mu)
        lo = float(np.linalg.eigvalsh(moment_matrix(mixed, k))[0])
        val = mixed(p) if p is not None else None
        diag.append((mu, lo, val))
        if lo >= min_eig and (base is None or val < -0.5 * abs(base)):
            return mixed, mu
    raise MixingFailed(f"no mixing weight preserves the margin: {diag}")


@dataclass
class Witness:
    X: list
    gamma: np.ndarray
    value: float | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X[0].shape[0]

    @property
    def nu(self):
        return self.gamma.size // self.n

    def value_of(self, p: MatPoly) -> float:
        return float(self.gamma @ p(self.X) @ self.gamma)

    def to_json(self):
        return {"n": self.n, "X": [x.tolist() for x in self.X], "gamma": self.gamma.tolist(),
                "value": self.value, "residuals": dict(self.residuals)}

    @classmethod
    def from_json(cls, data):
        return cls([np.asarray(x, dtype=float) for x in data["X"]], np.asarray(data["gamma"], dtype=float),
                   data.get("value"), dict(data.get("residuals", {})))


def gns_extract(lam: MomentFunctional, k: int) -> Witness:
    """Finite-dimensional ``(X, gamma)`` with ``lam(f) = <f(X) gamma, gamma>`` up to degree ``2k+1``.

    ``X_j = R^-T S_j R^-1`` where ``M_k = R^T R`` and
    ``S_j[(v,s),(u,t)] = lam(E_st (x) v* x_j u)``; ``gamma_s = R e_(1,s)``.
    """
    if lam.degree < 2 * k + 1:
        raise MissingMoment(f"need moments to degree {2 * k + 1}")
    M = moment_matrix(lam, k)
    M = (M + M.T) / 2
    lo = np.linalg.eigvalsh(M)[0]
    if lo < PD_TOL:
        raise SingularMomentMatrix(f"degree-{k} Hankel block not positive definite (min eig {lo:.3g})")
    R = scipy.linalg.cholesky(M, lower=False)
    basis = enumerate_basis(lam.nvars, k)
    nu = lam.nu
    n = len(basis) * nu
    X = []
    for j in range(1, lam.nvars + 1):
        S = np.zeros((n, n))
        for iv, v in enumerate(basis):
            vs = star(v)
            for iu, u in enumerate(basis):
                S[iv * nu:(iv + 1) * nu, iu * nu:(iu + 1) * nu] = lam[vs + (j,) + u]
        Y = scipy.linalg.solve_triangular(R, S, trans="T")  # R^-T S
        Xj = scipy.linalg.solve_triangular(R, Y.T, trans="T").T
        X.append((Xj + Xj.T) / 2)
    gamma = np.concatenate([R[:, s] for s in range(nu)])  # e_(empty word, s) is column s
    return Witness(X, gamma)


def verify_witness(lam: MomentFunctional, witness: Witness, k: int) -> dict:
    """Moment mismatch of the witness against ``lam``: degrees <= 2k+1, and 2k+2 separately."""
    lw = functional_from_witness(witness.X, witness.gamma, lam.nu, k)
    low, top = 0.0, 0.0
    for w in enumerate_basis(lam.nvars, min(2 * k + 2, lam.degree)):
        err = float(np.max(np.abs(lw[w] - lam[w])))
        if len(w) <= 2 * k + 1:
            low = max(low, err)
        else:
            top = max(top, err)
    return {"max_residual": low, "top_degree_mismatch": top}


def _rank(M, tol):
    w = np.linalg.eigvalsh((M + M.T) / 2)
    if w[-1] <= 0:
        return 0
    return int(np.sum(w > tol * w[-1]))


def flatness_check(lam: MomentFunctional, k: int, rank_tol=1e-9) -> dict:
    r0 = _rank(moment_matrix(lam, k), rank_tol)
    r1 = _rank(moment_matrix(lam, k + 1), rank_tol)
    return {"flat": r0 == r1, "rank_k": r0, "rank_k1": r1}


@dataclass
class RefuteResult:
    status: str  # witness | no-refutation | indeterminate
    witness: Witness | None = None
    optimum: float | None = None
    functional: MomentFunctional | None = None
    mu: float | None = None
    details: dict = field(default_factory=dict)


def refute(p: MatPoly, L: MonicPencil, d: int, witness_tol=NEG_TOL, seed=0, tau=None) -> RefuteResult:
    """Separating functional -> mixed positive functional -> GNS witness -> verification."""
    rs, sol, lam, cap_hit = solve_refutation(p, L, d, tau, witness_tol=witness_tol)
    details = {"sdp_status": sol.status, "tau": rs.tau, "cap_hit": cap_hit, "sdp_residuals": dict(sol.residuals)}
    if lam is None:
        return RefuteResult("indeterminate", details=details)
    opt = rs.value(sol)
    details["optimum"] = opt
    if opt >= -witness_tol:
        if opt < 0:
            log.warning("refutation optimum %.3g is within tolerance of zero; no refutation", opt)
        return RefuteResult("no-refutation", optimum=opt, functional=lam, details=details)

    lam_hat = reference_functional(L, p.nrows, d, seed=seed)
    try:
        _, mu0 = mix(lam, lam_hat, p=p, k=d)
    except MixingFailed as exc:
        details["mixing"] = str(exc)
        mu0 = 1e-8
    attempts = []
    mu = mu0
    Lpoly = L.as_poly()
    while mu <= 1.0:
        mixed = lam.combine(lam_hat, mu)
        try:
            W = gns_extract(mixed, d)
        except SingularMomentMatrix as exc:
            attempts.append({"mu": mu, "error": str(exc)})
            mu *= 10
            continue
        W.value = W.value_of(p)
        W.residuals = verify_witness(mixed, W, d)
        W.residuals["L_min_eig"] = float(np.linalg.eigvalsh(Lpoly(W.X))[0])
        W.residuals["mu"] = mu
        attempts.append({"mu": mu, "value": W.value, **W.residuals})
        if (W.residuals["L_min_eig"] >= -1e-8 and W.value < -witness_tol
                and W.residuals["max_residual"] <= 1e-6):
            details["attempts"] = attempts
            return RefuteResult("witness", W, opt, mixed, mu, details)
        mu *= 10
    details["attempts"] = attempts
    return RefuteResult("indeterminate", None, opt, lam, None, details)
