"""Gram-matrix membership in truncated quadratic modules.

``M_{alpha,beta}(Q)`` collects ``sum s_j* s_j + sum_q sum_j f_{j,q}* q f_{j,q}``
with ``deg s_j <= alpha`` and ``deg f_{j,q} <= beta``. Membership of a
symmetric ``p`` is a feasibility SDP in one Gram block for the squares and
one per constraint; a feasible Gram tuple is factored back into explicit
polynomial factors and re-expanded symbolically to verify.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import sdp
from ._index import ClassIndex, hankel_incidence, localizing_incidence, self_paired, to_csr
from .freealg import MatPoly, DimensionError, enumerate_basis, sigma, sum_polys
from .pencil import (MonicPencil, check_monic, linearize, pullback_certificate)

log = logging.getLogger(__name__)

RANK_TOL = 1e-9
VERIFY_TOL = 1e-6
WITNESS_TOL = 1e-7
GRAM_CAP = 1e6


class DegreeError(ValueError):
    pass


class IndefiniteGram(ValueError):
    pass


@dataclass
class QuadModuleSpec:
    Q: list
    alpha: int
    beta: int
    nu: int
    nvars: int

    def __post_init__(self):
        for q in self.Q:
            if not q.is_symmetric():
                raise ValueError("module constraints must be symmetric")
            if q.nvars != self.nvars:
                raise DimensionError("constraint variable count mismatch")

    @property
    def a(self):
        return max((int(q.degree) for q in self.Q if not q.is_zero()), default=0)

    @property
    def kappa(self):
        if not self.Q:
            return 2 * self.alpha
        return max(2 * self.alpha, 2 * self.beta + self.a)

    def block_sizes(self):
        sizes = [self.nu * sigma(self.nvars, self.alpha)]
        sizes += [q.nrows * self.nu * sigma(self.nvars, self.beta) for q in self.Q]
        return sizes


@dataclass
class Certificate:
    sos: list = field(default_factory=list)
    weighted: dict = field(default_factory=dict)  # constraint index -> factors

    def reconstruct(self, Q, shape=None, nvars=None):
        terms = [s.adjoint() * s for s in self.sos]
        for qi, fs in self.weighted.items():
            terms += [f.adjoint() * Q[qi] * f for f in fs]
        if shape is None:
            shape = terms[0].shape if terms else (1, 1)
        if nvars is None:
            nvars = terms[0].nvars if terms else Q[0].nvars
        return sum_polys(terms, shape, nvars)

    def degrees(self):
        return {"sos": max((s.degree for s in self.sos), default=-math.inf),
                "weighted": max((f.degree for fs in self.weighted.values() for f in fs), default=-math.inf)}

    def to_json(self):
        return {"sos": [s.to_dict() for s in self.sos],
                "weighted": {str(k): [f.to_dict() for f in fs] for k, fs in self.weighted.items()}}

    @classmethod
    def from_json(cls, data, nvars):
        return cls([MatPoly.from_dict(s, nvars) for s in data["sos"]],
                   {int(k): [MatPoly.from_dict(f, nvars) for f in fs]
                    for k, fs in data["weighted"].items()})


def _layout(spec: QuadModuleSpec):
    """Class index plus per-block incidence for the module's Gram blocks."""
    classes = ClassIndex()
    inc = [hankel_incidence(spec.nvars, spec.alpha, spec.nu, classes)]
    for q in spec.Q:
        inc.append(localizing_incidence(q, spec.beta, spec.nu, classes))
    return classes, inc


def assemble_membership_sdp(p: MatPoly, spec: QuadModuleSpec, objective="zero", gram_cap="auto") -> sdp.SdpProblem:
    """One equality per slot class ``(m, a, b) ~ (m*, b, a)`` with ``deg m <= kappa``.

    With a ``gram_cap`` the total Gram trace is bounded through an extra 1x1
    slack block (last block). This turns weakly infeasible instances, whose
    approximate certificates have unbounded Gram matrices, into honestly
    infeasible ones. ``"auto"`` uses ``GRAM_CAP * (1 + max |coeff p|)``.

    ``objective="zero"`` is a pure feasibility problem (the interior-point
    path then ends near the analytic center of the feasible set);
    ``"trace"`` minimizes the total trace of the Gram blocks.
    """
    if p.shape != (spec.nu, spec.nu):
        raise DimensionError(f"p has shape {p.shape}, module expects {spec.nu}x{spec.nu}")
    if not p.is_symmetric(1e-10):
        raise ValueError("p must be symmetric")
    if p.degree > spec.kappa:
        raise DegreeError(f"deg p = {p.degree} exceeds kappa = {spec.kappa}")
    classes, inc = _layout(spec)
    for w, c in p.terms.items():
        for a in range(spec.nu):
            for b in range(spec.nu):
                if c[a, b] != 0:
                    classes(w, a, b)
    nc = len(classes)
    weight = np.array([1.0 if self_paired(k) else 0.5 for k in classes.keys])
    A = []
    for n, rows, cols, vals in inc:
        rows = np.asarray(rows, dtype=int)
        vals = np.asarray(vals) * weight[rows] if len(rows) else np.zeros(0)
        A.append(to_csr(rows, cols, vals, nc, n))
    b = np.array([p.coeff(m)[a, c] for (m, a, c) in classes.keys])
    sizes = [n for n, *_ in inc]
    if objective == "trace":
        F = [np.eye(n) for n in sizes]
    elif objective == "zero":
        F = [np.zeros((n, n)) for n in sizes]
    else:
        raise ValueError(f"unknown objective {objective!r}")
    if gram_cap == "auto":
        gram_cap = GRAM_CAP * (1.0 + p.max_abs_coeff())
    if gram_cap is not None:
        # sum tr Z_k / cap + t = 1, t >= 0 (rhs kept at unit scale)
        A = [sp.vstack([a, sp.csr_matrix(np.eye(n).reshape(1, -1) / gram_cap)]).tocsr()
             for a, n in zip(A, sizes)]
        A.append(sp.csr_matrix(np.r_[np.zeros(nc), 1.0][:, None]))
        b = np.r_[b, 1.0]
        F.append(np.zeros((1, 1)))
        sizes = sizes + [1]
    return sdp.SdpProblem(sizes, A, b, F)


def _factors_from_gram(Z, nrows_per_word, nu, basis, nvars, tol=RANK_TOL):
    """Eigen-factor ``Z`` and unflatten each scaled eigenvector into a polynomial.

    Index ``(word, row, col)`` word-major; each factor is ``nrows x nu``.
    """
    Z = (Z + Z.T) / 2
    w, V = np.linalg.eigh(Z)
    top = max(w[-1], 0.0) if w.size else 0.0
    if w.size and w[0] < -max(1e-7, 1e-6 * top):
        raise IndefiniteGram(f"Gram matrix has eigenvalue {w[0]:.3g}")
    out = []
    if top <= 0:
        return out
    for lam, v in zip(w, V.T):
        if lam <= tol * top:
            continue
        r = np.sqrt(lam) * v
        blocks = r.reshape(len(basis), nrows_per_word, nu)
        out.append(MatPoly({u: blocks[i] for i, u in enumerate(basis)}, (nrows_per_word, nu), nvars))
    return out


def extract_certificate(solution: sdp.SdpSolution, spec: QuadModuleSpec) -> Certificate:
    if solution.status != "optimal" or solution.Z is None:
        raise ValueError(f"cannot extract a certificate from status {solution.status!r}")
    sos = _factors_from_gram(solution.Z[0], 1, spec.nu, enumerate_basis(spec.nvars, spec.alpha), spec.nvars)
    weighted = {}
    bb = enumerate_basis(spec.nvars, spec.beta)
    for i, q in enumerate(spec.Q):
        fs = _factors_from_gram(solution.Z[1 + i], q.nrows, spec.nu, bb, spec.nvars)
        if fs:
            weighted[i] = fs
    return Certificate(sos, weighted)


def verify_certificate(p: MatPoly, spec_or_Q, cert: Certificate) -> float:
    """Max-abs coefficient of ``p - reconstruct(cert)`` by exact expansion."""
    Q = spec_or_Q.Q if isinstance(spec_or_Q, QuadModuleSpec) else list(spec_or_Q)
    rec = cert.reconstruct(Q, p.shape, p.nvars)
    return (p - rec).max_abs_coeff()


@dataclass
class MembershipResult:
    feasible: bool | None
    certificate: Certificate | None
    residual: float | None
    solution: sdp.SdpSolution
    problem: sdp.SdpProblem


def membership(p: MatPoly, spec: QuadModuleSpec, feas_tol=1e-8) -> MembershipResult:
    """Assemble, solve, extract and verify in one go.

    Falls back to the trace objective if the feasibility form ends
    indeterminate.
    """
    prob = assemble_membership_sdp(p, spec)
    sol = sdp.solve(prob, feas_tol=feas_tol)
    if sol.status == "indeterminate":
        prob = assemble_membership_sdp(p, spec, objective="trace")
        sol = sdp.solve(prob, feas_tol=feas_tol)
    if sol.status == "infeasible":
        return MembershipResult(False, None, None, sol, prob)
    if sol.status != "optimal":
        return MembershipResult(None, None, None, sol, prob)
    cert = extract_certificate(sol, spec)
    return MembershipResult(True, cert, verify_certificate(p, spec, cert), sol, prob)


def default_degree(p: MatPoly) -> int:
    """Smallest ``d >= 0`` with ``deg p <= 2d + 1``."""
    if p.is_zero() or p.degree <= 1:
        return 0
    return int(math.ceil((p.degree - 1) / 2))


@dataclass
class CertifyResult:
    status: str  # certificate | witness | indeterminate
    certificate: Certificate | None = None
    witness: object | None = None
    residual: float | None = None
    spec: QuadModuleSpec | None = None
    d: int = 0
    mode: str = "linear"
    details: dict = field(default_factory=dict)


def certify_nonneg(p: MatPoly, q, mode="auto", d=None, witness_tol=WITNESS_TOL,
                   verify_tol=VERIFY_TOL, seed=0) -> CertifyResult:
    """Certify ``p >= 0`` on the domain of monic ``q`` or exhibit a witness.

    Linear ``q`` uses ``M_{d,d}(q)``; concave quadratic ``q`` is linearized,
    certified in ``M_{d+1,d}`` of the linearization and pulled back.
    Infeasibility hands over to :func:`ncpsatz.moment.refute`.
    """
    from .moment import refute

    if isinstance(q, MonicPencil):
        q = q.as_poly()
    if q.nvars != p.nvars:
        raise DimensionError("p and q must use the same variables")
    if not q.is_symmetric():
        raise ValueError("q must be symmetric")
    check_monic(q)
    if mode == "auto":
        mode = "linear" if q.degree <= 1 else "concave"
    d = default_degree(p) if d is None else int(d)
    if p.degree > 2 * d + 1:
        raise DegreeError(f"deg p = {p.degree} exceeds 2d+1 = {2 * d + 1}")

    if mode == "linear":
        if q.degree > 1:
            raise ValueError("linear mode needs a degree-1 q")
        L = MonicPencil.from_poly(q)
        spec = QuadModuleSpec([q], d, d, p.nrows, p.nvars)
        res = membership(p, spec)
        cert = res.certificate
        dec = None
    elif mode == "concave":
        L, dec = linearize(q)
        spec_lin = QuadModuleSpec([L.as_poly()], d + 1, d, p.nrows, p.nvars)
        res = membership(p, spec_lin)
        cert = pullback_certificate(res.certificate, dec) if res.certificate else None
        spec = QuadModuleSpec([q], d + 1, d, p.nrows, p.nvars)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    details = {"sdp_status": res.solution.status, "sdp_residuals": res.solution.residuals}
    if res.feasible:
        resid = verify_certificate(p, spec, cert)
        if resid <= verify_tol:
            return CertifyResult("certificate", cert, None, resid, spec, d, mode, details)
        details["reason"] = f"certificate residual {resid:.3g} above {verify_tol}"
        return CertifyResult("indeterminate", cert, None, resid, spec, d, mode, details)
    if res.feasible is None:
        details["reason"] = "membership SDP indeterminate"
        return CertifyResult("indeterminate", None, None, None, spec, d, mode, details)

    ref = refute(p, L, d, witness_tol=witness_tol, seed=seed)
    details["refutation"] = ref.details
    if ref.witness is not None:
        W = ref.witness
        qmin = float(np.linalg.eigvalsh(q(W.X))[0])
        details["q_min_eig"] = qmin
        if qmin >= -1e-8 and W.value < -witness_tol:
            return CertifyResult("witness", None, W, None, spec, d, mode, details)
        details["reason"] = "extracted witness failed verification against q"
    else:
        details["reason"] = "membership infeasible but refutation found no separating functional"
    return CertifyResult("indeterminate", None, ref.witness, None, spec, d, mode, details)


def certify_general(p: MatPoly, S, d, beta, feas_tol=1e-8):
    """Membership of scalar ``p`` in ``M_{d+a,beta}`` of ``Q = {1 - s* s : s in S}``.

    Returns ``(certificate, residual)``, or ``(None, None)`` when ``p`` is
    not in the module. No witness is produced on this route.
    """
    S = list(S)
    if beta >= d:
        raise DegreeError("need beta < d")
    if p.degree > 2 * d:
        raise DegreeError(f"deg p = {p.degree} exceeds 2d = {2 * d}")
    a = max((int(s.degree) for s in S), default=0)
    Q = [MatPoly.identity(1, p.nvars) - s.adjoint() * s for s in S]
    spec = QuadModuleSpec(Q, d + a, beta, p.nrows, p.nvars)
    res = membership(p, spec, feas_tol=feas_tol)
    if res.feasible is None:
        raise RuntimeError(f"membership SDP indeterminate ({res.solution.info})")
    if not res.feasible:
        return None, None
    return res.certificate, res.residual


def projected_localizing_check(X, zeta, beta, S, rank_tol=1e-10, tol=1e-9) -> bool:
    """Check ``P (1 - s(X)* s(X)) P >= 0`` on ``span{f(X) zeta : deg f <= beta}``."""
    from .freealg import WordEvaluator, as_tuple

    X = as_tuple(X)
    zeta = np.asarray(zeta, dtype=float).ravel()
    if not np.any(zeta):
        raise ValueError("zeta must be nonzero")
    g = len(X)
    ev = WordEvaluator(X)
    vecs = np.array([ev(w) @ zeta for w in enumerate_basis(g, beta)]).T
    U, sv, _ = np.linalg.svd(vecs, full_matrices=False)
    U = U[:, sv > rank_tol * sv[0]]
    n = X[0].shape[0]
    for s in S:
        sX = s(X)
        comp = U.T @ (np.eye(n) - sX.T @ sX) @ U
        if np.linalg.eigvalsh((comp + comp.T) / 2)[0] < -tol:
            return False
    return True


@dataclass
class EvalReport:
    min_eig: float
    falsified: bool
    witness: list | None = None
    samples: int = 0
    levels: tuple = ()


class SamplingError(RuntimeError):
    pass


def random_eval_check(p: MatPoly, q: MatPoly, trials=100, seed=0, max_level=12,
                      radius_cap=10.0, retries=50) -> EvalReport:
    """Sample tuples in the domain of ``q`` and look for ``p(X)`` not PSD.

    Draws a random symmetric direction at a random level up to
    ``min(nu * sigma(d+1), max_level)``, finds the largest step staying in
    the domain by bisection (domain assumed star-shaped about 0, true for
    concave ``q``) and evaluates at a random point of that segment or its
    endpoint.
    """
    from .freealg import random_tuple

    if trials <= 0:
        return EvalReport(math.inf, False, None, 0, ())
    rng = np.random.default_rng(seed)
    g = p.nvars
    d = default_degree(p)
    top = max(1, min(p.nrows * sigma(g, d + 1), max_level))
    levels = tuple(range(1, top + 1))
    worst, worstX = math.inf, None
    done = 0
    fails = 0
    while done < trials:
        n = int(rng.choice(levels))
        Y = random_tuple(g, n, rng)
        nrm = math.sqrt(sum(np.sum(y * y) for y in Y))
        Y = [y / nrm for y in Y]

        def inside(t):
            return np.linalg.eigvalsh(q([t * y for y in Y]))[0] >= -1e-12

        if not inside(1e-6):
            fails += 1
            if fails > retries:
                raise SamplingError("could not find sample directions inside the domain")
            continue
        lo, hi = 0.0, radius_cap
        if not inside(hi):
            for _ in range(50):
                mid = (lo + hi) / 2
                lo, hi = (mid, hi) if inside(mid) else (lo, mid)
        else:
            lo = hi
        t = lo if rng.random() < 0.5 else lo * rng.random()
        X = [t * y for y in Y]
        e = float(np.linalg.eigvalsh(p(X))[0])
        if e < worst:
            worst, worstX = e, X
        done += 1
    falsified = worst < -1e-9
    return EvalReport(worst, falsified, worstX if falsified else None, done, levels)
