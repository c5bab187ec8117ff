"""Block-diagonal SDPs in standard primal form and their duals.

Primal::

    minimize    tr(F Z)
    subject to  tr(C_i Z) = b_i,   i = 1..m
                Z = diag(Z_1, ..., Z_K) >= 0

Dual::

    maximize    b'y
    subject to  S = F - sum_i y_i C_i >= 0

Constraint data is stored per block as a sparse ``m x n_k^2`` matrix whose
row ``i`` is ``vec(C_i)`` restricted to block ``k``. The interior-point work
is delegated to cvxopt's cone solver (homogeneous self-dual embedding);
everything reported back is recomputed here by :func:`check_solution`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

MAX_DIM = 800
ZERO_OBJ = 1e-7


class SdpInputError(ValueError):
    pass


@dataclass
class SdpProblem:
    blocks: list
    A: list  # per block: csr (m, n_k**2)
    b: np.ndarray
    F: list | None = None  # per block objective, dense symmetric

    def __post_init__(self):
        self.blocks = [int(n) for n in self.blocks]
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.A = [sp.csr_matrix(a) for a in self.A]
        if len(self.A) != len(self.blocks):
            raise SdpInputError("one constraint matrix per block required")
        for n, a in zip(self.blocks, self.A):
            if a.shape != (self.m, n * n):
                raise SdpInputError(f"block data shape {a.shape} does not match m={self.m}, n={n}")
        if self.F is None:
            self.F = [np.zeros((n, n)) for n in self.blocks]
        self.F = [np.asarray(f, dtype=float).reshape(n, n) for f, n in zip(self.F, self.blocks)]

    @property
    def m(self):
        return self.b.size

    @classmethod
    def from_constraints(cls, blocks, constraints, objective=None):
        """Build from ``[(per-block matrices, rhs), ...]``; ``None`` blocks are zero."""
        m = len(constraints)
        A = []
        for k, n in enumerate(blocks):
            mat = sp.lil_matrix((m, n * n))
            for i, (mats, _) in enumerate(constraints):
                if mats[k] is None:
                    continue
                vec = np.asarray(mats[k], dtype=float).reshape(-1)
                nz = np.nonzero(vec)[0]
                if nz.size:
                    mat[i, nz] = vec[nz]
            A.append(mat.tocsr())
        b = [rhs for _, rhs in constraints]
        return cls(list(blocks), A, b, objective)

    def constraint(self, i):
        return [self.A[k].getrow(i).toarray().reshape(n, n) for k, n in enumerate(self.blocks)]

    def apply(self, Z):
        """``(tr(C_i Z))_i``."""
        out = np.zeros(self.m)
        for a, z in zip(self.A, Z):
            out += a @ np.asarray(z).reshape(-1)
        return out

    def adjoint(self, y):
        """``sum_i y_i C_i`` per block."""
        return [(a.T @ y).reshape(n, n) for a, n in zip(self.A, self.blocks)]

    def validate(self, tol=1e-12):
        if sum(self.blocks) > MAX_DIM:
            raise SdpInputError(f"total dimension {sum(self.blocks)} exceeds {MAX_DIM}")
        for k, n in enumerate(self.blocks):
            a = self.A[k]
            if a.nnz:
                # transpose columns: index (r, c) -> (c, r)
                perm = np.arange(n * n).reshape(n, n).T.reshape(-1)
                if abs(a - a[:, perm]).max() > tol * max(1.0, abs(a).max()):
                    raise SdpInputError(f"non-symmetric constraint matrix in block {k}")
            if np.max(np.abs(self.F[k] - self.F[k].T), initial=0.0) > tol:
                raise SdpInputError(f"non-symmetric objective in block {k}")


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | unbounded | indeterminate
    Z: list | None
    y: np.ndarray | None
    residuals: dict = field(default_factory=dict)
    farkas: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def primal_objective(self):
        return self.residuals.get("primal_objective")

    @property
    def dual_objective(self):
        return self.residuals.get("dual_objective")


def _min_eig(mats):
    vals = [np.linalg.eigvalsh((m + m.T) / 2)[0] for m in mats if m.size]
    return float(min(vals)) if vals else 0.0


def _max_eig(mats):
    vals = [np.linalg.eigvalsh((m + m.T) / 2)[-1] for m in mats if m.size]
    return float(max(vals)) if vals else 0.0


def check_solution(problem: SdpProblem, solution: SdpSolution) -> dict:
    """Recompute feasibility residuals from scratch.

    For an optimal claim this reports primal/dual feasibility and the gap;
    for an infeasibility claim it checks the Farkas ray ``y`` with
    ``sum y_i C_i <= 0`` and ``b'y = 1``.
    """
    rep = {}
    if solution.Z is not None:
        Z = solution.Z
        r = problem.apply(Z) - problem.b
        scale = 1.0 + np.max(np.abs(problem.b), initial=0.0)
        rep["primal_residual"] = float(np.max(np.abs(r), initial=0.0))
        rep["primal_residual_rel"] = rep["primal_residual"] / scale
        rep["primal_min_eig"] = _min_eig(Z)
        rep["primal_objective"] = float(sum(np.sum(f * z) for f, z in zip(problem.F, Z)))
    if solution.y is not None and solution.status != "infeasible":
        y = solution.y
        S = [f - c for f, c in zip(problem.F, problem.adjoint(y))]
        rep["dual_min_eig"] = _min_eig(S)
        rep["dual_objective"] = float(problem.b @ y)
        if "primal_objective" in rep:
            rep["gap"] = rep["primal_objective"] - rep["dual_objective"]
    if solution.farkas is not None:
        y = solution.farkas
        rep["farkas_max_eig"] = _max_eig(problem.adjoint(y))
        rep["farkas_by"] = float(problem.b @ y)
    return rep


def _row_structure(problem, tol=1e-10):
    """Independent constraint rows and a left-null-space basis, from ``K K^T``.

    ``K`` stacks the vectorized constraint matrices; ``K K^T`` is only
    ``m x m``, and a set of its columns is independent iff the matching
    rows of ``K`` are.
    """
    import scipy.linalg

    m = problem.m
    G = np.zeros((m, m))
    for a in problem.A:
        G += (a @ a.T).toarray()
    w, V = np.linalg.eigh(G)
    top = max(w[-1], 1.0) if m else 1.0
    null = V[:, w <= tol * top]
    if null.shape[1] == 0:
        return np.arange(m), null
    _, R, piv = scipy.linalg.qr(G, mode="economic", pivoting=True)
    rank = m - null.shape[1]
    return np.sort(piv[:rank]), null


def _restrict(problem, rows):
    return SdpProblem(problem.blocks, [a[rows] for a in problem.A], problem.b[rows], problem.F)


def _from_lower(z):
    """cvxopt only guarantees the lower triangle of returned matrix blocks."""
    z = np.array(z)
    return np.tril(z) + np.tril(z, -1).T


# backend configurations tried in order: (KKT solver, refinement steps, feastol)
ATTEMPTS = (("ldl", 1, 1e-9), ("qr", 3, 1e-9), ("chol", 3, 1e-8), ("ldl", 3, 1e-7))


def _cvxopt_call(problem, feastol, max_iter, verbose, kkt="ldl", refinement=1):
    import cvxopt
    from cvxopt import solvers

    Gs = []
    for a, n in zip(problem.A, problem.blocks):
        coo = (-a.T).tocoo()
        # cvxopt reads blocks column-major; row-major vec(C_i) agrees since C_i is symmetric
        Gs.append(cvxopt.spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(),
                                  (n * n, problem.m)))
    hs = [cvxopt.matrix(f) for f in problem.F]
    c = cvxopt.matrix(problem.b)
    opts = {"show_progress": verbose, "maxiters": max_iter, "abstol": 1e-10, "reltol": 1e-10,
            "feastol": feastol, "refinement": refinement}
    return solvers.sdp(c, Gs=Gs, hs=hs, kktsolver=kkt, options=opts)


def solve(problem: SdpProblem, feas_tol=1e-8, max_iter=200, gap_tol=1e-9, verbose=False) -> SdpSolution:
    """Solve the primal/dual pair; classify as optimal, infeasible or indeterminate.

    Every answer is re-checked by :func:`check_solution`; backend breakdowns
    and answers failing the re-check move on to the next configuration in
    :data:`ATTEMPTS`.
    """
    problem.validate()
    m = problem.m

    # Constraints with no support: infeasible if rhs nonzero, else redundant.
    norms = sum(np.asarray(abs(a).sum(axis=1)).ravel() for a in problem.A) if m else np.zeros(0)
    empty = norms == 0
    if np.any(empty & (np.abs(problem.b) > feas_tol)):
        i = int(np.flatnonzero(empty & (np.abs(problem.b) > feas_tol))[0])
        y = np.zeros(m)
        y[i] = 1.0 / problem.b[i]
        sol = SdpSolution("infeasible", None, None, farkas=y, info={"reason": "empty constraint row"})
        sol.residuals = check_solution(problem, sol)
        return sol

    rows, null = _row_structure(problem) if m else (np.arange(0), np.zeros((0, 0)))
    if null.shape[1]:
        # b outside the range of the constraint map: y in the left null space with b'y != 0
        y = null @ (null.T @ problem.b)
        by = float(problem.b @ y)
        if by > feas_tol * max(1.0, float(np.linalg.norm(problem.b))):
            sol = SdpSolution("infeasible", None, None, farkas=y / by, info={"reason": "inconsistent equations"})
            sol.residuals = check_solution(problem, sol)
            return sol
    reduced = _restrict(problem, rows) if len(rows) < m else problem
    if reduced.m == 0:
        Z = [np.zeros((n, n)) for n in problem.blocks]
        st = "optimal" if _min_eig(problem.F) >= -feas_tol else "indeterminate"
        sol = SdpSolution(st, Z, np.zeros(m))
        sol.residuals = check_solution(problem, sol)
        return sol

    sol = None
    tried = []
    for kkt, refinement, feastol in ATTEMPTS:
        try:
            res = _cvxopt_call(reduced, min(feastol, feas_tol * 0.1), max_iter, verbose, kkt, refinement)
        except (ValueError, ArithmeticError) as exc:
            tried.append(f"{kkt}/{refinement}: {type(exc).__name__}: {exc}")
            continue
        sol = _classify(problem, res, rows, feas_tol)
        tried.append(f"{kkt}/{refinement}: {res['status']} -> {sol.status}")
        if sol.status != "indeterminate":
            break
    if sol is None:
        log.warning("cvxopt failed in every configuration: %s", tried)
        sol = SdpSolution("indeterminate", None, None)
    sol.info["attempts"] = tried
    return sol


def _classify(problem, res, rows, feas_tol):
    m = problem.m
    status = res["status"]
    info = {"backend_status": status, "iterations": res.get("iterations")}

    def full_y(yr):
        y = np.zeros(m)
        y[rows] = yr
        return y

    if status == "dual infeasible":
        # ray x: sum x_i G_i <= 0, b'x < 0  ->  y = -x: sum y_i C_i <= 0, b'y > 0
        x = np.array(res["x"]).ravel()
        y = full_y(-x)
        by = problem.b @ y
        if by > 0:
            y = y / by
        sol = SdpSolution("infeasible", None, None, farkas=y, info=info)
        sol.residuals = check_solution(problem, sol)
        r = sol.residuals
        if r["farkas_by"] <= 0 or r["farkas_max_eig"] > 1e-7 * max(1.0, np.max(np.abs(y))):
            sol.status = "indeterminate"
        return sol

    if status == "primal infeasible":
        Z = [_from_lower(z) for z in res["zs"]]
        sol = SdpSolution("unbounded", Z, None, info=info)
        sol.residuals = check_solution(problem, sol)
        return sol

    if res["zs"] is None or res["x"] is None:
        return SdpSolution("indeterminate", None, None, info=info)

    Z = [_from_lower(z) for z in res["zs"]]
    y = full_y(-np.array(res["x"]).ravel())
    sol = SdpSolution("optimal", Z, y, info=info)
    sol.residuals = check_solution(problem, sol)
    r = sol.residuals
    scale = 1.0 + np.max(np.abs(problem.b), initial=0.0)
    fscale = 1.0 + max((float(np.max(np.abs(f))) for f in problem.F), default=0.0)
    ok = (r["primal_residual"] <= feas_tol * scale and r["primal_min_eig"] >= -feas_tol
          and r["dual_min_eig"] >= -10 * feas_tol * fscale)
    if not ok:
        sol.status = "indeterminate"
    elif status != "optimal":
        info["note"] = "accepted on recomputed residuals"
    return sol


# ------------------------------------------------------------------ SDPA

def export_sdpa(problem: SdpProblem) -> str:
    """SDPA sparse (``.dat-s``) text.

    Our primal is SDPA's primal with ``F0 = -F``, ``Fi = C_i``, ``c = b``
    (SDPA maximizes ``tr(F0 Y)``). Entries are written for the upper triangle
    with 1-based indices, one ``matno blkno i j value`` per line.
    """
    lines = [str(problem.m), str(len(problem.blocks)),
             " ".join(str(n) for n in problem.blocks),
             " ".join(_g(v) for v in problem.b)]
    for k, n in enumerate(problem.blocks):
        F = -problem.F[k]
        for i in range(n):
            for j in range(i, n):
                if F[i, j] != 0:
                    lines.append(f"0 {k + 1} {i + 1} {j + 1} {_g(F[i, j])}")
    for idx in range(problem.m):
        for k, n in enumerate(problem.blocks):
            row = problem.A[k].getrow(idx)
            for col, val in sorted(zip(row.indices, row.data)):
                i, j = divmod(int(col), n)
                if i <= j and val != 0:
                    lines.append(f"{idx + 1} {k + 1} {i + 1} {j + 1} {_g(val)}")
    return "\n".join(lines) + "\n"


def _g(v):
    return repr(float(v))
