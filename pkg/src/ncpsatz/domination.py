"""Spectrahedral inclusion: does ``L(X) >= 0`` force ``L'(X) >= 0``?

A certificate writes ``L'(x) = S + sum_j V_j* L(x) V_j`` with constant
``S >= 0`` and ``V_j``; it exists iff ``L'`` lies in the degree-zero
quadratic module of ``L``. When it does not, a point of the domain of
``L`` where ``L'`` is not PSD is extracted from the dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import QuadModuleSpec, membership
from .freealg import MatPoly, DimensionError
from .moment import Witness, refute
from .pencil import MonicPencil, unit_certificate

RESID_TOL = 1e-8


class DominationIndeterminate(RuntimeError):
    pass


@dataclass
class DominationCertificate:
    S: np.ndarray
    V: list = field(default_factory=list)

    def residual(self, L: MonicPencil, Lp: MonicPencil) -> float:
        return domination_residual(L, Lp, self)

    def to_json(self):
        return {"S": np.asarray(self.S).tolist(), "V": [np.asarray(v).tolist() for v in self.V]}

    @classmethod
    def from_json(cls, data):
        return cls(np.asarray(data["S"], dtype=float), [np.atleast_2d(np.asarray(v, dtype=float)) for v in data["V"]])


def domination_residual(L: MonicPencil, Lp: MonicPencil, cert: DominationCertificate) -> float:
    """Max coefficient of ``L' - S - sum V* L V``, expanded symbolically."""
    if L.nvars != Lp.nvars:
        raise DimensionError("pencils use different numbers of variables")
    g = L.nvars
    P = L.as_poly()
    acc = MatPoly.const(np.asarray(cert.S, dtype=float), g)
    for v in cert.V:
        Vp = MatPoly.const(v, g)
        acc = acc + Vp.adjoint() * P * Vp
    return (Lp.as_poly() - acc).max_abs_coeff()


def check_domination(L: MonicPencil, Lp: MonicPencil, seed=0):
    """Return a :class:`DominationCertificate` or a :class:`Witness` against inclusion."""
    if L.nvars != Lp.nvars:
        raise DimensionError("pencils use different numbers of variables")
    g, lp = L.nvars, Lp.size
    p = Lp.as_poly()
    spec = QuadModuleSpec([L.as_poly()], 0, 0, lp, g)
    res = membership(p, spec)
    if res.feasible:
        cert = res.certificate
        S = sum((s.coeff(()).T @ s.coeff(()) for s in cert.sos), np.zeros((lp, lp)))
        V = [f.coeff(()) for f in cert.weighted.get(0, [])]
        return DominationCertificate(S, V)
    if res.feasible is None:
        raise DominationIndeterminate(f"membership SDP status {res.solution.status}")
    ref = refute(p, L, 0, seed=seed)
    if ref.witness is None:
        raise DominationIndeterminate(f"refutation ended with status {ref.status}: {ref.details}")
    return ref.witness


def witness_margins(L: MonicPencil, Lp: MonicPencil, witness: Witness):
    """``(min eig L(X), min eig L'(X))`` at the witness point."""
    return L.min_eig(witness.X), Lp.min_eig(witness.X)


def strengthen_bounded(L: MonicPencil, cert: DominationCertificate) -> list:
    """Absorb ``S`` into the ``V`` list using a unit certificate of ``L``.

    With ``S = C^T C`` and ``sum_j W_j* L W_j = I`` we get
    ``S = sum_j (W_j C)* L (W_j C)``. Raises
    :class:`ncpsatz.pencil.NoUnitCertificate` when ``L`` admits none.
    """
    S = (np.asarray(cert.S) + np.asarray(cert.S).T) / 2
    w, U = np.linalg.eigh(S)
    top = max(w[-1], 0.0)
    keep = w > 1e-12 * max(top, 1.0)
    if not keep.any():
        return list(cert.V)
    C = np.sqrt(w[keep])[:, None] * U[:, keep].T
    unit = unit_certificate(L, out_size=C.shape[0])
    return list(cert.V) + [Wj @ C for Wj in unit.W]


def compose(first: DominationCertificate, second: DominationCertificate) -> DominationCertificate:
    """Certificate for ``L -> L''`` from ``L -> L'`` (first) and ``L' -> L''`` (second)."""
    S = np.asarray(second.S, dtype=float).copy()
    for v2 in second.V:
        S += v2.T @ first.S @ v2
    V = [v1 @ v2 for v2 in second.V for v1 in first.V]
    return DominationCertificate(S, V)
