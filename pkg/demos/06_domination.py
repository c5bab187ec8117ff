"""
Inclusion of free spectrahedra
==============================

D_L contained in D_L' iff L' = S + sum V_j* L V_j. The ball [-1, 1] sits
inside the half line x <= 1; the converse fails and a point shows it.
"""

import numpy as np
from ncpsatz.pencil import MonicPencil
from ncpsatz.domination import check_domination, witness_margins, strengthen_bounded, DominationCertificate

ball = MonicPencil((np.array([[0.0, -1.0], [-1.0, 0.0]]),))
half_line = MonicPencil((np.array([[1.0]]),))

cert = check_domination(ball, half_line)
print("S =", np.round(cert.S, 8).tolist(), " V =", [np.round(v, 6).ravel().tolist() for v in cert.V])
print("identity residual", f"{cert.residual(ball, half_line):.1e}")

W = check_domination(half_line, ball)
print("reverse: X =", np.round(W.X[0], 3).tolist(), "margins (L, L')", np.round(witness_margins(half_line, ball, W), 3))

# on a bounded domain the constant S can be folded into the V list
V = strengthen_bounded(ball, DominationCertificate(np.eye(1), []))
print("1 = sum V* L V with", len(V), "factors, residual",
      DominationCertificate(np.zeros((1, 1)), V).residual(ball, MonicPencil((np.zeros((1, 1)),))))
