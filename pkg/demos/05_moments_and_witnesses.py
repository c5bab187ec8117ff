"""
Moments, GNS and witnesses
==========================

When no certificate exists the dual SDP gives a functional that is
negative on p and nonnegative on the module. After mixing in a strictly
positive reference functional, the GNS construction turns it into
matrices X in the domain with <p(X) gamma, gamma> < 0.
"""

import numpy as np
from ncpsatz.freealg import parse_poly
from ncpsatz.pencil import MonicPencil
from ncpsatz.moment import functional_from_witness, moment_matrix, flatness_check, refute, verify_witness

# the point evaluation at X = 1/2 has moments 2^-m and a rank one moment matrix
lam = functional_from_witness([np.array([[0.5]])], [1.0], 1, 1)
print("M_1 =", moment_matrix(lam, 1).tolist(), " flat:", flatness_check(lam, 0)["flat"])

ball = MonicPencil((np.array([[0.0, -1.0], [-1.0, 0.0]]),))
ref = refute(parse_poly("x1", 1), ball, 0)
W = ref.witness
print(ref.status, "value", round(W.value, 4), "X =", np.round(W.X[0], 4).tolist())
print("L(X) min eig", round(ball.min_eig(W.X), 6))
print("moment match:", verify_witness(ref.functional, W, 0)["max_residual"])
