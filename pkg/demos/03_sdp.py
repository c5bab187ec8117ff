"""
The semidefinite layer
======================

Problems are stored in primal form, min tr(F Z) with tr(C_i Z) = b_i, and
every answer is rechecked from scratch after the solver returns.
"""

import numpy as np
from ncpsatz import sdp

# min x11 + x22 subject to x12 = 1 on a 2x2 block: optimum 2 at [[1,1],[1,1]]
C = np.array([[0.0, 0.5], [0.5, 0.0]])
prob = sdp.SdpProblem.from_constraints([2], [([C], 1.0)], [np.eye(2)])
sol = sdp.solve(prob)
print(sol.status, "objective", round(sol.primal_objective, 8))
print("recomputed residuals:", {k: f"{v:.1e}" for k, v in sol.residuals.items()})

# an infeasible system comes back with a checked Farkas ray
prob = sdp.SdpProblem.from_constraints([1], [([np.eye(1)], -1.0)], [np.zeros((1, 1))])
sol = sdp.solve(prob)
print(sol.status, "farkas checks:", sol.residuals)

print(sdp.export_sdpa(prob))
