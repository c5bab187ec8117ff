"""
Monic pencils and their domains
===============================

A monic pencil L(x) = I - sum A_j x_j is PSD on a convex set at every
matrix size. Concave quadratics are turned into pencils by a Schur
complement.
"""

import numpy as np
from ncpsatz.freealg import parse_poly, format_poly
from ncpsatz.pencil import MonicPencil, linearize, is_bounded, unit_certificate, NoUnitCertificate

ball = MonicPencil((np.array([[0.0, -1.0], [-1.0, 0.0]]),))     # [[1, x], [x, 1]]
half_line = MonicPencil((np.array([[1.0]]),))                    # 1 - x
print("ball pencil:", format_poly(ball.as_poly()))
print("bounded? ball", is_bounded(ball), " half line", is_bounded(half_line))

# a bounded domain has I = sum W_j* L(x) W_j
uc = unit_certificate(ball)
print("unit certificate residual:", uc.residual(ball))
try:
    unit_certificate(half_line)
except NoUnitCertificate as exc:
    print("half line: PD combination of coefficients ->", exc.combination.ravel())

# 1 - x^2 becomes [[1, x], [x, 1]] (up to sign of x)
q = parse_poly("1 - x1*x1", 1)
L, dec = linearize(q)
print("linearization of", format_poly(q), "->", format_poly(L.as_poly()))
