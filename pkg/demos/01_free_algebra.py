"""
Words, polynomials and evaluation
=================================

Noncommutative polynomials are dictionaries from words to coefficient
matrices. They are evaluated on tuples of symmetric matrices.
"""

import numpy as np
from ncpsatz.freealg import MatPoly, parse_poly, format_poly, enumerate_basis, random_tuple, sigma

# x1*x2 and x2*x1 are different words
p = parse_poly("x1*x2 + x2*x1 - 2*x1*x1", 2)
print("p       =", format_poly(p))
print("p*      =", format_poly(p.adjoint()))
print("symmetric:", p.is_symmetric())

# the graded-lex basis of words of length <= 2 in two letters
print("basis:", enumerate_basis(2, 2), "count", sigma(2, 2))

# evaluate at a random pair of 3x3 symmetric matrices
rng = np.random.default_rng(0)
X = random_tuple(2, 3, rng)
val = p(X)
print("p(X) eigenvalues:", np.round(np.linalg.eigvalsh(val), 4))

# matrix-valued polynomials multiply blockwise
u = parse_poly('[["1"], ["-x1"]]', 1)
print("u* u =", format_poly(u.adjoint() * u))
print("MatPoly.var(1, 1) * 2 =", format_poly(MatPoly.var(1, 1).scale(2.0)))
