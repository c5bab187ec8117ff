"""
Certificates of positivity
==========================

2 - x^2 is positive on the ball {1 - x^2 >= 0}. The certificate is a sum
of hermitian squares plus weighted terms f* q f, checked by exact
expansion.
"""

from ncpsatz.freealg import parse_poly, format_poly, MatPoly
from ncpsatz.certify import certify_nonneg, verify_certificate, Certificate, random_eval_check

p, q = parse_poly("2 - x1*x1", 1), parse_poly("1 - x1*x1", 1)
res = certify_nonneg(p, q)
print(res.status, "mode", res.mode, "d", res.d, "residual", f"{res.residual:.1e}")
for s in res.certificate.sos:
    print("  square of", format_poly(s))
for f in res.certificate.weighted.get(0, []):
    print("  weighted by", format_poly(f))

# sampling never contradicts a certificate
print("sampled min eig:", random_eval_check(p, q, trials=50).min_eig)

# an empty domain certifies -1: q = [[x, 1], [1, 0]], u = [1; -1 - x/2] / sqrt 2
q = parse_poly('[["x1", "1"], ["1", "0"]]', 1)
u = parse_poly('[["1"], ["-1 - 0.5*x1"]]', 1).scale(0.5 ** 0.5)
print("-1 = u* q u residual:", verify_certificate(MatPoly.const(-1.0, 1), [q], Certificate([], {0: [u]})))
