"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py``.
"""

import functools
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from ncpsatz.certify import (  # noqa: E402
    Certificate, QuadModuleSpec, certify_nonneg, membership, random_eval_check, verify_certificate,
)
from ncpsatz.domination import DominationCertificate, check_domination, witness_margins  # noqa: E402
from ncpsatz.freealg import MatPoly, parse_poly, sigma  # noqa: E402
from ncpsatz.moment import (  # noqa: E402
    flatness_check, functional_from_witness, reference_functional, refute, verify_witness,
)
from ncpsatz.pencil import MonicPencil, NoUnitCertificate, unit_certificate  # noqa: E402
from instances import dichotomy_instance, module_element, random_pencil  # noqa: E402

LINES = []

BALL = MonicPencil((np.array([[0.0, -1.0], [-1.0, 0.0]]),))
HALF_LINE = MonicPencil((np.array([[1.0]]),))


def report(n, ok, msg):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {msg}"
    LINES.append(line)
    print(line)
    return ok


# ---- shared suites (computed once)

@functools.lru_cache(maxsize=None)
def soundness_suite():
    out = []
    for i in range(50):
        rng = np.random.default_rng(500 + i)
        g, ell, nu, d = 1 + i % 2, 1 + i % 3, 1 + (i // 2) % 2, i % 3
        L = random_pencil(g, ell, rng)
        p = module_element(L, d, nu, rng)
        res = membership(p, QuadModuleSpec([L.as_poly()], d, d, nu, g))
        out.append((p, L, res))
    return out


@functools.lru_cache(maxsize=None)
def dichotomy_suite():
    out = []
    for i in range(30):
        p, L = dichotomy_instance(i)
        out.append((p, L, certify_nonneg(p, L, seed=i)))
    return out


@functools.lru_cache(maxsize=None)
def concave_run():
    p, q = parse_poly("2 - x1*x1", 1), parse_poly("1 - x1*x1", 1)
    return p, q, certify_nonneg(p, q)


# ---- criteria

def test_criterion_01_empty_domain_identity():
    q = parse_poly('[["x1", "1"], ["1", "0"]]', 1)
    u = parse_poly('[["1"], ["-1 - 0.5*x1"]]', 1).scale(np.sqrt(0.5))
    resid = verify_certificate(MatPoly.const(-1.0, 1), [q], Certificate([], {0: [u]}))
    assert report(1, resid <= 1e-12, f"-1 = 1/2 u* q u, residual {resid:.2e}")


def test_criterion_02_non_membership():
    p, q = parse_poly("x1", 1), parse_poly('[["1", "x1"], ["x1", "0"]]', 1)
    verdicts = {k: membership(p, QuadModuleSpec([q], k, k, 1, 1)).feasible for k in (0, 1, 2)}
    ok = all(v is False for v in verdicts.values())
    assert report(2, ok, f"x in M_kk([[1,x],[x,0]]) feasibility by k: {verdicts}")


def test_criterion_03_soundness_suite():
    runs = soundness_suite()
    fails = [i for i, (_, _, r) in enumerate(runs) if not (r.feasible and r.residual <= 1e-6)]
    worst = max((r.residual for _, _, r in runs if r.residual is not None), default=float("nan"))
    assert report(3, not fails, f"50 module elements, failures {fails}, worst residual {worst:.2e}")


def _witness_ok(p, L, W):
    # value recomputed from (X, gamma) rather than taken from the witness record
    value = W.value_of(p)
    return value <= -1e-7 and L.min_eig(W.X) >= -1e-8


def test_criterion_04_dichotomy():
    runs = dichotomy_suite()
    counts = {"certificate": 0, "witness": 0, "indeterminate": 0}
    bad = []
    for i, (p, L, r) in enumerate(runs):
        counts[r.status] += 1
        if r.status == "certificate" and not r.residual <= 1e-6:
            bad.append(i)
        if r.status == "witness" and not _witness_ok(p, L, r.witness):
            bad.append(i)
    ok = counts["indeterminate"] == 0 and not bad
    assert report(4, ok, f"30 pairs: {counts}, unverified {bad}")


def test_criterion_05_gns_property():
    """Moment match recomputed from the mixed functional, not read from the stored residuals."""
    worst, dims_ok, n = 0.0, True, 0
    for i, (p, L, r) in enumerate(dichotomy_suite()):
        if r.status != "witness":
            continue
        ref = refute(p, L, r.d, seed=i)
        n += 1
        dims_ok &= ref.witness.n == p.nrows * sigma(p.nvars, r.d)
        worst = max(worst, verify_witness(ref.functional, ref.witness, r.d)["max_residual"])
    ok = n > 0 and worst <= 1e-6 and dims_ok
    assert report(5, ok, f"{n} refutation runs, worst degree <= 2d+1 mismatch {worst:.2e}, "
                         f"dimension nu*sigma(d): {dims_ok}")


def test_criterion_06_concave_pipeline():
    p, q, r = concave_run()
    deg = r.certificate.degrees()["sos"] if r.certificate else None
    ok = r.status == "certificate" and r.residual <= 1e-7 and deg <= r.d + 1
    assert report(6, ok, f"2 - x^2 on 1 - x^2: {r.status}, residual {r.residual:.2e}, sos degree {deg} (d = {r.d})")


def test_criterion_07_unit_certificate():
    uc = unit_certificate(BALL)
    resid = uc.residual(BALL)
    try:
        unit_certificate(HALF_LINE)
        evidence = None
    except NoUnitCertificate as exc:
        evidence = float(np.linalg.eigvalsh(exc.combination)[0])
    ok = resid <= 1e-8 and evidence is not None and evidence > 0
    assert report(7, ok, f"ball identity residual {resid:.2e}; half line PD combination min eig {evidence}")


def test_criterion_08_domination():
    cert = check_domination(BALL, HALF_LINE)
    ok = isinstance(cert, DominationCertificate)
    resid = cert.residual(BALL, HALF_LINE) if ok else float("nan")
    if ok:
        VVt = sum(v @ v.T for v in cert.V)
        ok = resid <= 1e-8 and np.allclose(VVt, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-6)
    W = check_domination(HALF_LINE, BALL)
    mL, mLp = witness_margins(HALF_LINE, BALL, W) if not isinstance(W, DominationCertificate) else (None, None)
    ok = ok and mL is not None and mL >= -1e-8 and mLp <= -1e-7
    assert report(8, ok, f"ball -> half line residual {resid:.2e}; reverse witness margins L {mL:.3g}, L' {mLp:.3g}")


def test_criterion_09_flatness():
    geo = functional_from_witness([np.array([[0.5]])], [1.0], 1, 0)
    f1 = flatness_check(geo, 0)
    f2 = flatness_check(reference_functional(BALL, 1, 0, nsamples=16, seed=0), 0)
    ok = f1["flat"] and (f1["rank_k"], f1["rank_k1"]) == (1, 1) and not f2["flat"]
    assert report(9, ok, f"2^-m ranks ({f1['rank_k']},{f1['rank_k1']}); 16-sample reference flat = {f2['flat']}")


def test_criterion_10_sampling_agrees():
    certified = [(p, L.as_poly()) for p, L, r in soundness_suite() if r.feasible]
    certified += [(p, L.as_poly()) for p, L, r in dichotomy_suite() if r.status == "certificate"]
    p, q, r = concave_run()
    if r.status == "certificate":
        certified.append((p, q))
    falsified = []
    for i, (p, q) in enumerate(certified):
        ev = random_eval_check(p, q, trials=30, seed=i)
        if ev.falsified:
            falsified.append(i)
    assert report(10, not falsified, f"{len(certified)} certified instances sampled, falsified {falsified}")


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion")]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
