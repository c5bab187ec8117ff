"""Seeded random instances shared by the property and acceptance suites."""

import numpy as np

from ncpsatz.freealg import MatPoly, enumerate_basis
from ncpsatz.pencil import MonicPencil


def random_symmetric(n, rng, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a + a.T) / 2


def random_pencil(g, ell, rng, scale=1.0):
    return MonicPencil(tuple(random_symmetric(ell, rng, scale) for _ in range(g)))


def ball_pencil(g, rng=None, perturb=0.2):
    """``[[1, x^T], [x, I]]``-type pencil, rotated, rescaled and lightly perturbed.

    The unperturbed ``sum x_j A_j`` has eigenvalues ``+-|x|``, so a small
    perturbation keeps it indefinite for every ``x != 0`` (bounded domain).
    """
    ell = g + 1
    A = []
    for j in range(g):
        a = np.zeros((ell, ell))
        a[0, j + 1] = a[j + 1, 0] = -1.0
        A.append(a)
    if rng is None:
        return MonicPencil(tuple(A))
    U, _ = np.linalg.qr(rng.standard_normal((ell, ell)))
    out = []
    for a in A:
        c = rng.uniform(0.5, 2.0)
        P = random_symmetric(ell, rng)
        P *= perturb / (g * np.linalg.norm(P, 2))
        out.append(c * (U.T @ (a + P) @ U))
    return MonicPencil(tuple(out))


def random_poly(g, deg, shape, rng, symmetric=False, density=1.0):
    terms = {}
    for w in enumerate_basis(g, deg):
        if rng.random() <= density:
            terms[w] = rng.standard_normal(shape)
    P = MatPoly(terms, shape, g)
    if symmetric:
        P = (P + P.adjoint()).scale(0.5)
    return P


def module_element(L: MonicPencil, d, nu, rng, nsos=2, nweighted=2):
    """``sum s_j* s_j + sum f_j* L f_j`` with ``deg s_j, deg f_j <= d``."""
    g, ell = L.nvars, L.size
    P = L.as_poly()
    acc = MatPoly.zero((nu, nu), g)
    for _ in range(nsos):
        s = random_poly(g, d, (nu, nu), rng)
        acc = acc + s.adjoint() * s
    for _ in range(nweighted):
        f = random_poly(g, d, (ell, nu), rng)
        acc = acc + f.adjoint() * P * f
    return acc


def dichotomy_instance(i):
    """The i-th (p, L) pair of the certify/refute suite: ball-type L, deg p <= 3."""
    rng = np.random.default_rng(1000 + i)
    g = 1 + i % 3
    nu = 1 + (i // 3) % 2
    L = ball_pencil(g, rng)
    deg = 2 + i % 2
    p = random_poly(g, deg, (nu, nu), rng, symmetric=True, density=0.6)
    shift = rng.uniform(-1.0, 4.0)
    p = p + MatPoly.identity(nu, g).scale(shift)
    return p, L
