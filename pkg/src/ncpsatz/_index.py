"""Shared index bookkeeping for Gram (primal) and Hankel (dual) blocks.

A moment/coefficient slot is a triple ``(m, a, b)``: word ``m`` and matrix
entry ``(a, b)``. For symmetric data the slots ``(m, a, b)`` and
``(m*, b, a)`` carry the same value, so slots are grouped into classes with
a canonical representative.

Block rows/columns are flattened word-major: ``(word, row, col)`` maps to
``word_idx * (l * nu) + row * nu + col``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .freealg import enumerate_basis, star, word_key


def canonical(m, a, b):
    ms = star(m)
    k1 = (word_key(m), a, b)
    k2 = (word_key(ms), b, a)
    return (tuple(m), a, b) if k1 <= k2 else (ms, b, a)


def self_paired(key):
    m, a, b = key
    return star(m) == m and a == b


class ClassIndex:
    """Growing map from canonical slot classes to consecutive integers."""

    def __init__(self):
        self.keys = []
        self.pos = {}

    def __call__(self, m, a, b):
        key = canonical(m, a, b)
        i = self.pos.get(key)
        if i is None:
            i = len(self.keys)
            self.pos[key] = i
            self.keys.append(key)
        return i

    def __len__(self):
        return len(self.keys)


def hankel_incidence(g, deg, nu, classes: ClassIndex):
    """Incidence of the moment (Hankel) block over words of degree <= deg.

    Entry ``[(v,s),(u,t)]`` carries slot ``(v* u, s, t)``. Returns
    ``(size, rows, cols, vals)`` with ``rows`` class ids and ``cols`` the
    row-major flattened position.
    """
    basis = enumerate_basis(g, deg)
    n = len(basis) * nu
    rows, cols, vals = [], [], []
    for iv, v in enumerate(basis):
        vs = star(v)
        for iu, u in enumerate(basis):
            m = vs + u
            for s in range(nu):
                r = iv * nu + s
                for t in range(nu):
                    c = iu * nu + t
                    rows.append(classes(m, s, t))
                    cols.append(r * n + c)
                    vals.append(1.0)
    return n, rows, cols, vals


def localizing_incidence(q, deg, nu, classes: ClassIndex):
    """Incidence of the localizing block of ``q`` over words of degree <= deg.

    Entry ``[(v,c,a),(u,d,b)]`` carries ``sum_w Q_w[c,d]`` times slot
    ``(v* w u, a, b)``.
    """
    g = q.nvars
    ell = q.nrows
    basis = enumerate_basis(g, deg)
    n = len(basis) * ell * nu
    rows, cols, vals = [], [], []
    qterms = list(q.terms.items())
    for iv, v in enumerate(basis):
        vs = star(v)
        for iu, u in enumerate(basis):
            for w, Qw in qterms:
                m = vs + w + u
                nzc, nzd = np.nonzero(Qw)
                for c, d in zip(nzc, nzd):
                    val = float(Qw[c, d])
                    for a in range(nu):
                        r = (iv * ell + c) * nu + a
                        for b in range(nu):
                            col = (iu * ell + d) * nu + b
                            rows.append(classes(m, a, b))
                            cols.append(r * n + col)
                            vals.append(val)
    return n, rows, cols, vals


def to_csr(rows, cols, vals, nclasses, n):
    return sp.csr_matrix((vals, (rows, cols)), shape=(nclasses, n * n))


def functional_to_vector(values, classes: ClassIndex):
    """Slot-class values of a functional given as ``{word: nu x nu}``."""
    out = np.zeros(len(classes))
    for i, (m, a, b) in enumerate(classes.keys):
        L = values.get(m)
        if L is None:
            raise KeyError(m)
        out[i] = L[a, b]
    return out


def vector_to_values(y, classes: ClassIndex, nu):
    values = {}
    for i, (m, a, b) in enumerate(classes.keys):
        for w in (m, star(m)):
            values.setdefault(w, np.zeros((nu, nu)))
        values[m][a, b] = y[i]
        values[star(m)][b, a] = y[i]
    return values
