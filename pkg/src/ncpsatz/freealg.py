"""Words, matrix-valued nc polynomials, evaluation on symmetric tuples.

Words are plain tuples of 1-based letter indices; ``()`` is the empty word.
A :class:`MatPoly` maps words to dense ``nrows x ncols`` coefficient
matrices. Bases are enumerated in graded lexicographic order (shorter words
first, then lexicographic by letter index), which fixes every Gram/Hankel
index used elsewhere in the package.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from functools import lru_cache
from numbers import Real
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE_TOL = 1e-14
SYM_TOL = 1e-12

Word = tuple


class MalformedInput(ValueError):
    pass


class DimensionError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, msg, line, col):
        super().__init__(f"{msg} (line {line}, column {col})")
        self.line = line
        self.col = col


def check_word(w, g):
    for a in w:
        if not isinstance(a, (int, np.integer)) or a < 1 or a > g:
            raise MalformedInput(f"letter {a!r} out of range for g={g}")
    return tuple(int(a) for a in w)


def concat(w, v):
    return tuple(w) + tuple(v)


def star(w):
    """Involution on words: reverse the letters."""
    return tuple(reversed(w))


def degree(w):
    return len(w)


def word_ops(kind, w, v=None, g=None):
    if g is not None:
        w = check_word(w, g)
        if v is not None:
            v = check_word(v, g)
    if kind == "concat":
        return concat(w, v if v is not None else ())
    if kind == "involution":
        return star(w)
    if kind == "degree":
        return degree(w)
    raise MalformedInput(f"unknown word operation {kind!r}")


def sigma(g, d):
    """Number of words of length at most ``d`` in ``g`` letters."""
    if d < 0:
        return 0
    return sum(g**j for j in range(d + 1))


@lru_cache(maxsize=None)
def _basis(g, d):
    words = []
    for n in range(d + 1):
        words.extend(itertools.product(range(1, g + 1), repeat=n))
    return tuple(words)


def enumerate_basis(g, d):
    """All words of degree <= d, shorter first then lexicographic."""
    if g < 1 or d < 0:
        raise MalformedInput("need g >= 1 and d >= 0")
    return list(_basis(g, d))


def basis_index(g, d):
    return {w: i for i, w in enumerate(_basis(g, d))}


def word_key(w):
    return (len(w), tuple(w))


def word_str(w):
    return "1" if not w else "*".join(f"x{a}" for a in w)


class MatPoly:
    """Matrix-valued polynomial in ``nvars`` noncommuting symmetric letters.

    Instances are treated as immutable; arithmetic returns new objects.
    """

    __slots__ = ("nrows", "ncols", "nvars", "terms")

    def __init__(self, terms: Mapping | None = None, shape=(1, 1), nvars=1, prune=PRUNE_TOL):
        nrows, ncols = int(shape[0]), int(shape[1])
        if nrows < 0 or ncols < 0 or nvars < 1:
            raise DimensionError("bad shape or variable count")
        clean = {}
        for w, c in (terms or {}).items():
            w = check_word(tuple(w), nvars)
            c = np.array(c, dtype=float).reshape(nrows, ncols)
            if c.size and np.max(np.abs(c)) > prune:
                if w in clean:
                    c = clean[w] + c
                clean[w] = c
        self.nrows = nrows
        self.ncols = ncols
        self.nvars = int(nvars)
        self.terms = dict(sorted(clean.items(), key=lambda kv: word_key(kv[0])))

    # construction helpers
    @classmethod
    def zero(cls, shape=(1, 1), nvars=1):
        return cls({}, shape, nvars)

    @classmethod
    def const(cls, c, nvars=1):
        c = np.atleast_2d(np.asarray(c, dtype=float))
        return cls({(): c}, c.shape, nvars)

    @classmethod
    def identity(cls, n, nvars=1):
        return cls({(): np.eye(n)}, (n, n), nvars)

    @classmethod
    def var(cls, j, nvars):
        return cls({(j,): [[1.0]]}, (1, 1), nvars)

    @classmethod
    def monomial(cls, w, coeff=1.0, nvars=1):
        c = np.atleast_2d(np.asarray(coeff, dtype=float))
        return cls({tuple(w): c}, c.shape, nvars)

    @classmethod
    def from_entries(cls, grid: Sequence[Sequence["MatPoly | Real"]], nvars=None):
        """Assemble a matrix polynomial from a 2-D grid of scalar polynomials."""
        rows = len(grid)
        cols = len(grid[0]) if rows else 0
        if nvars is None:
            nvars = max([e.nvars for r in grid for e in r if isinstance(e, MatPoly)] + [1])
        terms = {}
        for i, r in enumerate(grid):
            if len(r) != cols:
                raise DimensionError("ragged entry grid")
            for j, e in enumerate(r):
                if not isinstance(e, MatPoly):
                    e = MatPoly.const(e, nvars)
                if e.shape != (1, 1):
                    raise DimensionError("grid entries must be scalar polynomials")
                for w, c in e.terms.items():
                    t = terms.setdefault(w, np.zeros((rows, cols)))
                    t[i, j] += c[0, 0]
        return cls(terms, (rows, cols), nvars)

    @classmethod
    def hstack(cls, polys):
        return _stack(polys, axis=1)

    @classmethod
    def vstack(cls, polys):
        return _stack(polys, axis=0)

    # basic properties
    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def degree(self):
        return max((len(w) for w in self.terms), default=-math.inf)

    def coeff(self, w):
        return self.terms.get(tuple(w), np.zeros(self.shape))

    def entry(self, i, j):
        return MatPoly({w: c[i, j] for w, c in self.terms.items()}, (1, 1), self.nvars)

    def block(self, rows, cols):
        return MatPoly({w: c[rows][:, cols] for w, c in self.terms.items()},
                       np.zeros(self.shape)[rows][:, cols].shape, self.nvars)

    def homogeneous_part(self, k):
        return MatPoly({w: c for w, c in self.terms.items() if len(w) == k}, self.shape, self.nvars)

    def is_symmetric(self, tol=SYM_TOL):
        if self.nrows != self.ncols:
            return False
        for w, c in self.terms.items():
            if np.max(np.abs(c - self.coeff(star(w)).T)) > tol:
                return False
        return True

    def is_zero(self):
        return not self.terms

    def max_abs_coeff(self):
        return max((float(np.max(np.abs(c))) for c in self.terms.values()), default=0.0)

    # arithmetic
    def _check_same(self, other):
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")
        if self.nvars != other.nvars:
            raise DimensionError("variable count mismatch")

    def _coerce(self, other):
        if isinstance(other, MatPoly):
            return other
        if isinstance(other, Real):
            if self.nrows != self.ncols:
                raise DimensionError("scalar promotion needs a square polynomial")
            return MatPoly({(): other * np.eye(self.nrows)}, self.shape, self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check_same(other)
        terms = dict(self.terms)
        for w, c in other.terms.items():
            terms[w] = terms[w] + c if w in terms else c
        return MatPoly(terms, self.shape, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return MatPoly({w: -c for w, c in self.terms.items()}, self.shape, self.nvars)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, a):
        return MatPoly({w: a * c for w, c in self.terms.items()}, self.shape, self.nvars)

    def __mul__(self, other):
        if isinstance(other, Real):
            return self.scale(float(other))
        if not isinstance(other, MatPoly):
            return NotImplemented
        if self.ncols != other.nrows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        if self.nvars != other.nvars:
            raise DimensionError("variable count mismatch")
        terms = {}
        for w, a in self.terms.items():
            for v, b in other.terms.items():
                wv = w + v
                prod = a @ b
                terms[wv] = terms[wv] + prod if wv in terms else prod
        return MatPoly(terms, (self.nrows, other.ncols), self.nvars)

    def __rmul__(self, other):
        if isinstance(other, Real):
            return self.scale(float(other))
        return NotImplemented

    def __matmul__(self, other):
        return self * other

    def __pow__(self, k):
        if self.nrows != self.ncols or k < 0:
            raise DimensionError("powers need a square polynomial and k >= 0")
        out = MatPoly.identity(self.nrows, self.nvars)
        for _ in range(int(k)):
            out = out * self
        return out

    def adjoint(self):
        """Transpose coefficients and reverse words."""
        return MatPoly({star(w): c.T for w, c in self.terms.items()}, (self.ncols, self.nrows), self.nvars)

    @property
    def star(self):
        return self.adjoint()

    def kron_const(self, left):
        """Left-multiply every coefficient by a constant matrix."""
        left = np.atleast_2d(np.asarray(left, dtype=float))
        return MatPoly({w: left @ c for w, c in self.terms.items()}, (left.shape[0], self.ncols), self.nvars)

    def with_nvars(self, g):
        return MatPoly(self.terms, self.shape, g)

    def __eq__(self, other):
        if not isinstance(other, MatPoly):
            return NotImplemented
        if self.shape != other.shape or self.nvars != other.nvars:
            return False
        if self.terms.keys() != other.terms.keys():
            return False
        return all(np.array_equal(c, other.terms[w]) for w, c in self.terms.items())

    def allclose(self, other, tol=1e-9):
        return self.shape == other.shape and (self - other).max_abs_coeff() <= tol

    def __hash__(self):
        return hash((self.shape, self.nvars, tuple(self.terms)))

    def __repr__(self):
        return f"MatPoly({format_poly(self)!r}, shape={self.shape}, nvars={self.nvars})"

    # serialization
    def to_dict(self):
        return {"shape": [self.nrows, self.ncols],
                "terms": {word_str(w): c.tolist() for w, c in self.terms.items()}}

    @classmethod
    def from_dict(cls, d, nvars):
        terms = {}
        for key, c in d["terms"].items():
            w = () if key in ("1", "") else tuple(int(t[1:]) for t in key.split("*"))
            terms[w] = c
        return cls(terms, tuple(d["shape"]), nvars)

    # evaluation
    def __call__(self, X):
        return evaluate(self, X)


def _stack(polys, axis):
    polys = list(polys)
    if not polys:
        raise DimensionError("nothing to stack")
    g = polys[0].nvars
    shapes = [p.shape for p in polys]
    if axis == 1 and len({s[0] for s in shapes}) != 1:
        raise DimensionError("row counts differ")
    if axis == 0 and len({s[1] for s in shapes}) != 1:
        raise DimensionError("column counts differ")
    words = set().union(*(p.terms for p in polys))
    terms = {w: np.concatenate([p.coeff(w) for p in polys], axis=axis) for w in words}
    shape = np.concatenate([np.zeros(s) for s in shapes], axis=axis).shape
    return MatPoly(terms, shape, g)


def poly_arith(kind, P, Q=None):
    if kind == "add":
        return P + Q
    if kind == "sub":
        return P - Q
    if kind == "mul":
        return P * Q
    if kind == "adjoint":
        return P.adjoint()
    if kind == "scale":
        return P.scale(float(Q))
    raise MalformedInput(f"unknown operation {kind!r}")


# ---------------------------------------------------------------- evaluation

def as_tuple(X, g=None, tol=SYM_TOL):
    """Validate a tuple of symmetric matrices of equal size."""
    X = [np.atleast_2d(np.asarray(x, dtype=float)) for x in X]
    if g is not None and len(X) != g:
        raise DimensionError(f"expected {g} matrices, got {len(X)}")
    n = X[0].shape[0] if X else 0
    for x in X:
        if x.shape != (n, n):
            raise DimensionError("tuple entries must be square and of equal size")
        if np.max(np.abs(x - x.T), initial=0.0) > tol * max(1.0, np.max(np.abs(x), initial=0.0)):
            raise MalformedInput("tuple entries must be symmetric")
    return X


def random_tuple(g, n, rng, scale=1.0):
    out = []
    for _ in range(g):
        a = rng.standard_normal((n, n))
        out.append(scale * (a + a.T) / 2)
    return out


class WordEvaluator:
    """Memoised products ``w(X)`` for a fixed tuple."""

    def __init__(self, X):
        self.X = X
        self.n = X[0].shape[0]
        self.cache = {(): np.eye(self.n)}

    def __call__(self, w):
        w = tuple(w)
        hit = self.cache.get(w)
        if hit is None:
            hit = self(w[:-1]) @ self.X[w[-1] - 1]
            self.cache[w] = hit
        return hit


def evaluate(P: MatPoly, X, words: WordEvaluator | None = None):
    """Return ``sum_w B_w kron w(X)`` as a dense ``(l n) x (nu n)`` matrix."""
    X = as_tuple(X)
    if len(X) != P.nvars:
        raise DimensionError(f"polynomial has {P.nvars} variables, tuple has {len(X)}")
    ev = words or WordEvaluator(X)
    n = ev.n
    out = np.zeros((P.nrows * n, P.ncols * n))
    for w, c in P.terms.items():
        out += np.kron(c, ev(w))
    return out


# ---------------------------------------------------------- text format

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<var>x\d+)|(?P<op>[-+*()']))")


def _tokenize(text):
    toks = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            line, col = _linecol(text, pos)
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}", line, col)
        start = m.start(m.lastgroup)
        toks.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return text, toks


def _linecol(text, pos):
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Parser:
    def __init__(self, text, g):
        self.text, self.toks = _tokenize(text)
        self.i = 0
        self.g = g

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, *_linecol(self.text, tok[2]))

    def parse(self):
        p = self.poly()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return p

    def poly(self):
        sign = 1.0
        if self.peek()[1] in "+-" and self.peek()[0] == "op":
            sign = -1.0 if self.take()[1] == "-" else 1.0
        out = self.term().scale(sign)
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            out = out + t if op == "+" else out - t
        return out

    def term(self):
        out = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            out = out * self.factor()
        return out

    def factor(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            out = MatPoly.const(float(val), self.g)
        elif kind == "var":
            self.take()
            j = int(val[1:])
            if j < 1 or j > self.g:
                self.fail(f"variable {val} exceeds g={self.g}", (kind, val, pos))
            out = MatPoly.var(j, self.g)
        elif kind == "op" and val == "(":
            self.take()
            out = self.poly()
            if self.peek()[1] != ")":
                self.fail("expected ')'")
            self.take()
        elif kind == "op" and val == "-":
            self.take()
            out = -self.factor()
        else:
            self.fail("expected a number, variable or '('" if kind != "end" else "unexpected end of input")
        while self.peek()[0] == "op" and self.peek()[1] == "'":
            self.take()
            out = out.adjoint()
        return out


def parse_scalar(text: str, g: int) -> MatPoly:
    return _Parser(text, g).parse()


def parse_poly(text: str, g: int) -> MatPoly:
    """Parse a scalar polynomial or a JSON grid of polynomial strings."""
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            grid = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON grid: {exc.msg}", exc.lineno, exc.colno) from None
        if not grid or not all(isinstance(r, list) for r in grid):
            raise ParseError("matrix polynomial must be a 2-D array", 1, 1)
        entries = []
        for i, r in enumerate(grid):
            row = []
            for j, e in enumerate(r):
                try:
                    row.append(parse_scalar(str(e), g))
                except ParseError as exc:
                    raise ParseError(f"entry ({i},{j}): {exc}", exc.line, exc.col) from None
            entries.append(row)
        return MatPoly.from_entries(entries, g)
    return parse_scalar(text, g)


def _fmt_num(x):
    r = repr(float(x))
    return r


def format_scalar(P: MatPoly) -> str:
    parts = []
    for w, c in P.terms.items():
        a = float(c[0, 0])
        if a == 0.0:
            continue
        neg = a < 0 or (a == 0 and math.copysign(1, a) < 0)
        mag = abs(a)
        if w:
            body = word_str(w) if mag == 1.0 else f"{_fmt_num(mag)}*{word_str(w)}"
        else:
            body = _fmt_num(mag)
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts) if parts else "0"


def format_poly(P: MatPoly) -> str:
    if P.shape == (1, 1):
        return format_scalar(P)
    grid = [[format_scalar(P.entry(i, j)) for j in range(P.ncols)] for i in range(P.nrows)]
    return json.dumps(grid)


def nvars_in_text(text: str) -> int:
    """Largest variable index mentioned in a polynomial string (at least 1)."""
    return max([int(m) for m in re.findall(r"x(\d+)", text)] + [1])


def coefficient_distance(P: MatPoly, Q: MatPoly) -> float:
    return (P - Q).max_abs_coeff()


def sum_polys(polys: Iterable[MatPoly], shape, nvars) -> MatPoly:
    terms = {}
    for p in polys:
        for w, c in p.terms.items():
            terms[w] = terms[w] + c if w in terms else c.copy()
    return MatPoly(terms, shape, nvars)
