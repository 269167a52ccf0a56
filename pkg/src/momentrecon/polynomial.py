"""Sparse multivariate polynomials over the canonical (t, u, x) coordinates."""
from __future__ import annotations

from typing import Mapping

import numpy as np


class Polynomial:
    """Polynomial stored as ``{exponent tuple: coefficient}``.

    All exponent tuples have length ``nvars``. Instances are treated as
    immutable.
    """

    def __init__(self, terms: Mapping, nvars: int):
        self.nvars = int(nvars)
        clean = {}
        for alpha, c in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.nvars:
                raise ValueError(f"exponent {alpha} does not have {self.nvars} entries")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self.terms = {a: c for a, c in clean.items() if c != 0.0}
        self._exps = np.array(list(self.terms) or np.zeros((0, self.nvars), dtype=int), dtype=int).reshape(-1, self.nvars)
        self._coefs = np.array(list(self.terms.values()), dtype=float)

    @classmethod
    def constant(cls, c: float, nvars: int) -> "Polynomial":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int) -> "Polynomial":
        alpha = [0] * nvars
        alpha[i] = 1
        return cls({tuple(alpha): 1.0}, nvars)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __call__(self, z) -> np.ndarray:
        """Evaluate at points ``z`` of shape (..., nvars)."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1])
        for alpha, c in zip(self._exps, self._coefs):
            term = np.full(z.shape[:-1], c)
            for i, a in enumerate(alpha):
                if a == 1:
                    term = term * z[..., i]
                elif a > 1:
                    term = term * z[..., i] ** a
            out = out + term
        return out

    def derivative(self, i: int) -> "Polynomial":
        terms = {}
        for alpha, c in self.terms.items():
            if alpha[i] > 0:
                beta = list(alpha)
                beta[i] -= 1
                terms[tuple(beta)] = terms.get(tuple(beta), 0.0) + c * alpha[i]
        return Polynomial(terms, self.nvars)

    def __add__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.nvars)
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial(terms, self.nvars)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({a: -c for a, c in self.terms.items()}, self.nvars)

    def __sub__(self, other) -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial({a: c * float(other) for a, c in self.terms.items()}, self.nvars)
        terms = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                g = tuple(x + y for x, y in zip(a, b))
                terms[g] = terms.get(g, 0.0) + ca * cb
        return Polynomial(terms, self.nvars)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(sorted(self.terms.items()))))

    def embed(self, positions, nvars: int) -> "Polynomial":
        """Re-express over ``nvars`` variables, sending variable k to ``positions[k]``."""
        terms = {}
        for alpha, c in self.terms.items():
            beta = [0] * nvars
            for k, a in enumerate(alpha):
                beta[positions[k]] += a
            terms[tuple(beta)] = terms.get(tuple(beta), 0.0) + c
        return Polynomial(terms, nvars)

    def __repr__(self):
        body = " + ".join(f"{c:g}*z^{a}" for a, c in self.terms.items()) or "0"
        return f"Polynomial({body}, nvars={self.nvars})"


class PolynomialMap:
    """Several polynomials over the same variables, evaluated together.

    Shares one monomial table across components, which is much cheaper than
    calling each :class:`Polynomial` in turn inside tight integration loops.
    """

    def __init__(self, polys):
        polys = list(polys)
        if not polys:
            raise ValueError("need at least one polynomial")
        nv = {p.nvars for p in polys}
        if len(nv) != 1:
            raise ValueError("polynomials must share the number of variables")
        self.nvars = nv.pop()
        exps = sorted({a for p in polys for a in p.terms} or {(0,) * self.nvars})
        pos = {a: k for k, a in enumerate(exps)}
        self._exps = np.array(exps, dtype=float)
        self._coefs = np.zeros((len(exps), len(polys)))
        for j, p in enumerate(polys):
            for a, c in p.terms.items():
                self._coefs[pos[a], j] = c
        # each monomial as a list of (variable, power) factors
        self._factors = [tuple((i, int(e)) for i, e in enumerate(row) if e) for row in self._exps]

    def __len__(self):
        return self._coefs.shape[1]

    def __call__(self, z) -> np.ndarray:
        """Values at ``z`` of shape (..., nvars); result has shape (..., len(self))."""
        z = np.asarray(z, dtype=float)
        mono = np.empty(z.shape[:-1] + (len(self._factors),))
        for k, factors in enumerate(self._factors):
            if not factors:
                mono[..., k] = 1.0
                continue
            col = None
            for i, e in factors:
                zi = z[..., i] if e == 1 else z[..., i] ** e
                col = zi if col is None else col * zi
            mono[..., k] = col
        return mono @ self._coefs
