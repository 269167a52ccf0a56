"""Multi-index bookkeeping and truncated moment vectors.

Coordinates are always ordered (t, u_1..u_m, x_1..x_n); a moment vector
stores its values aligned with :func:`enumerate_indices` for that ambient
dimension, so every matrix built downstream shares one row ordering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np


@lru_cache(maxsize=None)
def _indices(q: int, d: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for k in range(d + 1):
        out.extend(_compositions(k, q))
    return tuple(out)


def _compositions(k: int, q: int):
    # all alpha with |alpha| = k, first coordinate descending
    if q == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _compositions(k - first, q - 1):
            yield (first,) + rest


def enumerate_indices(q: int, d: int) -> list[tuple[int, ...]]:
    """All multi-indices of length ``q`` and degree <= ``d`` in graded lex order.

    >>> enumerate_indices(2, 2)
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    """
    if q < 1 or d < 0:
        raise ValueError(f"need q >= 1 and d >= 0, got q={q}, d={d}")
    return list(_indices(q, d))


def index_count(q: int, d: int) -> int:
    return comb(q + d, d)


def monomial_eval(z, alpha) -> float:
    """Evaluate ``prod(z_i ** alpha_i)``; the zero index gives 1."""
    z = np.asarray(z, dtype=float)
    alpha = tuple(alpha)
    if z.shape != (len(alpha),):
        raise ValueError(f"dimension mismatch: point has shape {z.shape}, index has length {len(alpha)}")
    out = 1.0
    for zi, ai in zip(z, alpha):
        if ai:
            out *= zi ** ai
    return float(out)


def monomial_matrix(points, indices) -> np.ndarray:
    """Matrix with entry ``[k, j] = points[j] ** indices[k]``.

    ``points`` has shape (npoints, q). Powers are tabulated once per
    coordinate, so this is cheap even for large grids.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.asarray(indices, dtype=int).reshape(len(indices), -1)
    npts, q = points.shape
    if idx.shape[1] != q:
        raise ValueError(f"indices have length {idx.shape[1]}, points have dimension {q}")
    dmax = int(idx.max()) if idx.size else 0
    powers = np.empty((q, dmax + 1, npts))
    powers[:, 0, :] = 1.0
    for p in range(1, dmax + 1):
        powers[:, p, :] = powers[:, p - 1, :] * points.T
    out = np.ones((len(idx), npts))
    for i in range(q):
        out *= powers[i, idx[:, i], :]
    return out


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_i, hi_i]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if not np.all(lo < hi):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.width))

    def sub(self, axes: Sequence[int]) -> "Box":
        axes = list(axes)
        return Box(self.lo[axes], self.hi[axes])

    def contains(self, points, slack: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.lo - slack) & (p <= self.hi + slack), axis=1)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


@dataclass(frozen=True)
class AffineMap:
    """Componentwise map ``z -> scale * z + offset``."""

    scale: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        a = np.array(self.scale, dtype=float).reshape(-1)
        b = np.array(self.offset, dtype=float).reshape(-1)
        if a.shape != b.shape:
            raise ValueError("scale and offset must have the same length")
        if np.any(a == 0) or not np.all(np.isfinite(a)):
            raise ValueError("affine map is not invertible (zero or non-finite scale)")
        object.__setattr__(self, "scale", a)
        object.__setattr__(self, "offset", b)

    @classmethod
    def between(cls, source: Box, target: Box) -> "AffineMap":
        a = target.width / source.width
        return cls(a, target.lo - a * source.lo)

    @classmethod
    def to_unit(cls, box: Box) -> "AffineMap":
        """Map ``box`` onto [-1, 1]^dim."""
        return cls.between(box, Box(-np.ones(box.dim), np.ones(box.dim)))

    @property
    def dim(self) -> int:
        return len(self.scale)

    def __call__(self, z):
        return np.asarray(z, dtype=float) * self.scale + self.offset

    def inverse(self) -> "AffineMap":
        return AffineMap(1.0 / self.scale, -self.offset / self.scale)

    def apply_box(self, box: Box) -> Box:
        a, b = self(box.lo), self(box.hi)
        return Box(np.minimum(a, b), np.maximum(a, b))


@dataclass(frozen=True)
class MomentVector:
    """Truncated moment sequence of a positive measure.

    ``values[k]`` is the moment of ``enumerate_indices(len(coords), degree)[k]``.
    ``coords`` names the ambient coordinates, e.g. ``("t", "u1", "x1", "x2")``;
    invariant measures of autonomous systems have states only.
    """

    coords: tuple[str, ...]
    degree: int
    values: np.ndarray
    box: Box
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        vals = np.array(self.values, dtype=float).reshape(-1)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if len(vals) != index_count(len(coords), self.degree):
            raise ValueError(
                f"expected {index_count(len(coords), self.degree)} moments for "
                f"q={len(coords)}, degree={self.degree}; got {len(vals)}"
            )
        if self.box.dim != len(coords):
            raise ValueError("box dimension does not match the coordinates")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names: {coords}")

    @property
    def q(self) -> int:
        return len(self.coords)

    @property
    def has_time(self) -> bool:
        return bool(self.coords) and self.coords[0] == "t"

    @property
    def n(self) -> int:
        return sum(c.startswith("x") for c in self.coords)

    @property
    def m(self) -> int:
        return sum(c.startswith("u") for c in self.coords)

    @property
    def dims(self) -> tuple[int, int]:
        return self.n, self.m

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return enumerate_indices(self.q, self.degree)

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def _lookup(self) -> dict:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {a: k for k, a in enumerate(self.indices)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def position(self, alpha) -> int:
        try:
            return self._lookup()[tuple(alpha)]
        except KeyError:
            raise KeyError(f"no moment for index {tuple(alpha)} (q={self.q}, degree={self.degree})") from None

    def __getitem__(self, alpha) -> float:
        return float(self.values[self.position(alpha)])

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._lookup()

    def axis(self, name: str) -> int:
        return self.coords.index(name)

    def evaluate(self, poly_terms) -> float:
        """Integrate a polynomial given as ``{alpha: coeff}`` against the measure."""
        return float(sum(c * self[a] for a, c in poly_terms.items()))

    def marginal(self, axes: Sequence[int], degree: int | None = None) -> "MomentVector":
        """Moments of the projection onto ``axes`` (powers elsewhere are zero)."""
        axes = list(axes)
        degree = self.degree if degree is None else degree
        if degree > self.degree:
            raise ValueError("marginal degree exceeds available degree")
        vals = []
        for beta in enumerate_indices(len(axes), degree):
            alpha = [0] * self.q
            for ax, b in zip(axes, beta):
                alpha[ax] = b
            vals.append(self[alpha])
        return MomentVector(
            tuple(self.coords[a] for a in axes), degree, np.array(vals), self.box.sub(axes), dict(self.meta)
        )

    def __eq__(self, other):
        if not isinstance(other, MomentVector):
            return NotImplemented
        return (
            self.coords == other.coords
            and self.degree == other.degree
            and np.array_equal(self.values, other.values)
            and self.box == other.box
        )

    __hash__ = None


def moments_of_atoms(points, weights, degree: int, coords, box: Box) -> MomentVector:
    """Moment vector of the atomic measure ``sum_k weights[k] * delta(points[k])``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = enumerate_indices(points.shape[1], degree)
    vals = monomial_matrix(points, idx) @ np.asarray(weights, dtype=float)
    return MomentVector(tuple(coords), degree, vals, box)


def _transform_matrix(amap: AffineMap, q: int, d: int) -> np.ndarray:
    # row alpha: coefficients of prod_i (a_i z_i + b_i)^alpha_i over monomials z^beta
    idx = enumerate_indices(q, d)
    pos = {a: k for k, a in enumerate(idx)}
    T = np.zeros((len(idx), len(idx)))
    a, b = amap.scale, amap.offset
    per_axis = []
    for i in range(q):
        # coef[p][k] = C(p, k) a^k b^(p-k)
        coef = np.zeros((d + 1, d + 1))
        for p in range(d + 1):
            for k in range(p + 1):
                coef[p, k] = comb(p, k) * a[i] ** k * b[i] ** (p - k)
        per_axis.append(coef)
    for r, alpha in enumerate(idx):
        for beta in np.ndindex(*[ai + 1 for ai in alpha]):
            c = 1.0
            for i in range(q):
                c *= per_axis[i][alpha[i], beta[i]]
            if c != 0.0:
                T[r, pos[tuple(beta)]] += c
    return T


def rescale_moments(y: MomentVector, amap: AffineMap) -> MomentVector:
    """Moments of the pushforward of ``y``'s measure under ``amap``.

    Uses the multinomial expansion of ``(a z + b)^alpha``; the domain box is
    mapped along with the moments.
    """
    if amap.dim != y.q:
        raise ValueError(f"map dimension {amap.dim} does not match moment dimension {y.q}")
    T = _transform_matrix(amap, y.q, y.degree)
    return MomentVector(y.coords, y.degree, T @ y.values, amap.apply_box(y.box), dict(y.meta))
