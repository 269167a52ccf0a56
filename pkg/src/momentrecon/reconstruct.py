"""Atomic approximation of measures from truncated moments and the
coordinate-by-coordinate recovery of time series from the atoms.

All fits are carried out after mapping the grid box onto [-1, 1]^k; the
moments are transformed accordingly and atoms are reported in the original
coordinates.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lp import LpStandardForm, solve_ipm
from .moments import AffineMap, Box, MomentVector, enumerate_indices, monomial_matrix, rescale_moments
from .oracle import SampledProcess

MAX_GRID_POINTS = 1_000_000
DEFAULT_THRESHOLD = 1e-3
MULTIMODAL_SPREAD = 0.25


class FitError(RuntimeError):
    """The fitting LP did not reach optimality."""


class SupportError(ValueError):
    """No atom survives thresholding."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on a sub-box of the ambient coordinates.

    ``axes`` are positions in the ambient ordering (t, u.., x..); ``points``
    has one row per grid point with columns ordered like ``axes``.
    """

    axes: tuple[int, ...]
    names: tuple[str, ...]
    box: Box
    shape: tuple[int, ...]
    points: np.ndarray
    ambient_dim: int

    @property
    def resolution(self) -> np.ndarray:
        """Per-coordinate covering radius (half the spacing)."""
        return 0.5 * self.box.width / (np.array(self.shape) - 1)

    @property
    def spacing(self) -> np.ndarray:
        return self.box.width / (np.array(self.shape) - 1)

    def nodes(self, k: int) -> np.ndarray:
        return np.linspace(self.box.lo[k], self.box.hi[k], self.shape[k])

    def __len__(self):
        return len(self.points)


def build_grid(box: Box, coords: Sequence[int] | None = None, points_per_axis=101, names=None) -> Grid:
    """Uniform grid with both endpoints on every axis of ``box`` restricted to ``coords``.

    ``points_per_axis`` is an int or one count per selected coordinate.
    """
    coords = tuple(range(box.dim)) if coords is None else tuple(coords)
    if len(set(coords)) != len(coords) or not coords:
        raise ValueError(f"invalid coordinate subset {coords}")
    sub = box.sub(coords)
    counts = np.broadcast_to(np.asarray(points_per_axis, dtype=int), (len(coords),))
    if np.any(counts < 2):
        raise ValueError("need at least 2 points per axis")
    total = int(np.prod(counts.astype(float)))
    if total > MAX_GRID_POINTS:
        raise ValueError(f"grid of {total} points exceeds the limit of {MAX_GRID_POINTS}")
    axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(sub.lo, sub.hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([g.reshape(-1) for g in mesh])
    if names is None:
        names = tuple(f"z{c}" for c in coords)
    return Grid(coords, tuple(names), sub, tuple(int(k) for k in counts), pts, box.dim)


def _local_indices(grid: Grid, indices) -> list[tuple[int, ...]]:
    out = []
    k = len(grid.axes)
    for alpha in indices:
        alpha = tuple(alpha)
        if len(alpha) == k:
            out.append(alpha)
            continue
        if len(alpha) != grid.ambient_dim:
            raise ValueError(f"index {alpha} has neither grid ({k}) nor ambient ({grid.ambient_dim}) length")
        for pos, a in enumerate(alpha):
            if a and pos not in grid.axes:
                raise ValueError(f"index {alpha} has a nonzero power on coordinate {pos}, which the grid excludes")
        out.append(tuple(alpha[a] for a in grid.axes))
    return out


def build_moment_matrix(grid: Grid, indices) -> np.ndarray:
    """``A[k, j] = z_j ** alpha_k`` for grid points ``z_j``."""
    return monomial_matrix(grid.points, _local_indices(grid, indices))


@dataclass(frozen=True)
class AtomicMeasure:
    """Nonnegative weights on points of a grid."""

    grid: Grid
    points: np.ndarray
    weights: np.ndarray
    fit_error: float
    discarded_mass: float = 0.0
    lp_info: dict = field(default_factory=dict, compare=False)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def names(self) -> tuple[str, ...]:
        return self.grid.names

    def __len__(self):
        return len(self.weights)


def _minmax_lp(A: np.ndarray, b: np.ndarray) -> LpStandardForm:
    # variables [w (N), lam, s_plus (M), s_minus (M)]
    #   A w + lam - s_plus  = b   (b - A w <= lam)
    #   A w - lam + s_minus = b   (A w - b <= lam)
    M, N = A.shape
    I = np.eye(M)
    one = np.ones((M, 1))
    Aeq = np.block([[A, one, -I, np.zeros((M, M))], [A, -one, np.zeros((M, M)), I]])
    c = np.zeros(N + 1 + 2 * M)
    c[N] = 1.0
    return LpStandardForm(c, Aeq, np.concatenate([b, b]))


def fit_atomic(
    y: MomentVector, grid: Grid, rescale: bool = True, tol: float = 1e-8, max_iter: int = 200
) -> AtomicMeasure:
    """Solve ``min_{w >= 0} ||b - A w||_inf`` over the grid's atoms.

    ``y`` may carry more coordinates than the grid; only moments with powers
    on the grid's axes are used. With ``rescale`` the problem is posed on
    [-1, 1]^k (the reported fit error then refers to the rescaled moments).
    """
    if len(grid) == 0:
        raise ValueError("empty grid")
    ym = y.marginal(grid.axes) if len(grid.axes) != y.q or list(grid.axes) != list(range(y.q)) else y
    pts = grid.points
    if rescale:
        amap = AffineMap.to_unit(grid.box)
        ym = rescale_moments(ym, amap)
        pts = amap(pts)
    A = monomial_matrix(pts, ym.indices)
    b = ym.values
    sol = solve_ipm(_minmax_lp(A, b), tol=tol, max_iter=max_iter)
    info = {"status": sol.status, "iterations": sol.iterations, "residuals": sol.residuals}
    if not sol.optimal:
        raise FitError(f"fitting LP ended with status {sol.status} after {sol.iterations} iterations: {info}")
    N = len(grid)
    w = np.maximum(sol.x[:N], 0.0)
    err = float(np.max(np.abs(b - A @ w)))
    return AtomicMeasure(grid, grid.points, w, err, 0.0, info)


def extract_support(mu: AtomicMeasure, rel_threshold: float = DEFAULT_THRESHOLD) -> AtomicMeasure:
    """Keep atoms with weight >= ``rel_threshold * max weight``.

    The result records the dropped mass fraction in ``discarded_mass``.
    """
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    wmax = mu.weights.max() if len(mu.weights) else 0.0
    if not wmax > 0:
        raise SupportError("all weights are zero; the fit carries no information")
    keep = mu.weights >= rel_threshold * wmax
    total = mu.weights.sum()
    lost = float(mu.weights[~keep].sum() / total)
    return AtomicMeasure(mu.grid, mu.points[keep], mu.weights[keep], mu.fit_error, lost, mu.lp_info)


def marginal_indices(full_dims: tuple[int, int], coord: int, degree: int) -> list[tuple[int, ...]]:
    """Ambient multi-indices with powers only on time and ``coord``.

    ``full_dims`` is (n, m); coordinates are numbered t=0, u=1..m, x=m+1..m+n.
    """
    n, m = full_dims
    q = 1 + m + n
    if coord == 0:
        raise ValueError("time is always part of the marginal; pick a state or control coordinate")
    if not 0 < coord < q:
        raise ValueError(f"coordinate {coord} out of range for q={q}")
    out = []
    for i, j in enumerate_indices(2, degree):
        alpha = [0] * q
        alpha[0], alpha[coord] = i, j
        out.append(tuple(alpha))
    return out


@dataclass(frozen=True)
class CoordinateSeries:
    """Way-points ``(time, value, weight)`` for one coordinate, sorted by time."""

    coord: str
    times: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    fit_error: float = 0.0
    discarded_mass: float = 0.0
    multimodal_times: tuple[float, ...] = ()
    atoms: "AtomicMeasure | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        order = np.argsort(self.times, kind="stable")
        for name in ("times", "values", "weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float)[order])

    def __len__(self):
        return len(self.times)


def _aggregate(times, values, weights):
    ut, inv = np.unique(times, return_inverse=True)
    w = np.bincount(inv, weights=weights)
    v = np.bincount(inv, weights=weights * values) / w
    return ut, v, w


def reconstruct_coordinate(
    y: MomentVector,
    coord: int,
    grid2d: Grid,
    rel_threshold: float = DEFAULT_THRESHOLD,
    spread_limit: float = MULTIMODAL_SPREAD,
) -> CoordinateSeries:
    """Fit atoms to the (time, coord) marginal and collapse them to way-points.

    Atoms sharing a time node are averaged (weight-weighted); nodes whose
    atoms spread over more than ``spread_limit`` of the coordinate range are
    reported as multi-modal instead.
    """
    if tuple(grid2d.axes) != (0, coord):
        raise ValueError(f"grid spans axes {grid2d.axes}, expected (0, {coord})")
    mu = fit_atomic(y, grid2d)
    sup = extract_support(mu, rel_threshold)
    t, v, w = sup.points[:, 0], sup.points[:, 1], sup.weights
    width = grid2d.box.width[1]
    ut, inv = np.unique(t, return_inverse=True)
    keep_t, keep_v, keep_w, flagged = [], [], [], []
    for k, tk in enumerate(ut):
        sel = inv == k
        vals, ws = v[sel], w[sel]
        if vals.max() - vals.min() > spread_limit * width:
            flagged.append(float(tk))
            continue
        keep_t.append(tk)
        keep_v.append(float(ws @ vals / ws.sum()))
        keep_w.append(float(ws.sum()))
    return CoordinateSeries(
        y.coords[coord],
        np.array(keep_t),
        np.array(keep_v),
        np.array(keep_w),
        mu.fit_error,
        sup.discarded_mass,
        tuple(flagged),
        sup,
    )


def dominant_profile(atoms: AtomicMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Per time node, the value of the heaviest atom (time on axis 0).

    Unlike the averaged series this stays meaningful in multi-modal cells,
    e.g. around the switch of a bang-bang control.
    """
    t, v, w = atoms.points[:, 0], atoms.points[:, 1], atoms.weights
    ut, inv = np.unique(t, return_inverse=True)
    best = np.empty(len(ut))
    for k in range(len(ut)):
        sel = np.flatnonzero(inv == k)
        best[k] = v[sel[np.argmax(w[sel])]]
    return ut, best


def switch_times(times, values, level: float = 0.0) -> np.ndarray:
    """Midpoints between consecutive samples on opposite sides of ``level``."""
    times, side = np.asarray(times, dtype=float), np.sign(np.asarray(values, dtype=float) - level)
    nz = side != 0
    times, side = times[nz], side[nz]
    k = np.flatnonzero(side[1:] != side[:-1])
    return 0.5 * (times[k] + times[k + 1])


@dataclass(frozen=True)
class ReconstructedProcess:
    states: dict
    controls: dict
    process: SampledProcess
    fit_errors: dict


def assemble_process(
    series: Sequence[CoordinateSeries],
    n_time_samples: int = 101,
    t_span: tuple[float, float] | None = None,
    control_box: Box | None = None,
) -> ReconstructedProcess:
    """Interpolate every series onto one uniform time grid.

    Series are told apart by name (``x*`` states, ``u*`` controls) and kept
    in name order. Without ``t_span`` the grid spans the state way-points.
    Duplicate way-point times are merged by weighted mean; values are then
    interpolated linearly and held constant beyond the ends.
    """
    if not series:
        raise ValueError("no series to assemble")
    states = {s.coord: s for s in series if s.coord.startswith("x")}
    controls = {s.coord: s for s in series if s.coord.startswith("u")}
    if not states:
        raise ValueError("need at least one state series")
    for s in series:
        if len(s) == 0:
            raise ValueError(f"series {s.coord} has no way-points")
    if t_span is None:
        t_span = (min(s.times.min() for s in states.values()), max(s.times.max() for s in states.values()))
    times = np.linspace(t_span[0], t_span[1], n_time_samples)

    def sample(s):
        ut, v, _ = _aggregate(s.times, s.values, s.weights)
        return np.interp(times, ut, v)

    xs = np.column_stack([sample(states[k]) for k in sorted(states, key=_coord_key)])
    if controls:
        us = np.column_stack([sample(controls[k]) for k in sorted(controls, key=_coord_key)])
        if control_box is not None:
            us = np.clip(us, control_box.lo, control_box.hi)
    else:
        us = None
    proc = SampledProcess(times, xs, us)
    errs = {s.coord: s.fit_error for s in series}
    return ReconstructedProcess(states, controls, proc, errs)


def _coord_key(name: str):
    return (name[0], int(name[1:]))


def polynomial_density_baseline(
    y: MomentVector, coord: int, density_degree: int, n_equations: int | None = None, cond_limit: float = 1e12
) -> np.ndarray:
    """Coefficients ``c`` of ``x_coord(t) ~ sum_k c_k t^k`` from first-order moments.

    Solves ``<t^i x> = sum_k c_k <t^(i+k)>`` for ``i < n_equations`` (default
    ``density_degree + 1``), in the least-squares sense when overdetermined.
    Badly conditioned systems fall back to a Tikhonov-regularized solve with a
    ``RuntimeWarning``.
    """
    if not y.has_time:
        raise ValueError("moments have no time coordinate")
    if not 0 < coord < y.q:
        raise ValueError(f"coordinate {coord} is not a state or control")
    d = density_degree
    neq = d + 1 if n_equations is None else n_equations
    if neq < d + 1:
        raise ValueError("need at least density_degree + 1 equations")

    def tmom(k):
        alpha = [0] * y.q
        alpha[0] = k
        return y[alpha]

    def xmom(i):
        alpha = [0] * y.q
        alpha[0], alpha[coord] = i, 1
        return y[alpha]

    try:
        H = np.array([[tmom(i + k) for k in range(d + 1)] for i in range(neq)])
        rhs = np.array([xmom(i) for i in range(neq)])
    except KeyError as exc:
        raise ValueError(f"moments of degree {y.degree} are too few for density degree {d}: {exc}") from None
    cond = np.linalg.cond(H)
    if np.isfinite(cond) and cond < cond_limit:
        return np.linalg.lstsq(H, rhs, rcond=None)[0]
    warnings.warn(f"density system is ill-conditioned (cond={cond:.3g}); using a regularized solve", RuntimeWarning)
    reg = 1e-12 * np.linalg.norm(H, 2) ** 2
    return np.linalg.solve(H.T @ H + reg * np.eye(d + 1), H.T @ rhs)
