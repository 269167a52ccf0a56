"""Forward moment generation: occupation measures of sampled processes and
time-averaged invariant measures, plus the linear-constraint diagnostic that
every occupation measure of an admissible process satisfies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .moments import Box, MomentVector, enumerate_indices, monomial_matrix
from .polynomial import Polynomial, PolynomialMap

BOX_SLACK = 1e-9


class TrajectoryEscapeError(RuntimeError):
    pass


def coordinate_names(n: int, m: int, time: bool = True) -> tuple[str, ...]:
    names = ("t",) if time else ()
    return names + tuple(f"u{k + 1}" for k in range(m)) + tuple(f"x{k + 1}" for k in range(n))


@dataclass(frozen=True)
class OcpProblem:
    """Polynomial optimal control problem.

    Every polynomial is over the variables (t, u_1..u_m, x_1..x_n). ``t_final``
    is ``None`` for free final time; ``t_box`` then bounds the admissible
    horizon. ``constraints`` are polynomials required to stay >= 0.
    """

    n: int
    m: int
    f: tuple[Polynomial, ...]
    h: Polynomial
    t_initial: float
    t_final: float | None
    x_init: np.ndarray
    x_final: np.ndarray
    x_box: Box
    u_box: Box | None
    t_box: Box
    constraints: tuple[Polynomial, ...] = ()
    name: str = "ocp"

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(self.f))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "x_init", np.asarray(self.x_init, dtype=float).reshape(-1))
        object.__setattr__(self, "x_final", np.asarray(self.x_final, dtype=float).reshape(-1))
        q = 1 + self.m + self.n
        if len(self.f) != self.n:
            raise ValueError(f"need {self.n} dynamics polynomials, got {len(self.f)}")
        for p in (*self.f, self.h, *self.constraints):
            if p.nvars != q:
                raise ValueError(f"polynomial over {p.nvars} variables; problem has {q}")
        if self.x_box.dim != self.n or self.t_box.dim != 1:
            raise ValueError("box dimensions do not match the problem")
        if self.m and (self.u_box is None or self.u_box.dim != self.m):
            raise ValueError("control box missing or of wrong dimension")
        for label, x in (("initial", self.x_init), ("final", self.x_final)):
            if x.shape != (self.n,) or not self.x_box.contains(x, BOX_SLACK)[0]:
                raise ValueError(f"{label} state {x} is not inside the state box")

    @property
    def q(self) -> int:
        return 1 + self.m + self.n

    @property
    def coords(self) -> tuple[str, ...]:
        return coordinate_names(self.n, self.m)

    @property
    def free_time(self) -> bool:
        return self.t_final is None

    @property
    def box(self) -> Box:
        parts_lo = [self.t_box.lo]
        parts_hi = [self.t_box.hi]
        if self.m:
            parts_lo.append(self.u_box.lo)
            parts_hi.append(self.u_box.hi)
        parts_lo.append(self.x_box.lo)
        parts_hi.append(self.x_box.hi)
        return Box(np.concatenate(parts_lo), np.concatenate(parts_hi))

    @property
    def state_axes(self) -> list[int]:
        return list(range(1 + self.m, self.q))

    @property
    def control_axes(self) -> list[int]:
        return list(range(1, 1 + self.m))


@dataclass(frozen=True)
class SampledProcess:
    """Time samples of a state/control pair.

    States are interpolated linearly between samples; ``controls[k]`` holds on
    ``[times[k], times[k+1])`` (the last control row is only bookkeeping).
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        x = np.asarray(self.states, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        u = self.controls
        u = np.zeros((len(t), 0)) if u is None else np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if len(t) < 2:
            raise ValueError("need >= 2 samples")
        if len(x) != len(t) or len(u) != len(t):
            raise ValueError("times, states and controls must have equal length")
        if not np.all(np.diff(t) > 0):
            raise ValueError("sample times must be strictly increasing")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise ValueError("non-finite samples")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "controls", u)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.controls.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def validate(self, prob: OcpProblem, slack: float = BOX_SLACK) -> None:
        """Raise ``ValueError`` if any sample leaves the problem boxes."""
        if (self.n, self.m) != (prob.n, prob.m):
            raise ValueError(f"process dims {(self.n, self.m)} do not match problem {(prob.n, prob.m)}")
        if not prob.t_box.contains(self.times[:, None], slack).all():
            raise ValueError("sample times leave the time box")
        if not prob.x_box.contains(self.states, slack).all():
            bad = np.flatnonzero(~prob.x_box.contains(self.states, slack))[0]
            raise ValueError(f"state sample {bad} at t={self.times[bad]:g} leaves the state box")
        if prob.m and not prob.u_box.contains(self.controls, slack).all():
            bad = np.flatnonzero(~prob.u_box.contains(self.controls, slack))[0]
            raise ValueError(f"control sample {bad} at t={self.times[bad]:g} leaves the control box")

    def points(self) -> np.ndarray:
        """Samples as rows of (t, u, x)."""
        return np.column_stack([self.times, self.controls, self.states])


def _bounding_box(points: np.ndarray) -> Box:
    lo, hi = points.min(axis=0), points.max(axis=0)
    pad = np.where(hi > lo, 0.0, 0.5)
    return Box(lo - pad, hi + pad)


def _quadrature_points(proc: SampledProcess, nodes: int, with_time: bool = True):
    s, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    t0, h = proc.times[:-1], np.diff(proc.times)
    x0, dx = proc.states[:-1], np.diff(proc.states, axis=0)
    u = proc.controls[:-1]
    # layout: segment-major, node-minor
    tt = (t0[:, None] + s[None, :] * h[:, None]).reshape(-1)
    xx = (x0[:, None, :] + s[None, :, None] * dx[:, None, :]).reshape(-1, proc.n)
    uu = np.repeat(u, nodes, axis=0)
    ww = (h[:, None] * w[None, :]).reshape(-1)
    cols = ([tt[:, None]] if with_time else []) + [uu, xx]
    return np.hstack(cols), ww


def _integrate_monomials(points: np.ndarray, weights: np.ndarray, degree: int, chunk: int = 8192) -> np.ndarray:
    idx = enumerate_indices(points.shape[1], degree)
    out = np.zeros(len(idx))
    for start in range(0, len(points), chunk):
        sl = slice(start, start + chunk)
        out += monomial_matrix(points[sl], idx) @ weights[sl]
    return out


def occupation_moments(
    proc: SampledProcess, degree: int, nodes: int = 8, box: Box | None = None, meta: dict | None = None
) -> MomentVector:
    """Moments ``int t^i u^j x^k dt`` of the occupation measure of ``proc``.

    Composite Gauss-Legendre with ``nodes`` points per sample interval; exact
    for the piecewise-linear/piecewise-constant interpolant whenever
    ``degree <= 2 * nodes - 1``.
    """
    if degree < 2 or degree % 2:
        raise ValueError(f"degree must be even and >= 2, got {degree}")
    pts, wts = _quadrature_points(proc, nodes)
    vals = _integrate_monomials(pts, wts, degree)
    if box is None:
        box = _bounding_box(proc.points())
    info = {"source": "oracle"}
    info.update(meta or {})
    return MomentVector(coordinate_names(proc.n, proc.m), degree, vals, box, info)


def _as_vector_field(dynamics) -> Callable[[np.ndarray], np.ndarray]:
    if callable(dynamics):
        return dynamics
    fmap = PolynomialMap(dynamics)

    def field(x):
        x = np.asarray(x, dtype=float)
        return fmap(x[None, :])[0] if x.ndim == 1 else fmap(x)

    return field


def _hermite_quadrature_points(t: np.ndarray, x: np.ndarray, dx: np.ndarray, nodes: int):
    """Gauss nodes on the cubic Hermite interpolant through (x, dx) samples."""
    s, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    h = np.diff(t)[:, None, None]
    ss = s[None, :, None]
    h00 = 2 * ss**3 - 3 * ss**2 + 1
    h10 = ss**3 - 2 * ss**2 + ss
    h01 = -2 * ss**3 + 3 * ss**2
    h11 = ss**3 - ss**2
    p = h00 * x[:-1, None] + h10 * h * dx[:-1, None] + h01 * x[1:, None] + h11 * h * dx[1:, None]
    ww = (h[:, :, 0] * w[None, :]).reshape(-1)
    return p.reshape(-1, x.shape[1]), ww


def rk4_trajectory(field, x0, dt: float, nsteps: int, box: Box | None = None) -> np.ndarray:
    """Fixed-step RK4 samples of ``x' = field(x)``, shape (nsteps + 1, n)."""
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((nsteps + 1, len(x)))
    out[0] = x
    for k in range(nsteps):
        k1 = field(x)
        k2 = field(x + 0.5 * dt * k1)
        k3 = field(x + 0.5 * dt * k2)
        k4 = field(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if box is not None and not box.contains(x, BOX_SLACK)[0]:
            raise TrajectoryEscapeError(f"trajectory left the box at t={(k + 1) * dt:g}: x={x}")
        out[k + 1] = x
    return out


def _upward_crossings(t: np.ndarray, x: np.ndarray, level: float):
    a, b = x[:-1] - level, x[1:] - level
    k = np.flatnonzero((a < 0) & (b >= 0))
    frac = a[k] / (a[k] - b[k])
    return k, frac


def invariant_moments(
    dynamics,
    x0,
    horizon: float,
    degree: int,
    box: Box,
    burn_in: float | None = None,
    dt: float = 0.005,
    nodes: int = 8,
    whole_periods: bool = True,
) -> MomentVector:
    """Normalized time-average moments of a long trajectory after burn-in.

    ``dynamics`` is a callable ``x -> x'`` or a sequence of polynomials in the
    states. With ``whole_periods`` the averaging window is trimmed to lie
    between the first and last upward crossings of the first state through
    its window mean, which removes the boundary term of the averaged
    invariance identity for periodic attractors. Without recurrent crossings
    the whole post-burn-in window is used.
    """
    if burn_in is None:
        burn_in = 0.2 * horizon
    if not horizon > burn_in > 0:
        raise ValueError("need horizon > burn_in > 0")
    field = _as_vector_field(dynamics)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    nsteps = int(np.ceil(horizon / dt))
    traj = rk4_trajectory(field, x0, dt, nsteps, box)
    t = dt * np.arange(nsteps + 1)
    keep = t >= burn_in
    t, traj = t[keep], traj[keep]

    if whole_periods:
        k, frac = _upward_crossings(t, traj[:, 0], traj[:, 0].mean())
        if len(k) >= 2:
            ta = t[k[0]] + frac[0] * dt
            tb = t[k[-1]] + frac[-1] * dt
            xa = traj[k[0]] + frac[0] * (traj[k[0] + 1] - traj[k[0]])
            xb = traj[k[-1]] + frac[-1] * (traj[k[-1] + 1] - traj[k[-1]])
            inner = slice(k[0] + 1, k[-1] + 1)
            t = np.concatenate([[ta], t[inner], [tb]])
            traj = np.vstack([xa, traj[inner], xb])
            # drop a sample that coincides with an inserted endpoint
            good = np.concatenate([[True], np.diff(t) > 1e-12 * dt])
            t, traj = t[good], traj[good]

    pts, wts = _hermite_quadrature_points(t, traj, field(traj), nodes)
    vals = _integrate_monomials(pts, wts, degree) / wts.sum()
    vals[0] = 1.0
    return MomentVector(coordinate_names(len(x0), 0, time=False), degree, vals, box, {"source": "oracle"})


def _test_monomials(prob: OcpProblem, d: int):
    # v(t, x) as polynomials over the full (t, u, x) variable list
    axes = [0] + prob.state_axes
    for beta in enumerate_indices(len(axes), d):
        alpha = [0] * prob.q
        for ax, b in zip(axes, beta):
            alpha[ax] = b
        yield Polynomial({tuple(alpha): 1.0}, prob.q)


def _generator(v: Polynomial, f: Sequence[Polynomial], time_axis: int | None, state_axes) -> Polynomial:
    out = Polynomial({}, v.nvars)
    if time_axis is not None:
        out = out + v.derivative(time_axis)
    for ax, fj in zip(state_axes, f):
        out = out + v.derivative(ax) * fj
    return out


def _integrate_poly(y: MomentVector, p: Polynomial) -> float:
    return sum(c * y[a] for a, c in p.terms.items())


def adjoint_residuals(y: MomentVector, prob: OcpProblem, test_degree: int) -> np.ndarray:
    """Residual of the linear constraint for every test monomial of degree <= ``test_degree``."""
    deg_f = max((p.degree for p in prob.f), default=0)
    if test_degree + max(1, deg_f) > y.degree:
        raise ValueError(
            f"degree budget exceeded: test degree {test_degree} + max(1, deg f = {deg_f}) > {y.degree}"
        )
    if y.coords != prob.coords:
        raise ValueError(f"moment coordinates {y.coords} do not match problem {prob.coords}")
    tf = prob.t_initial + y.mass if prob.free_time else prob.t_final
    z_i = np.concatenate([[prob.t_initial], np.zeros(prob.m), prob.x_init])
    z_f = np.concatenate([[tf], np.zeros(prob.m), prob.x_final])
    res = []
    for v in _test_monomials(prob, test_degree):
        boundary = float(v(z_f) - v(z_i))
        lv = _generator(v, prob.f, 0, prob.state_axes)
        res.append(boundary - _integrate_poly(y, lv))
    return np.array(res)


def check_adjoint_identity(y: MomentVector, prob: OcpProblem, test_degree: int) -> float:
    """Largest violation of ``[v]_{t_i}^{t_f} = <dv/dt + dv/dx . f, mu>`` over test monomials."""
    return float(np.max(np.abs(adjoint_residuals(y, prob, test_degree))))


def invariance_residual(y: MomentVector, dynamics: Sequence[Polynomial], test_degree: int) -> float:
    """Largest ``|<dv/dx . f, mu>|`` over monomials ``v`` in the states.

    ``dynamics`` are polynomials over the state variables only.
    """
    deg_f = max(p.degree for p in dynamics)
    if test_degree + max(1, deg_f) > y.degree:
        raise ValueError(f"degree budget exceeded: {test_degree} + {max(1, deg_f)} > {y.degree}")
    worst = 0.0
    axes = list(range(y.q))
    for beta in enumerate_indices(y.q, test_degree):
        v = Polynomial({beta: 1.0}, y.q)
        lv = _generator(v, dynamics, None, axes)
        worst = max(worst, abs(_integrate_poly(y, lv)))
    return worst
