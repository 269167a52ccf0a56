"""Local refinement by single shooting and the global-optimality test.

Controls are piecewise constant on ``N`` equal segments of the horizon; for
free final time the horizon length is an extra decision variable and the
segments stretch with it. Terminal and path constraints enter through a
quadratic penalty whose weight grows tenfold per outer round, while the
control box is enforced exactly by the bound-constrained quasi-Newton
solver (L-BFGS-B with forward-difference gradients).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .oracle import OcpProblem, SampledProcess
from .polynomial import PolynomialMap
from .reconstruct import ReconstructedProcess

DEFAULT_SEGMENTS = 40
DEFAULT_STEPS = 20


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ControlParameterization:
    controls: np.ndarray  # (N, m)
    duration: float

    def __post_init__(self):
        u = np.asarray(self.controls, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if len(u) < 1:
            raise ValueError("need at least one segment")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "controls", u)

    @property
    def segments(self) -> int:
        return len(self.controls)

    def clamp(self, prob: OcpProblem) -> "ControlParameterization":
        if not prob.m:
            return self
        return ControlParameterization(np.clip(self.controls, prob.u_box.lo, prob.u_box.hi), self.duration)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    cost: float

    def process(self) -> SampledProcess:
        return SampledProcess(self.times, self.states, self.controls)


@dataclass
class RefinementResult:
    parameterization: ControlParameterization
    trajectory: Trajectory
    cost: float
    terminal_violation: float
    path_violation: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list, repr=False)


def _rollout(
    prob: OcpProblem,
    U: np.ndarray,
    T: np.ndarray,
    steps: int,
    record: bool = False,
    margin: float = 0.0,
    start: np.ndarray | None = None,
):
    """Integrate a batch of parameterizations at once.

    Returns terminal states, running costs, integrated squared path
    violations, the worst pointwise path violation, the alive mask and, with
    ``record``, the full sample arrays of the first batch member.

    ``start`` (nondecreasing, ``start[0] == 0``) lets member ``b`` copy the
    state of member 0 at the beginning of segment ``start[b]`` instead of
    integrating from t0; valid when both agree on all earlier segments and
    on the duration. Finite-difference batches use this to skip shared work.
    """
    B, N, m = U.shape
    n = prob.n
    if start is None:
        start = np.zeros(B, dtype=int)
    # augmented state: columns 0..n-1 are x, column n the running cost
    X = np.zeros((B, n + 1))
    X[:, :n] = prob.x_init
    pen = np.zeros(B)
    worst = np.zeros(B)
    t = np.full(B, float(prob.t_initial))
    dt = T / (N * steps)
    lo, hi = prob.x_box.lo, prob.x_box.hi
    halfw = 0.5 * prob.x_box.width
    limit = 1e3 * prob.x_box.diameter
    fh = PolynomialMap(tuple(prob.f) + (prob.h,))
    gmap = PolynomialMap(prob.constraints) if prob.constraints else None
    alive = np.ones(B, dtype=bool)
    zbuf = np.empty((B, 1 + m + n))

    def fill(tt, xx, uu):
        z = zbuf[: len(tt)]
        z[:, 0] = tt
        z[:, 1 : 1 + m] = uu
        z[:, 1 + m :] = xx[:, :n]
        return z

    def violation(tt, xx, uu):
        # scaled pointwise violation of state box and path constraints
        xx = xx[:, :n]
        v = np.maximum(np.max(np.maximum(lo - xx, xx - hi) / halfw, axis=1), 0.0)
        if gmap is not None:
            v = np.maximum(v, np.max(margin - gmap(fill(tt, xx, uu)), axis=1))
        return v

    if record:
        rec_t = [t[0]]
        rec_x = [X[0, :n].copy()]
        rec_u = []
    v = violation(t, X, U[:, 0, :])
    worst = np.maximum(worst, v)
    # exploding members are caught once per segment; silence the overflow on the way
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            nk = int(np.searchsorted(start, k, side="right"))
            join = np.flatnonzero(start[:nk] == k)
            if k > 0 and len(join):
                for arr in (X, pen, worst, t, v):
                    arr[join] = arr[0]
                alive[join] = alive[0]
            u = U[:nk, k, :]
            Xs, ps, ws, ts, vs, h = X[:nk], pen[:nk], worst[:nk], t[:nk], v[:nk], dt[:nk]
            hc = h[:, None]
            hh, hc2, hc6 = 0.5 * h, 0.5 * hc, hc / 6.0
            for _ in range(steps):
                k1 = fh(fill(ts, Xs, u))
                tm = ts + hh
                k2 = fh(fill(tm, Xs + hc2 * k1, u))
                k3 = fh(fill(tm, Xs + hc2 * k2, u))
                ts += h
                k4 = fh(fill(ts, Xs + hc * k3, u))
                Xs += hc6 * (k1 + 2.0 * (k2 + k3) + k4)
                v_new = violation(ts, Xs, u)
                ps += hh * (vs ** 2 + v_new ** 2)
                vs[:] = v_new
                np.maximum(ws, vs, out=ws)
                if record:
                    rec_t.append(ts[0])
                    rec_x.append(Xs[0, :n].copy())
                    rec_u.append(u[0].copy())
            xs = Xs[:, :n]
            bad = ~np.all(np.isfinite(xs), axis=1) | (np.abs(xs).max(axis=1) > limit)
            if np.any(bad):
                alive[:nk] &= ~bad
                Xs[bad] = 0.0
    x, J = X[:, :n], X[:, n].copy()
    J[~alive] = np.inf
    out = (x, J, pen, worst, alive)
    if record:
        rec_u.append(rec_u[-1])
        return out + ((np.array(rec_t), np.array(rec_x), np.array(rec_u)),)
    return out


def simulate(prob: OcpProblem, ctrl: ControlParameterization, steps_per_segment: int = DEFAULT_STEPS) -> Trajectory:
    """Fixed-step RK4 forward simulation with the running cost as an extra state."""
    if steps_per_segment < 20:
        raise ValueError("need at least 20 RK4 steps per segment")
    U = ctrl.controls.reshape(1, ctrl.segments, -1)
    if U.shape[2] != prob.m:
        raise ValueError(f"parameterization has {U.shape[2]} controls, problem has {prob.m}")
    _, J, _, _, alive, (tt, xx, uu) = _rollout(prob, U, np.array([ctrl.duration]), steps_per_segment, record=True)
    if not alive[0]:
        raise SimulationError(f"state exceeded 1e3 x diameter of the state box (problem {prob.name})")
    return Trajectory(tt, xx, uu, float(J[0]))


def _initial_parameterization(prob: OcpProblem, init, N: int) -> ControlParameterization:
    proc = init.process if isinstance(init, ReconstructedProcess) else init
    if prob.free_time:
        T = proc.duration
    else:
        T = prob.t_final - prob.t_initial
    T = float(np.clip(T, 1e-6, prob.t_box.width[0]))
    mids = prob.t_initial + (np.arange(N) + 0.5) * T / N
    if prob.m and proc.m == prob.m:
        U = np.column_stack([np.interp(mids, proc.times, proc.controls[:, j]) for j in range(prob.m)])
    else:
        U = np.zeros((N, prob.m))
    return ControlParameterization(U, T).clamp(prob)


def local_optimize(
    prob: OcpProblem,
    init,
    N: int = DEFAULT_SEGMENTS,
    feas_tol: float = 1e-4,
    opt_tol: float = 1e-12,
    steps_per_segment: int = DEFAULT_STEPS,
    rounds: int = 5,
    rho0: float = 100.0,
    maxiter: int = 300,
) -> RefinementResult:
    """Hot-started single-shooting refinement of ``init``.

    ``init`` is a :class:`ReconstructedProcess`, a :class:`SampledProcess` or a
    :class:`ControlParameterization`. Minimizes cost plus
    ``rho * (|scaled terminal error|^2 + int path_violation^2 dt)`` for
    ``rho = rho0 * 10^k``, ``k < rounds``, each round warm-started from the
    last; the run is converged when the final iterate meets ``feas_tol``.
    """
    if isinstance(init, ControlParameterization):
        p0 = init.clamp(prob)
        if p0.segments != N:
            raise ValueError(f"initial parameterization has {p0.segments} segments, expected {N}")
    else:
        p0 = _initial_parameterization(prob, init, N)
    m = prob.m
    free = prob.free_time
    halfw = 0.5 * prob.x_box.width
    # aim inside path constraints so small residual violations stay feasible
    margin = 10.0 * feas_tol

    def batch_eval(Z, rho, start=None):
        # Z: (B, P)
        B = len(Z)
        U = Z[:, : N * m].reshape(B, N, m)
        T = Z[:, -1] if free else np.full(B, p0.duration)
        x, J, pen, _, alive = _rollout(prob, U, T, steps_per_segment, margin=margin, start=start)
        term = np.sum(((x - prob.x_final) / halfw) ** 2, axis=1)
        val = J + rho * (term + pen)
        val[~alive] = np.inf
        return val

    z0 = p0.controls.reshape(-1)
    if free:
        z0 = np.append(z0, p0.duration)
    bounds = []
    if m:
        bounds += [(lo, hi) for _ in range(N) for lo, hi in zip(prob.u_box.lo, prob.u_box.hi)]
    if free:
        bounds.append((1e-3 * prob.t_box.width[0], prob.t_box.width[0]))
    lb = np.array([b[0] for b in bounds])
    ub = np.array([b[1] for b in bounds])

    # perturbation order for the difference batch: duration first (it
    # changes every segment), then controls by segment so each member can
    # reuse the unperturbed trajectory up to its segment
    P = len(z0)
    order = np.concatenate([[P - 1], np.arange(N * m)]) if free else np.arange(N * m)
    start = np.concatenate([[0], np.where(order >= N * m, 0, order // max(m, 1))])

    def fun_and_grad(z, rho):
        hstep = 1e-7 * np.maximum(1.0, np.abs(z))
        sign = np.where(z + hstep > ub, -1.0, 1.0)
        Z = np.tile(z, (P + 1, 1))
        Z[1 + np.arange(P), order] += (sign * hstep)[order]
        vals = batch_eval(Z, rho, start)
        if not np.isfinite(vals[0]):
            return 1e30, np.zeros(P)
        grad = np.empty(P)
        grad[order] = (vals[1:] - vals[0]) / (sign * hstep)[order]
        grad[~np.isfinite(grad)] = 0.0
        return float(vals[0]), grad

    z = z0.copy()
    history = []
    iters = 0
    ok = True
    for r in range(rounds):
        rho = rho0 * 10.0 ** r
        res = minimize(
            fun_and_grad,
            z,
            args=(rho,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": maxiter, "ftol": opt_tol, "gtol": 1e-10, "maxcor": 20},
        )
        z = np.clip(res.x, lb, ub)
        iters += int(res.nit)
        ok = ok and res.status in (0, 2)
        history.append({"rho": rho, "value": float(res.fun), "nit": int(res.nit), "status": int(res.status)})

    U = z[: N * m].reshape(N, m)
    T = float(z[-1]) if free else p0.duration
    ctrl = ControlParameterization(U, T)
    traj = simulate(prob, ctrl, steps_per_segment)
    term_v = float(np.max(np.abs(traj.states[-1] - prob.x_final) / halfw))
    path_v = path_violation(prob, traj)
    converged = term_v <= feas_tol and path_v <= feas_tol
    return RefinementResult(ctrl, traj, traj.cost, term_v, path_v, converged, iters, history)


def path_violation(prob: OcpProblem, traj: Trajectory) -> float:
    """Worst scaled state-box or path-constraint violation over the samples."""
    halfw = 0.5 * prob.x_box.width
    v = np.maximum(prob.x_box.lo - traj.states, traj.states - prob.x_box.hi) / halfw
    worst = max(float(v.max()), 0.0)
    if prob.constraints:
        z = np.column_stack([traj.times, traj.controls, traj.states])
        for gi in prob.constraints:
            worst = max(worst, float(np.max(-gi(z))))
    return max(worst, 0.0)


def certify_global(local_cost: float, relaxation_cost: float, tol: float = 1e-2) -> bool:
    """True when an admissible cost matches a relaxation lower bound within ``tol``.

    The tolerance is relative to ``max(1, |relaxation_cost|)``. A local cost
    clearly below the bound means the inputs are inconsistent and triggers a
    ``RuntimeWarning``.
    """
    if not (np.isfinite(local_cost) and np.isfinite(relaxation_cost)):
        raise ValueError("costs must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    scale = max(1.0, abs(relaxation_cost))
    gap = local_cost - relaxation_cost
    if gap < -tol * scale:
        warnings.warn(
            f"local cost {local_cost:g} is below the relaxation lower bound {relaxation_cost:g}", RuntimeWarning
        )
    return bool(gap <= tol * scale)
