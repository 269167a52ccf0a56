"""Dense linear programming in equality standard form.

    minimize c.x  subject to  A x = b,  x_j >= 0 (or free where lower = -inf)

:func:`solve_ipm` is a Mehrotra predictor-corrector interior-point method on
the normal equations; :func:`solve_simplex_reference` is a two-phase tableau
simplex with Bland's rule kept as an independent check on it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

SIMPLEX_SOFT_LIMIT = 500


@dataclass(frozen=True)
class LpStandardForm:
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        b = np.asarray(self.b_eq, dtype=float).reshape(-1)
        lower = np.zeros_like(c) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        if A.shape != (len(b), len(c)):
            raise ValueError(f"A_eq has shape {A.shape}, expected {(len(b), len(c))}")
        if lower.shape != c.shape:
            raise ValueError("lower bounds must match the number of variables")
        if not (np.all(lower == 0) | np.all(np.isin(lower, [0.0, -np.inf]))):
            raise ValueError("lower bounds must be 0 or -inf")
        for name, arr in (("c", c), ("A_eq", A), ("b_eq", b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_eq", A)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "lower", lower)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A_eq.shape

    def split_free(self):
        """Equivalent all-nonnegative LP and the map back to original variables."""
        free = np.flatnonzero(np.isneginf(self.lower))
        if not len(free):
            return self.c, self.A_eq, lambda z: z
        c = np.concatenate([self.c, -self.c[free]])
        A = np.hstack([self.A_eq, -self.A_eq[:, free]])
        n = len(self.c)

        def back(z):
            x = z[:n].copy()
            x[free] -= z[n:]
            return x

        return c, A, back

    def residuals(self, x, y) -> tuple[float, float, float]:
        """Relative (primal, dual, gap) residuals of a candidate primal-dual pair."""
        c, A, b = self.c, self.A_eq, self.b_eq
        rp = np.linalg.norm(A @ x - b) / (1.0 + np.linalg.norm(b))
        s = c - A.T @ y
        # dual feasibility: s >= 0 on bounded variables, s == 0 on free ones
        free = np.isneginf(self.lower)
        viol = np.where(free, np.abs(s), np.maximum(-s, 0.0))
        rd = np.linalg.norm(viol) / (1.0 + np.linalg.norm(c))
        px, dy = c @ x, b @ y
        gap = abs(px - dy) / (1.0 + abs(px))
        return float(rp), float(rd), float(gap)


@dataclass
class LpSolution:
    x: np.ndarray
    y: np.ndarray
    objective: float
    status: str
    iterations: int
    residuals: tuple[float, float, float]
    history: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def independent_rows(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal linearly independent subset of rows (pivoted QR)."""
    if A.shape[0] == 0:
        return np.arange(0)
    _, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if not len(d) or d[0] == 0:
        return np.arange(0)
    rank = int(np.sum(d > tol * d[0]))
    return np.sort(piv[:rank])


def _factor_normal(A: np.ndarray, d: np.ndarray):
    """Triangular factor R with R^T R = A diag(d) A^T, from a QR of sqrt(d) A^T.

    Working with the square-root factor keeps the conditioning of the
    Newton solves at sqrt(cond(A D A^T)).
    """
    R = sla.qr(np.sqrt(d)[:, None] * A.T, mode="r", check_finite=False)[0][: A.shape[0]]
    diag = np.abs(np.diag(R))
    floor = 1e-13 * max(diag.max(), 1e-300)
    small = diag < floor
    if np.any(small):
        R = R.copy()
        idx = np.flatnonzero(small)
        R[idx, idx] = np.where(R[idx, idx] < 0, -floor, floor)
    return R


def _solve_normal(R: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    z = sla.solve_triangular(R, rhs, trans="T", check_finite=False)
    return sla.solve_triangular(R, z, check_finite=False)


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def solve_ipm(lp: LpStandardForm, tol: float = 1e-8, max_iter: int = 200) -> LpSolution:
    """Mehrotra predictor-corrector on the normal equations ``A D A^T``.

    The starting point is Mehrotra's heuristic, so no initial guess is
    accepted. Optimality means all three relative residuals of
    :meth:`LpStandardForm.residuals` are below ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    c_full, A_full, back = lp.split_free()
    rows = independent_rows(A_full)
    A, b = A_full[rows], lp.b_eq[rows]
    c = c_full
    m, n = A.shape

    def expand_dual(lam):
        y = np.zeros(lp.shape[0])
        y[rows] = lam
        return y

    def finish(x, lam, status, it, history):
        xo, yo = back(x), expand_dual(lam)
        res = lp.residuals(xo, yo)
        if status == OPTIMAL and max(res) > tol:
            # dependent rows were inconsistent with the kept ones
            status = INFEASIBLE if res[0] > tol else ITERATION_LIMIT
        return LpSolution(xo, yo, float(lp.c @ xo), status, it, res, history)

    if m == 0:
        if np.any(c < 0):
            return LpSolution(back(np.zeros(n)), np.zeros(lp.shape[0]), -np.inf, UNBOUNDED, 0, (0.0, np.inf, np.inf))
        return finish(np.zeros(n), np.zeros(0), OPTIMAL, 0, [])

    R0 = _factor_normal(A, np.ones(n))
    x = A.T @ _solve_normal(R0, b)
    lam = _solve_normal(R0, A @ c)
    s = c - A.T @ lam
    x = x + max(-1.5 * x.min(), 0.0)
    s = s + max(-1.5 * s.min(), 0.0)
    if x @ s <= 0 or not np.isfinite(x @ s):
        x, s = x + 1.0, s + 1.0
    xs = x @ s
    x = x + 0.5 * xs / s.sum()
    s = s + 0.5 * xs / x.sum()

    bnorm, cnorm = 1.0 + np.linalg.norm(b), 1.0 + np.linalg.norm(c)
    big = 1e12 * max(bnorm, cnorm, np.abs(x).max(), np.abs(s).max())
    history = []
    best = None
    for it in range(max_iter + 1):
        rb = A @ x - b
        rc = A.T @ lam + s - c
        mu = x @ s / n
        pobj, dobj = c @ x, b @ lam
        history.append((float(pobj), float(dobj), float(mu), float(x @ s), float(np.linalg.norm(rb) / bnorm)))
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        converged = np.linalg.norm(rb) / bnorm <= tol and np.linalg.norm(rc) / cnorm <= tol and gap <= tol
        if best is not None:
            # one polishing step past the tolerance; keep it only if it helped
            if converged and gap <= best[2]:
                return finish(x, lam, OPTIMAL, it, history)
            return finish(best[0], best[1], OPTIMAL, it - 1, history[:-1])
        if converged:
            best = (x, lam, gap)
        if it == max_iter:
            break
        if np.abs(x).max() > big:
            return finish(x, lam, UNBOUNDED, it, history)
        if np.abs(s).max() > big or np.abs(lam).max() > big:
            return finish(x, lam, INFEASIBLE, it, history)

        d = x / s
        R = _factor_normal(A, d)

        def direction(rxs):
            rhs = -rb - A @ (rxs / s + d * rc)
            dlam = _solve_normal(R, rhs)
            ds = -rc - A.T @ dlam
            dx = (rxs - x * ds) / s
            # rhs may cancel badly when x/s is spread wide; correct the step
            # against A dx = -rb directly with a D-weighted projection
            for _ in range(3):
                r = -rb - A @ dx
                if np.linalg.norm(r) <= 1e-14 * (1.0 + np.linalg.norm(rb) + np.linalg.norm(dx)):
                    break
                z = _solve_normal(R, r)
                dx = dx + d * (A.T @ z)
                dlam = dlam + z
                ds = ds - A.T @ z
            return dx, dlam, ds

        dx_a, dlam_a, ds_a = direction(-x * s)
        ap = min(1.0, _max_step(x, dx_a))
        ad = min(1.0, _max_step(s, ds_a))
        mu_aff = (x + ap * dx_a) @ (s + ad * ds_a) / n
        sigma = (mu_aff / mu) ** 3

        dx, dlam, ds = direction(-x * s - dx_a * ds_a + sigma * mu)
        eta = min(0.9999, max(0.9, 1.0 - mu))
        ap = min(1.0, eta * _max_step(x, dx))
        ad = min(1.0, eta * _max_step(s, ds))
        x = x + ap * dx
        lam = lam + ad * dlam
        s = s + ad * ds
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))):
            break
    return finish(x, lam, ITERATION_LIMIT, max_iter, history)


def solve_simplex_reference(lp: LpStandardForm, pivot_tol: float = 1e-10, max_pivots: int = 50_000) -> LpSolution:
    """Two-phase tableau simplex with Bland's anti-cycling rule.

    Redundant equality rows are removed before phase I. Meant for small
    problems (a warning is issued above ~500 variables).
    """
    c_full, A_full, back = lp.split_free()
    if A_full.shape[1] > SIMPLEX_SOFT_LIMIT:
        warnings.warn(f"reference simplex on {A_full.shape[1]} variables may be slow", RuntimeWarning)
    rows = independent_rows(A_full)
    A, b = A_full[rows].copy(), lp.b_eq[rows].copy()
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # tableau: [A | I | b], artificials n..n+m-1
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    pivots = 0

    def run(cost):
        nonlocal pivots
        while True:
            cb = cost[basis]
            reduced = cost - cb @ T[:, :-1]
            enter = next((j for j in range(len(cost)) if reduced[j] < -1e-9 and allowed[j]), None)
            if enter is None:
                return OPTIMAL
            col = T[:, enter]
            cand = np.flatnonzero(col > pivot_tol)
            if not len(cand):
                return UNBOUNDED
            ratios = T[cand, -1] / col[cand]
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12 * max(1.0, abs(best))]
            leave = min(ties, key=lambda r: basis[r])
            _pivot(T, leave, enter)
            basis[leave] = enter
            pivots += 1
            if pivots > max_pivots:
                return ITERATION_LIMIT

    allowed = np.ones(n + m, dtype=bool)
    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    status = run(phase1)

    def result(status):
        x = np.zeros(n)
        for r, j in enumerate(basis):
            if j < n:
                x[j] = T[r, -1]
        y = np.zeros(lp.shape[0])
        if status == OPTIMAL:
            lam = np.linalg.solve(A[:, basis].T, c_full[basis])
            y[rows] = np.where(neg, -lam, lam)
        xo = back(x)
        return LpSolution(xo, y, float(lp.c @ xo), status, pivots, lp.residuals(xo, y))

    if status != OPTIMAL:
        return result(status)
    if T[:, -1] @ phase1[basis] > 1e-8 * (1.0 + np.abs(b).sum()):
        return result(INFEASIBLE)

    # drive zero-level artificials out of the basis
    drop = []
    for r in range(m):
        if basis[r] >= n:
            j = next((j for j in range(n) if abs(T[r, j]) > pivot_tol), None)
            if j is None:
                drop.append(r)
            else:
                _pivot(T, r, j)
                basis[r] = j
    if drop:
        keep = [r for r in range(m) if r not in drop]
        T = T[keep]
        basis = [basis[r] for r in keep]
        A, b, rows, neg = A[keep], b[keep], rows[keep], neg[keep]
        m = len(keep)
    allowed[n:] = False
    cost2 = np.concatenate([c_full, np.zeros(T.shape[1] - 1 - n)])
    status = run(cost2)
    return result(status)


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
