"""Bundled example problems and their reference processes.

* :func:`double_integrator` -- minimum-time transfer of x1' = x2, x2' = u
  from (1, 1) to the origin with |u| <= 1. The optimum is bang-bang: u = -1
  until t = 1 + sqrt(3/2), then u = +1 until t = 1 + 2 sqrt(3/2).
* :func:`nonconvex_integrator` -- x' = u, minimize the integral of x^2 on
  [0, 1] from 0 to 3/4 around a disc-shaped obstacle in the (t, x) plane.
* :func:`van_der_pol` -- the unforced oscillator on [-3, 3]^2.
"""
from __future__ import annotations

import numpy as np

from .moments import Box
from .oracle import OcpProblem, SampledProcess
from .polynomial import Polynomial

SQRT15 = np.sqrt(1.5)
DI_SWITCH = 1.0 + SQRT15
DI_FINAL = 1.0 + 2.0 * SQRT15
NONCONVEX_OPTIMAL_COST = 0.176


def _var(name: str, n: int, m: int) -> Polynomial:
    q = 1 + m + n
    if name == "t":
        return Polynomial.variable(0, q)
    kind, k = name[0], int(name[1:]) - 1
    pos = 1 + k if kind == "u" else 1 + m + k
    return Polynomial.variable(pos, q)


def double_integrator() -> OcpProblem:
    n, m = 2, 1
    x2, u = _var("x2", n, m), _var("u1", n, m)
    return OcpProblem(
        n=n,
        m=m,
        f=(x2, u),
        h=Polynomial.constant(1.0, 1 + n + m),
        t_initial=0.0,
        t_final=None,
        x_init=[1.0, 1.0],
        x_final=[0.0, 0.0],
        x_box=Box([-0.5, -1.5], [2.0, 1.5]),
        u_box=Box([-1.0], [1.0]),
        t_box=Box([0.0], [3.5]),
        name="double_integrator",
    )


def double_integrator_optimum(samples: int = 20001) -> SampledProcess:
    """Analytic optimal process, with the switching time as a sample."""
    n1 = int(round(samples * DI_SWITCH / DI_FINAL))
    t1 = np.linspace(0.0, DI_SWITCH, n1)
    t2 = np.linspace(DI_SWITCH, DI_FINAL, samples - n1 + 1)[1:]
    t = np.concatenate([t1, t2])
    x1 = np.where(t <= DI_SWITCH, 1.0 + t - 0.5 * t ** 2, 0.5 * (t - DI_FINAL) ** 2)
    x2 = np.where(t <= DI_SWITCH, 1.0 - t, t - DI_FINAL)
    u = np.where(t < DI_SWITCH, -1.0, 1.0)
    return SampledProcess(t, np.column_stack([x1, x2]), u)


def nonconvex_integrator() -> OcpProblem:
    n, m = 1, 1
    t, u, x = _var("t", n, m), _var("u1", n, m), _var("x1", n, m)
    obstacle = (x - 0.2) * (x - 0.2) + (t - 0.5) * (t - 0.5) - 0.04
    return OcpProblem(
        n=n,
        m=m,
        f=(u,),
        h=x * x,
        t_initial=0.0,
        t_final=1.0,
        x_init=[0.0],
        x_final=[0.75],
        x_box=Box([-1.0], [1.0]),
        u_box=Box([-1.0], [1.0]),
        t_box=Box([0.0], [1.0]),
        constraints=(obstacle,),
        name="nonconvex_integrator",
    )


def nonconvex_coarse_process(samples: int = 2001) -> SampledProcess:
    """Admissible but suboptimal process passing above the obstacle.

    Rise at unit slope to 0.45, hold until t = 0.7, rise to 3/4 at t = 1;
    a stand-in for the moments of a low-order relaxation.
    """
    knots_t = [0.0, 0.45, 0.7, 1.0]
    t = np.unique(np.concatenate([np.linspace(0.0, 1.0, samples), knots_t]))
    x = np.interp(t, knots_t, [0.0, 0.45, 0.45, 0.75])
    u = np.select([t < 0.45, t < 0.7], [1.0, 0.0], 1.0)
    return SampledProcess(t, x, u)


def van_der_pol_dynamics() -> tuple[Polynomial, Polynomial]:
    """x1' = x2, x2' = -x1 + (1 - x1^2) x2, as polynomials in (x1, x2)."""
    x1, x2 = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
    return x2, -x1 + x2 - x1 * x1 * x2


VDP_BOX = Box([-3.0, -3.0], [3.0, 3.0])
VDP_X0 = np.array([2.0, 0.0])


def van_der_pol_cycle(dt: float = 1e-3, settle: float = 100.0) -> np.ndarray:
    """Points on the limit cycle from a long RK4 run (one period after settling)."""
    from .oracle import rk4_trajectory, _as_vector_field

    field = _as_vector_field(van_der_pol_dynamics())
    x = rk4_trajectory(field, VDP_X0, 0.01, int(settle / 0.01))[-1]
    traj = rk4_trajectory(field, x, dt, int(15.0 / dt))
    # one full period: first return through the upward x1 = 0 crossing
    a, b = traj[:-1, 0], traj[1:, 0]
    k = np.flatnonzero((a < 0) & (b >= 0))
    return traj[k[0] : k[1] + 1]
