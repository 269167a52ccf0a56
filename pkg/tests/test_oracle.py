import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from momentrecon import problems
from momentrecon.moments import Box, MomentVector, enumerate_indices
from momentrecon.oracle import (
    SampledProcess,
    TrajectoryEscapeError,
    adjoint_residuals,
    check_adjoint_identity,
    invariance_residual,
    invariant_moments,
    occupation_moments,
)
from momentrecon.polynomial import Polynomial


def test_time_times_state_moment():
    t = np.linspace(0.0, 1.0, 11)
    proc = SampledProcess(t, t, np.ones_like(t))
    y = occupation_moments(proc, 2)
    assert y.coords == ("t", "u1", "x1")
    assert y[(1, 0, 1)] == pytest.approx(1 / 3, abs=1e-6)
    assert y.mass == pytest.approx(1.0, rel=1e-12)


def test_mass_is_duration(rng):
    t = np.sort(rng.uniform(0.3, 2.7, 40))
    proc = SampledProcess(t, rng.normal(size=(40, 2)), rng.uniform(-1, 1, 40))
    assert occupation_moments(proc, 4).mass == pytest.approx(t[-1] - t[0], rel=1e-13)


def test_control_moment_of_bang_bang_optimum(di_moments):
    # <u, mu> = x2(tf) - x2(0) = -1
    assert di_moments[(0, 1, 0, 0)] == pytest.approx(-1.0, abs=1e-4)
    assert di_moments.mass == pytest.approx(problems.DI_FINAL, rel=1e-8)


def _analytic_moments(t0, t1, x_coef, u_val, degree):
    # moments of t -> (t, u, x(t)) for polynomial x, constant u, exactly
    out = []
    for i, j, k in enumerate_indices(3, degree):
        integrand = P.polymul(P.polypow([0.0, 1.0], i), P.polypow(x_coef, k)) * u_val ** j
        anti = P.polyint(integrand)
        out.append(P.polyval(t1, anti) - P.polyval(t0, anti))
    return np.array(out)


def test_quadrature_exact_for_linear_interpolant():
    t = np.linspace(0.5, 2.0, 7)
    x = 1.0 - 2.0 * t
    proc = SampledProcess(t, x, np.full_like(t, 0.7))
    y = occupation_moments(proc, 12, nodes=64)
    ref = _analytic_moments(0.5, 2.0, [1.0, -2.0], 0.7, 12)
    np.testing.assert_allclose(y.values, ref, rtol=1e-8, atol=1e-12)


def test_occupation_moment_errors():
    with pytest.raises(ValueError, match="2 samples"):
        SampledProcess([0.0], [[1.0]])
    with pytest.raises(ValueError, match="increasing"):
        SampledProcess([0.0, 1.0, 0.5], np.zeros(3))
    proc = SampledProcess([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        occupation_moments(proc, 3)


def test_stable_origin_gives_dirac():
    f = [Polynomial({(1,): -1.0}, 1)]
    y = invariant_moments(f, [1.0], 200.0, 6, Box([-2.0], [2.0]))
    assert y.mass == 1.0
    np.testing.assert_allclose(y.values[1:], 0.0, atol=1e-12)


def test_van_der_pol_invariance(vdp_moments):
    assert vdp_moments.mass == 1.0
    assert invariance_residual(vdp_moments, problems.van_der_pol_dynamics(), 5) <= 1e-2


def test_van_der_pol_independent_of_start(vdp_moments):
    other = invariant_moments(problems.van_der_pol_dynamics(), [-0.5, 1.0], 200.0, 8, problems.VDP_BOX)
    assert np.max(np.abs(other.values - vdp_moments.values)) <= 1e-2


def test_escape_is_reported():
    f = [Polynomial({(1,): 1.0}, 1)]
    with pytest.raises(TrajectoryEscapeError):
        invariant_moments(f, [1.0], 50.0, 4, Box([-3.0], [3.0]))


def test_adjoint_identity_on_admissible_process(di_prob, di_moments):
    assert check_adjoint_identity(di_moments, di_prob, 6) <= 1e-4


def test_adjoint_constant_test_function(di_prob, di_moments):
    # v = 1 is the first test monomial; both sides vanish
    assert adjoint_residuals(di_moments, di_prob, 2)[0] == 0.0


def test_adjoint_zero_measure(di_prob):
    y = MomentVector(di_prob.coords, 8, np.zeros(495), di_prob.box)
    res = adjoint_residuals(y, di_prob, 2)
    zi = np.array([0.0, 0.0, 1.0, 1.0])
    zf = np.array([0.0, 0.0, 0.0, 0.0])  # mass 0 means t_f = t_i
    expected = [0.0]  # v = 1
    for alpha in enumerate_indices(3, 2)[1:]:
        full = (alpha[0], 0, alpha[1], alpha[2])
        expected.append(np.prod(zf ** full) - np.prod(zi ** full))
    np.testing.assert_allclose(res, expected, atol=1e-15)
    assert np.max(np.abs(res)) > 0


def test_adjoint_degree_budget(di_prob, di_moments):
    with pytest.raises(ValueError, match="degree budget"):
        check_adjoint_identity(di_moments, di_prob, 8)


def test_adjoint_residual_shrinks_with_sampling(di_prob):
    res = []
    for samples in (251, 501, 1001, 2001, 4001):
        y = occupation_moments(problems.double_integrator_optimum(samples), 8, box=di_prob.box)
        res.append(check_adjoint_identity(y, di_prob, 6))
    assert all(b < a for a, b in zip(res, res[1:])), res
