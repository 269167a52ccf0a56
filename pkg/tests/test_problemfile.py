import numpy as np
import pytest

from momentrecon import problems
from momentrecon.cli import bundled_specs
from momentrecon.problemfile import InvariantProblem, ProblemSpecError, format_problem, load_problem, parse_problem


def same_ocp(a, b):
    assert (a.n, a.m, a.t_initial, a.t_final) == (b.n, b.m, b.t_initial, b.t_final)
    assert a.f == b.f and a.h == b.h
    assert len(a.constraints) == len(b.constraints)
    for ga, gb in zip(a.constraints, b.constraints):
        assert set(ga.terms) == set(gb.terms)
        for k in ga.terms:
            assert ga.terms[k] == pytest.approx(gb.terms[k], abs=1e-15)
    assert a.box == b.box
    np.testing.assert_array_equal(a.x_init, b.x_init)
    np.testing.assert_array_equal(a.x_final, b.x_final)


def test_bundled_specs_match_builtin_problems():
    specs = bundled_specs()
    assert set(specs) >= {"double_integrator", "nonconvex_integrator", "van_der_pol"}
    di = load_problem(specs["double_integrator"])
    same_ocp(di.problem, problems.double_integrator())
    assert di.trajectory.exists()
    nc = load_problem(specs["nonconvex_integrator"])
    same_ocp(nc.problem, problems.nonconvex_integrator())
    vdp = load_problem(specs["van_der_pol"])
    assert isinstance(vdp.problem, InvariantProblem)
    assert vdp.problem.f == problems.van_der_pol_dynamics()
    assert vdp.problem.x_box == problems.VDP_BOX


@pytest.mark.parametrize("name", ["double_integrator", "nonconvex_integrator", "van_der_pol"])
def test_format_parse_round_trip(name):
    spec = load_problem(bundled_specs()[name])
    again = parse_problem(format_problem(spec.problem))
    if isinstance(spec.problem, InvariantProblem):
        assert again.problem.f == spec.problem.f
        assert again.problem.x_box == spec.problem.x_box
    else:
        same_ocp(again.problem, spec.problem)


MINIMAL = """name tiny
dims 1 1
time 0 1
box x1 -1 1
box u1 -1 1
x_init 0
x_final 0
dynamics 1
term 1 0 1 0
cost
term 1 0 0 2
"""


def test_minimal_problem():
    prob = parse_problem(MINIMAL).problem
    assert prob.name == "tiny" and prob.t_final == 1.0
    assert prob.coords == ("t", "u1", "x1")


@pytest.mark.parametrize(
    "edit, where",
    [
        (("term 1 0 1 0", "term 1 0 one 0"), ":9:10:"),
        (("dims 1 1", "dims 1 1\nwidget 3"), ":3:1:"),
        (("term 1 0 0 2", "term 1 0 2"), ":11:1:"),
        (("time 0 1", "time 0 free"), ":3:1:"),
    ],
)
def test_errors_carry_position(edit, where):
    text = MINIMAL.replace(*edit)
    with pytest.raises(ProblemSpecError, match=f"spec{where}"):
        parse_problem(text, "spec")


def test_missing_pieces():
    with pytest.raises(ProblemSpecError, match="missing 'cost'"):
        parse_problem(MINIMAL.split("cost")[0], "spec")
    with pytest.raises(ProblemSpecError, match="missing 'box u1'"):
        parse_problem(MINIMAL.replace("box u1 -1 1\n", ""), "spec")
    with pytest.raises(ProblemSpecError, match="not inside"):
        parse_problem(MINIMAL.replace("x_final 0", "x_final 5"), "spec")
