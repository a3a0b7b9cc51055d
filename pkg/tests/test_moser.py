import numpy as np
import pytest

from morseval.errors import PreconditionError
from morseval.fields import Box, parse
from morseval.moser import (MoserError, MoserProblem, moser_field, moser_isotopy, order_check,
                            surrogate_check, vanishing_order)

SUB = Box((-0.3,), (0.3,))
DOMAIN = Box((-1.0,), (1.0,))


def problem(k_src, h_src="x^2", W=(0.0,)):
    return MoserProblem(parse(h_src, ["x"]), parse(k_src, ["x"]), np.array(W), DOMAIN)


@pytest.mark.parametrize("k_src,expected", [
    ("x^2 + x^3", lambda t, x: x ** 2 / (2 + 3 * (1 - t) * x)),
    ("x^2 + x^5", lambda t, x: x ** 4 / (2 + 5 * (1 - t) * x ** 3)),
])
def test_field_formula(k_src, expected):
    p = problem(k_src)
    x = np.linspace(-0.3, 0.3, 61)
    for t in (0.0, 0.4, 1.0):
        assert np.allclose(moser_field(p, t, x), expected(t, x), atol=1e-14, rtol=1e-12)


def test_field_removable_singularity_at_w():
    p = problem("x^2 + x^3")
    assert moser_field(p, 0.5, np.array([0.0]))[0] == 0.0


def test_identical_functions_give_identity_flow():
    p = problem("x^2")
    x = np.linspace(-0.3, 0.3, 11)
    assert np.all(moser_field(p, 0.3, x) == 0)
    iso = moser_isotopy(p, SUB, 20, 11)
    assert np.array_equal(iso.endpoints, iso.starts)


@pytest.mark.parametrize("k_src", ["x^2 + x^3", "x^2 + x^5"])
def test_isotopy_conjugates(k_src):
    iso = moser_isotopy(problem(k_src), SUB, 200, 201)
    assert iso.residual <= 1e-6
    assert iso.fixed_W_error <= 1e-10
    # phi_0 is the identity
    assert np.array_equal(iso.history[0], iso.starts)


def test_flow_follows_the_field():
    p = problem("x^2 + x^3")
    iso = moser_isotopy(p, SUB, 800, 21)
    dt = iso.times[1] - iso.times[0]
    h = iso.history[:, :, 0]
    velocity = (h[2:] - h[:-2]) / (2 * dt)
    field = np.array([moser_field(p, t, x) for t, x in zip(iso.times[1:-1], h[1:-1])])
    assert np.max(np.abs(velocity - field)) <= 1e-6


def test_order_check_passes():
    rep = order_check(problem("x^2 + x^3"), SUB, 40, 41)
    assert rep["passed"] and rep["ratio"] >= 2


def test_two_variable_conjugacy():
    box = Box((-0.3, -0.3), (0.3, 0.3))
    names = ["x", "y"]
    h = parse("x^2 + y^2 + 1", names)
    k = parse("x^2 + y^2 + 1 + 0.1*(x^2 + y^2)^2", names)
    p = MoserProblem(h, k, np.zeros((1, 2)), Box((-1.0, -1.0), (1.0, 1.0)))
    iso = moser_isotopy(p, box, 200, 121)
    assert iso.residual <= 1e-6 and iso.fixed_W_error <= 1e-10


def test_nonvanishing_difference_on_w_is_rejected():
    with pytest.raises(PreconditionError):
        problem("x^2 + 1")


def test_escape_is_reported():
    p = MoserProblem(parse("x^2", ["x"]), parse("x^2 + x^3", ["x"]), np.array([0.0]),
                     Box((-0.31,), (0.31,)))
    with pytest.raises(MoserError) as err:
        moser_isotopy(p, Box((0.2,), (0.3,)), 50, 5)
    assert "start" in err.value.witness


def test_singular_field_is_reported():
    # at t = 1 the interpolant is x^4 while d = -x^2: Z ~ 1/(4x) at 0
    p = problem("x^4 + x^2", h_src="x^4")
    assert not surrogate_check(p.h, p.d, [0.0])["passed"]
    with pytest.raises(MoserError) as err:
        moser_field(p, 1.0, np.array([0.0]))
    assert err.value.witness["t"] == 1.0


# vanishing orders -------------------------------------------------------------------

def test_vanishing_order_examples():
    assert vanishing_order(parse("-x^3", ["x"]), 0.0) == 3
    assert vanishing_order(parse("0*x", ["x"]), 0.0, max_order=8) == 9
    assert vanishing_order(parse("x^2", ["x"]), 1.0) == 0


def test_vanishing_order_depth_limit():
    with pytest.raises(PreconditionError):
        vanishing_order(parse("x", ["x"]), 0.0, max_order=9)


def test_surrogate_rule():
    h = parse("x^2", ["x"])
    assert surrogate_check(h, parse("-x^3", ["x"]), [0.0])["passed"]
    rep = surrogate_check(h, parse("x^2", ["x"]), [0.0])
    assert not rep["passed"]
    assert rep["points"][0]["required"] == 3 and rep["points"][0]["ord_d"] == 2
