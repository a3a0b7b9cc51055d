import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morseval import expr as E
from morseval.errors import ArityError, DomainError, ParseError, PreconditionError, UnknownIdentifierError
from morseval.fields import Box, brute_force_census, critical_census, eval_jet, parse, same_census

from conftest import EXAMPLE_FIELDS, example_field


def expressions(names=("x", "y"), safe=True):
    leaf = st.one_of(st.sampled_from(names),
                     st.integers(0, 9).map(str),
                     st.sampled_from(["0.5", "1.25", "3/4"]))

    def grow(inner):
        two = st.tuples(inner, inner)
        return st.one_of(
            two.map(lambda p: f"({p[0]} + {p[1]})"),
            two.map(lambda p: f"({p[0]} - {p[1]})"),
            two.map(lambda p: f"{p[0]} * {p[1]}"),
            two.map(lambda p: f"{p[0]} / (2 + ({p[1]})^2)"),
            st.tuples(inner, st.integers(0, 3)).map(lambda p: f"({p[0]})^{p[1]}"),
            inner.map(lambda a: f"-{a}"),
            inner.map(lambda a: f"sin({a})"),
            inner.map(lambda a: f"cos({a})"),
            inner.map(lambda a: f"exp(({a})/8)" if safe else f"exp({a})"),
            inner.map(lambda a: f"log(1 + ({a})^2)"),
            inner.map(lambda a: f"sqrt(2 + sin({a}))"),
        )

    return st.recursive(leaf, grow, max_leaves=6)


# parsing --------------------------------------------------------------------------

def test_parse_two_variables():
    f = parse("x^2 + sin(y)", ["x", "y"])
    assert f.dim == 2
    assert f(np.array([[2.0, 0.0]]))[0] == 4.0


def test_syntax_error_offset():
    with pytest.raises(ParseError) as err:
        parse("x +", ["x"])
    assert err.value.offset == 3


def test_unknown_identifier_and_arity():
    with pytest.raises(UnknownIdentifierError):
        parse("x + w", ["x"])
    with pytest.raises(ParseError):
        parse("sin()", ["x"])
    with pytest.raises(ArityError):
        parse("sin(x, x)", ["x"])


def test_duplicate_variables_rejected():
    with pytest.raises(PreconditionError):
        parse("x", ["x", "x"])


def test_unary_minus_binds_looser_than_power():
    f = parse("-x^2", ["x"])
    assert f(np.array([[3.0]]))[0] == -9.0


def test_unicode_minus_accepted():
    f = parse("x − 1", ["x"])
    assert f(np.array([[3.0]]))[0] == 2.0


@settings(max_examples=50, derandomize=True, deadline=None)
@given(expressions())
def test_round_trip(src):
    ast = E.parse_ast(src, ("x", "y"))
    again = E.parse_ast(E.to_source(ast), ("x", "y"))
    assert again == ast
    assert E.to_source(again) == E.to_source(ast)


def test_round_trip_fractions_exact():
    f = parse("x/3 + 0.1*x", ["x"])
    g = parse(f.to_source(), ["x"])
    assert g.ast == f.ast


@pytest.mark.parametrize("src,point", [("log(x)", 0.0), ("sqrt(x)", -1.0), ("1/x", 0.0)])
def test_domain_errors(src, point):
    with pytest.raises(DomainError):
        parse(src, ["x"])(np.array([[point]]))


# derivatives -----------------------------------------------------------------------

def test_eval_jet_examples():
    v, g, H = eval_jet(parse("x^2 + 4*x*y + y^2", ["x", "y"]), [0, 0])
    assert v == 0 and np.all(g == 0)
    assert np.array_equal(H, [[2, 4], [4, 2]])
    v, g = eval_jet(parse("x", ["x"]), [5], order=1)
    assert v == 5 and g[0] == 1
    v, g, H = eval_jet(parse("sin(x)", ["x"]), [0])
    assert (v, g[0], H[0, 0]) == (0, 1, 0)


def test_cubic_derivative():
    f = parse("x^3 - 3*x", ["x"])
    x = np.linspace(-2, 2, 9)
    assert np.allclose(f.gradient(x[:, None])[:, 0], 3 * x ** 2 - 3, atol=1e-14)


@settings(max_examples=200, derandomize=True, deadline=None)
@given(expressions(), st.floats(-1, 1), st.floats(-1, 1))
def test_ad_matches_central_differences(src, x, y):
    f = parse(src, ["x", "y"])
    p = np.array([[x, y]])
    h = 1e-5
    g = f.gradient(p)[0]
    H = f.hessian(p)[0]
    assert np.allclose(H, H.T)
    for i in range(2):
        e = np.zeros((1, 2))
        e[0, i] = h
        fd = (f(p + e)[0] - f(p - e)[0]) / (2 * h)
        assert abs(g[i] - fd) <= 1e-6 * (1 + abs(g[i]))
        fd_row = (f.gradient(p + e)[0] - f.gradient(p - e)[0]) / (2 * h)
        assert np.all(np.abs(H[i] - fd_row) <= 1e-4 * (1 + np.abs(H[i])))


def test_symbolic_derivative_field():
    f = parse("x^3*y", ["x", "y"])
    fx = f.derivative_field("x")
    assert fx(np.array([[2.0, 5.0]]))[0] == 60.0


# census ------------------------------------------------------------------------------

def test_census_examples():
    cen = critical_census(parse("x^2 + y^2", ["x", "y"]), Box.of((-1, 1), (-1, 1)))
    assert [(c.location, c.index) for c in cen] == [((0.0, 0.0), 0)]
    cen = critical_census(parse("y^2 - x^2", ["x", "y"]), Box.of((-1, 1), (-1, 1)))
    assert [(c.location, c.index) for c in cen] == [((0.0, 0.0), 1)]
    cen = critical_census(parse("x^3 - 3*x", ["x"]), Box.of((-3, 3)))
    assert [(c.location, c.value, c.index) for c in cen] == [((-1.0,), 2.0, 1), ((1.0,), -2.0, 0)]


@pytest.mark.parametrize("signs", [(-1,), (1,), (1, -1), (-1, -1), (1, -1, 1), (-1, -1, -1)])
def test_index_of_diagonal_quadratics(signs):
    names = ("x", "y", "z")[: len(signs)]
    src = " + ".join(f"{'-' if s < 0 else ''}{v}^2" for s, v in zip(signs, names))
    cen = critical_census(parse(src, names), Box.of(*[(-1, 1)] * len(signs)), 12)
    assert len(cen) == 1
    c = cen[0]
    assert c.index == sum(s < 0 for s in signs)
    assert c.index + c.coindex == len(signs) and c.nondegenerate


def test_degenerate_point_flagged():
    cen = critical_census(parse("x^3", ["x"]), Box.of((-1, 1)), tol=1e-6)
    assert len(cen) == 1 and not cen[0].nondegenerate


def test_census_empty_for_monotone():
    assert critical_census(parse("x", ["x"]), Box.of((-1, 1))) == []


@pytest.mark.parametrize("i", range(len(EXAMPLE_FIELDS)), ids=[e[0] for e in EXAMPLE_FIELDS])
def test_census_matches_brute_force_oracle(i):
    f, box, grid = example_field(i)
    tol = 1e-8
    assert same_census(critical_census(f, box, grid, tol), brute_force_census(f, box, grid, tol), tol)
