import numpy as np
import pytest

from morseval.errors import PreconditionError
from morseval.fields import critical_census, parse
from morseval.normal_form import (graph_margin, morse_chart, negative_graph, quadratic_remainder,
                                  radius_halving_ratio, signature)

from conftest import EXAMPLE_FIELDS, example_field


def test_remainder_of_quartic():
    f = parse("x^2 - x^4", ["x"])
    b = quadratic_remainder(f, [0.0])
    x = np.linspace(-0.5, 0.5, 11)[:, None]
    assert np.allclose(b(x)[:, 0, 0], 1 - x[:, 0] ** 2, atol=1e-12)


def test_remainder_of_quadratics_is_constant():
    f = parse("x^2 + 4*x*y + y^2", ["x", "y"])
    b = quadratic_remainder(f, [0.0, 0.0])
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    assert np.allclose(b(pts), [[1, 2], [2, 1]], atol=1e-13)
    g = parse("-x^2 + y^2 + z^2", ["x", "y", "z"])
    assert np.allclose(quadratic_remainder(g, [0, 0, 0])(pts[:5].repeat(2, 1)[:, :3]),
                       np.diag([-1.0, 1.0, 1.0]), atol=1e-13)


def test_remainder_is_half_hessian_and_reconstructs():
    f = parse("x^2 + sin(y)", ["x", "y"])
    c = [0.0, -np.pi / 2]
    b = quadratic_remainder(f, c)
    assert np.allclose(b(np.array([c]))[0], 0.5 * f.hessian(np.array([c]))[0], atol=1e-13)
    pts = np.array(c) + np.random.default_rng(1).uniform(-0.5, 0.5, (200, 2))
    assert np.max(np.abs(b.reconstruct(pts) - f(pts))) <= 1e-9
    assert np.allclose(b(pts), np.swapaxes(b(pts), 1, 2))


def test_remainder_rejects_regular_point():
    with pytest.raises(PreconditionError):
        quadratic_remainder(parse("x^2", ["x"]), [0.5])


def test_chart_indefinite_quadratic():
    chart = morse_chart(parse("x^2 + 4*x*y + y^2", ["x", "y"]), [0, 0], 1.0)
    assert (chart.index, chart.coindex) == (1, 1)
    assert list(chart.signs) == [-1, 1]


def test_chart_negative_definite_is_linear():
    f = parse("-x^2 - y^2", ["x", "y"])
    chart = morse_chart(f, [0, 0], 1.0)
    assert chart.index == 2
    y = np.random.default_rng(2).uniform(-0.5, 0.5, (50, 2))
    x = chart(y)
    assert np.allclose(x, y @ np.linalg.inv(chart.linear).T, atol=1e-12)


def test_chart_quartic_closed_form():
    chart = morse_chart(parse("x^2 - x^4", ["x"]), [0.0], 0.5)
    assert chart.index == 0 and chart.residual_bound <= 1e-9
    x = np.linspace(-0.45, 0.45, 31)[:, None]
    assert np.allclose(chart.coordinates(x)[:, 0], x[:, 0] * np.sqrt(1 - x[:, 0] ** 2), atol=1e-12)


def test_chart_rejects_degenerate_point():
    with pytest.raises(PreconditionError):
        morse_chart(parse("x^3", ["x"]), [0.0], 0.5)


def test_chart_needs_pivot_rotation():
    # zero diagonal at the center: the pivot is created by a rotation
    chart = morse_chart(parse("x*y + x^3", ["x", "y"]), [0, 0], 0.5)
    assert (chart.index, chart.coindex) == (1, 1)
    assert chart.residual_bound <= 1e-6


@pytest.mark.parametrize("i", range(len(EXAMPLE_FIELDS)))
def test_chart_residual_on_examples(i):
    f, box, grid = example_field(i)
    for p in critical_census(f, box, grid):
        if not p.nondegenerate:
            continue
        chart = morse_chart(f, p.location, 0.25)
        assert chart.residual_bound <= 1e-6 * (1 + abs(p.value))
        assert chart.inverse_error <= 1e-8
        assert chart.index == p.index


@pytest.mark.parametrize("src,names,c", [
    ("x^2 + x^3", ["x"], [0.0]),
    ("x^2 - y^2 + x*y^2", ["x", "y"], [0.0, 0.0]),
    ("x^2 + sin(y)", ["x", "y"], [0.0, -np.pi / 2]),
    ("x^2 - y^2 + z^2 + x*y*z", ["x", "y", "z"], [0.0, 0.0, 0.0]),
])
def test_radius_halving(src, names, c):
    chart = morse_chart(parse(src, names), c, 0.2)
    assert radius_halving_ratio(chart) >= 6


def test_signature_on_random_matrices(rng):
    for _ in range(100):
        n = int(rng.integers(2, 4))
        A = rng.normal(size=(n, n))
        A = A + A.T
        lam = np.linalg.eigvalsh(A)
        if np.min(np.abs(lam)) < 1e-6:
            continue
        assert signature(A) == (int(np.sum(lam < 0)), int(np.sum(lam > 0)))


def test_chart_index_on_random_quadratics(rng):
    names = ["x", "y", "z"]
    for _ in range(20):
        n = int(rng.integers(2, 4))
        A = rng.normal(size=(n, n))
        A = 0.5 * (A + A.T)
        terms = [f"({float(A[i, j])!r})*{names[i]}*{names[j]}" for i in range(n) for j in range(n)]
        chart = morse_chart(parse(" + ".join(terms), names[:n]), np.zeros(n), 0.5)
        assert chart.index == int(np.sum(np.linalg.eigvalsh(A) < 0))


# negative graphs ------------------------------------------------------------------

def test_graph_of_same_subspace_is_zero():
    B = np.diag([-1.0, 1.0])
    g = negative_graph(B, [[1.0], [0.0]], [[1.0], [0.0]])
    assert np.allclose(g.g, 0)


def test_graph_of_tilted_line():
    B = np.diag([-1.0, 1.0])
    g = negative_graph(B, [[1.0], [0.0]], [[1.0], [0.5]])
    assert g.g.shape == (1, 1) and g.g[0, 0] == pytest.approx(0.5)
    assert g.margin == pytest.approx(1 - 0.25)


def test_graph_rejects_non_negative_subspace():
    B = np.diag([-1.0, 1.0])
    with pytest.raises(PreconditionError) as err:
        negative_graph(B, [[1.0], [0.0]], [[0.0], [1.0]])
    assert err.value.witness is not None


def test_graphs_form_a_convex_set(rng):
    B = np.diag([-1.0, -2.0, 1.0, 3.0])
    N = np.eye(4)[:, :2]
    for _ in range(30):
        gs = []
        while len(gs) < 2:
            G = rng.normal(scale=0.6, size=(2, 2))
            Np = N + np.vstack([np.zeros((2, 2)), G])
            try:
                gs.append(negative_graph(B, N, Np))
            except PreconditionError:
                continue
        t = rng.uniform()
        mid = t * gs[0].g + (1 - t) * gs[1].g
        assert graph_margin(B, gs[0].N, gs[0].P, mid) > 0
