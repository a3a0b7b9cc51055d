import numpy as np
import pytest

from morseval.errors import PreconditionError
from morseval.fields import parse
from morseval.transverse import (GraphSheet, SplitModel, chi, injectivity, invariance,
                                 on_invariant_set, verify_extension)

MODEL = SplitModel(n_dim=1, r_dim=1, s=1.0, nu=1.0, rho=2.0, delta=0.3)


def flat():
    return GraphSheet([parse("0*n", ["n"])])


def parabola():
    return GraphSheet([parse("n^2", ["n"])])


def test_chi_flat_sheet():
    n = np.array([[0.1], [-0.2]])
    tau = np.array([0.05, 0.2])
    assert np.allclose(chi(MODEL, flat(), n, tau), np.column_stack([n[:, 0], tau, [0, 0]]))


def test_chi_parabola_closed_form():
    rng = np.random.default_rng(3)
    n = rng.uniform(-0.2, 0.2, (50, 1))
    tau = rng.uniform(-0.29, 0.29, 50)
    expect = np.column_stack([n[:, 0], tau, tau ** 3 * n[:, 0] ** 2])
    assert np.allclose(chi(MODEL, parabola(), n, tau), expect, atol=1e-15)


def test_chi_origin_and_ray():
    assert np.array_equal(chi(MODEL, parabola(), [[0.0]], [0.0]), [[0.0, 0.0, 0.0]])
    tau = np.linspace(0.01, 0.29, 15)
    ray = chi(MODEL, parabola(), np.zeros((15, 1)), tau)
    assert np.array_equal(ray, np.column_stack([np.zeros(15), tau, np.zeros(15)]))


def test_chi_rejects_outside_ball():
    with pytest.raises(PreconditionError):
        chi(MODEL, flat(), [[0.3]], [0.1])


def test_model_rejects_large_delta():
    with pytest.raises(PreconditionError):
        SplitModel(1, 1, s=0.1, nu=0.1, rho=1.0, delta=0.3)


def test_sheet_must_pass_through_base_point():
    with pytest.raises(PreconditionError):
        verify_extension(MODEL, GraphSheet([parse("n^2 + 0.1", ["n"])]), samples=50)


@pytest.mark.parametrize("make", [flat, parabola])
def test_extension_clauses_pass(make):
    rep = verify_extension(MODEL, make(), samples=1000)
    assert rep["a_tangency"]["ad_residual"] <= 1e-6
    assert rep["a_tangency"]["fd_residual"] <= 1e-6
    assert rep["a_tangency"]["checked"] >= 900
    for clause in ("b_cone_inclusion", "c_q_positive", "d_unique_critical", "e_single_ray"):
        assert rep[clause]["passed"], clause
    assert rep["passed"]
    (p,) = rep["d_unique_critical"]["census"]
    assert p["index"] == 1 and p["coindex"] == 1


def test_flat_sheet_hessian_pattern():
    rep = verify_extension(MODEL, flat(), samples=200)
    (p,) = rep["d_unique_critical"]["census"]
    assert np.allclose(np.sort(p["hessian_eigenvalues"]), [-2.0, 2.0], atol=1e-8)


def test_reflected_ray_breaks_single_intersection():
    sheet = GraphSheet([parse("n^2", ["n"])], extra_rays=np.array([[-1.0, 0.0]]))
    rep = verify_extension(MODEL, sheet, samples=200)
    e = rep["e_single_ray"]
    assert not e["passed"] and not rep["passed"]
    assert e["witness"][0] == 0 and e["witness"][1] < 0


def test_two_dimensional_fiber():
    model = SplitModel(n_dim=2, r_dim=0, s=1.0, nu=1.0, rho=1.0, delta=0.3)
    assert verify_extension(model, GraphSheet([]), samples=300)["passed"]


@pytest.mark.parametrize("make", [flat, parabola])
def test_injective_and_invariant(make):
    assert injectivity(MODEL, make())["passed"]
    assert invariance(MODEL, make())["passed"]


def test_invariant_set_membership():
    u = np.array([[0.1, 0.2, 0.2 ** 3 * 0.01], [0.1, 0.2, 0.5], [0.1, -0.2, 0.0]])
    assert on_invariant_set(MODEL, parabola(), u).tolist() == [True, False, False]


@pytest.mark.parametrize("make", [flat, parabola])
def test_halving_delta_keeps_passing(make):
    model = MODEL
    for _ in range(3):
        model = model.with_delta(model.delta / 2)
        assert verify_extension(model, make(), samples=300)["passed"]
