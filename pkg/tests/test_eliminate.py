import numpy as np
import pytest

from morseval.eliminate import (ProductModel, blend_pg, check_capacity, eliminate_pair, product,
                                tube_excess)
from morseval.errors import PreconditionError
from morseval.fields import Box, Grid, critical_census, parse
from morseval.val import verify_pgf

from conftest import CUBIC, elimination

SIGNATURES = [(0, 1), (1, 0)]


@pytest.mark.parametrize("a,b", SIGNATURES)
def test_model_census(a, b):
    model, _, _ = elimination(a, b)
    cen = critical_census(model.F, model.box, Grid(tuple([256] + [9] * (a + b))))
    assert [c.location[0] for c in cen] == pytest.approx([-1.0, 1.0])
    assert [c.index for c in cen] == [1 + a, a]


@pytest.mark.parametrize("a,b", SIGNATURES)
def test_pair_is_eliminated(a, b):
    _, _, rep = elimination(a, b)
    counts = rep.counts
    assert counts[0] == 2 and counts[-1] == 0
    degenerate = [row for row in rep.timeline if row["degenerate"]]
    assert len(degenerate) == 1 and degenerate[0]["s"] == rep.t0
    assert all(row["on_axis"] for row in rep.timeline)
    assert rep.outside_max_dev == 0.0
    assert rep.monotone_min_step >= -1e-10
    assert all(p["passed"] for p in rep.pgf)
    assert rep.passed


@pytest.mark.parametrize("a,b", SIGNATURES)
def test_path_starts_at_model(a, b):
    model, path, _ = elimination(a, b)
    pts = Grid.uniform(model.dim, 41).points(model.box)
    assert np.array_equal(path(0.0)(pts), model.F(pts))


@pytest.mark.parametrize("a,b", SIGNATURES)
def test_support_strictly_inside_box(a, b):
    model, path, _ = elimination(a, b)
    assert np.all(np.array(path.support.lo) > np.array(model.box.lo))
    assert np.all(np.array(path.support.hi) < np.array(model.box.hi))


def test_stage_one_lowering_runs_when_needed():
    _, path, rep = elimination(0, 1, (-3.0, 2.0))
    low = rep.stages["lowering"]
    assert low != "skipped" and low["u_prime"] < low["u"] < low["kappa"]
    assert rep.counts[0] == 2 and rep.counts[-1] == 0 and rep.passed
    assert path.landmarks["t0"] > 2


def test_model_rejects_large_fibers():
    with pytest.raises(PreconditionError):
        ProductModel(parse(CUBIC, ["x"]), 2, 1, (-3, 3))


def test_model_rejects_wrong_factor():
    model = ProductModel(parse("x^2", ["x"]), 0, 1, (-3, 3))
    with pytest.raises(PreconditionError):
        eliminate_pair(model)


def test_capacity_is_enforced():
    model = ProductModel(parse(CUBIC, ["x"]), 0, 1, (-3, 3), radius_z=0.3)
    with pytest.raises(PreconditionError, match="too thin"):
        check_capacity(model, parse(CUBIC + " + 1", ["x"]))


# pseudo-gradient blend --------------------------------------------------------------

def test_blend_plateaus():
    box = Box((-1.0, -1.0), (1.0, 1.0))
    F = parse("x^2 - y^2", ["x", "y"], box)
    pts = Grid.uniform(2, 11).points(box)

    def Z(p):
        return np.tile([1.0, 2.0], (len(p), 1))

    grad = blend_pg(Z, F, 1.0, argument=lambda p: -np.ones(len(p)))(pts)
    assert np.array_equal(grad, F.gradient(pts))
    pure = blend_pg(Z, F, 1.0, argument=lambda p: 2 * np.ones(len(p)))(pts)
    assert np.array_equal(pure, Z(pts))


def test_blend_default_argument_uses_values():
    box = Box((0.5, 0.5), (1.0, 1.0))
    F = parse("x^2 + y^2", ["x", "y"], box)
    pts = Grid.uniform(2, 5).points(box)
    field = blend_pg(lambda p: np.zeros_like(p), F, 0.25)(pts)
    # F / r >= 2 on this box: pure Z
    assert np.array_equal(field, np.zeros_like(pts))


def test_blend_rejects_bad_radius():
    with pytest.raises(PreconditionError):
        blend_pg(None, parse("x", ["x"]), 0.0)


def test_tube_excess_sign():
    model = ProductModel(parse(CUBIC, ["x"]), 1, 1, (-3, 3), radius_y=4.0, radius_z=9.0)
    arg = tube_excess(model)
    assert arg(np.array([[0.0, 1.0, 2.0]]))[0] < 0
    assert arg(np.array([[0.0, 2.0, 0.0]]))[0] == 0
    assert arg(np.array([[0.0, 0.0, 4.0]]))[0] > 0


def test_blended_field_is_pseudo_gradient_off_tubes():
    model, path, rep = elimination(1, 0)
    s = rep.t0 + 0.3
    Zs = blend_pg(model.F.gradient, path(s), 1.0, argument=tube_excess(model))
    assert verify_pgf(Zs, path(s), model.box, Grid((129, 9)), 1e-6).passed


def test_product_signs():
    F = product(parse("x", ["x"]), 1, 1)
    assert F(np.array([[1.0, 2.0, 3.0]]))[0] == 1 - 4 + 9
