import json

import numpy as np
import pytest

from morseval import report as R
from morseval.errors import PreconditionError
from morseval.fields import Box, critical_census, parse
from morseval.val import DeformationPath


def test_floats_use_seventeen_digits():
    text = R.dumps({"a": 0.3, "b": 1.0, "c": [1e-20, -2.5]})
    assert '"a": 0.29999999999999999' in text
    assert json.loads(text)["a"] == 0.3
    assert json.loads(text)["c"] == [1e-20, -2.5]


def test_non_finite_become_null():
    assert json.loads(R.dumps({"x": float("inf"), "y": [np.nan]})) == {"x": None, "y": [None]}


def test_plain_converts_numpy_and_boxes():
    out = R.plain({"a": np.arange(3), "b": np.float64(2.5), "c": np.bool_(True),
                   "d": Box((0.0,), (1.0,)), "e": (1, 2)})
    assert out == {"a": [0, 1, 2], "b": 2.5, "c": True, "d": [[0.0, 1.0]], "e": [1, 2]}
    assert type(out["b"]) is float and type(out["a"][0]) is int


def test_envelope_leads_with_schema():
    env = R.envelope("census", {"points": []})
    assert list(env)[:2] == ["schema", "command"] and env["schema"] == 1


def test_dumps_is_deterministic():
    rep = {"v": np.linspace(0, 1, 7), "nested": [{"k": 1 / 3}]}
    assert R.dumps(rep) == R.dumps(rep)


def test_frames_csv_layout_and_round_trip():
    s = np.array([0.0, 0.5])
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    vals = np.array([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
    text = R.frames_csv(s, pts, vals)
    assert text.splitlines()[0] == "s,x,y,value"
    s2, pts2, vals2, names = R.read_frames(text)
    assert np.array_equal(s2, s) and np.array_equal(pts2, pts) and np.array_equal(vals2, vals)
    assert names == ["x", "y"]


def test_read_frames_rejects_bad_header():
    with pytest.raises(PreconditionError):
        R.read_frames("t,x,value\n0,0,0\n")


def test_read_frames_rejects_ragged_grids():
    with pytest.raises(PreconditionError):
        R.read_frames("s,x,value\n0,0,1\n0,1,2\n1,0,1\n1,2,2\n")


def test_sampled_field_interpolates_nodes_exactly():
    x = np.linspace(-2, 2, 41)
    f = R.SampledField(x[:, None], np.sin(x))
    assert np.allclose(f(x[:, None]), np.sin(x), atol=1e-15)
    g = f.gradient(np.array([[0.05]]))[0, 0]
    assert g == pytest.approx(np.cos(0.05), abs=5e-3)


def test_sampled_field_2d_has_no_spurious_critical_points():
    box = Box((-1.0, -1.0), (1.0, 1.0))
    f = parse("x^2 - y^2 + 0.3*x", ["x", "y"], box)
    s, pts, vals = R.sample_frames(DeformationPath(lambda s: f, 0, 1, box, dim=2), [0.0], box, 33)
    g = R.SampledField(pts, vals[0])
    cen = critical_census(g, box, 64, 1e-6)
    assert len(cen) == 1 and cen[0].index == 1
    assert np.allclose(cen[0].location, [-0.15, 0.0], atol=2 / 32)


def test_sampled_field_rejects_three_variables():
    pts = np.array(np.meshgrid([0, 1], [0, 1], [0, 1])).reshape(3, -1).T.astype(float)
    with pytest.raises(PreconditionError):
        R.SampledField(pts, np.zeros(len(pts)))


def test_load_path_picks_nearest_frame():
    box = Box((-1.0,), (1.0,))
    f0, f1 = parse("x^2", ["x"], box), parse("x^2 + x", ["x"], box)
    p = DeformationPath(lambda s: f0 if s < 0.5 else f1, 0.0, 1.0, box)
    s, pts, vals = R.sample_frames(p, [0.0, 1.0], box, 21)
    q = R.load_path(R.frames_csv(s, pts, vals))
    assert q.s_min == 0 and q.s_max == 1
    assert q.info["spacing"] == pytest.approx(0.1)
    a, b = R.endpoint_censuses(q, grid=64)
    assert R.censuses_match(a, critical_census(f0, box, 64), 0.1)
    assert R.censuses_match(b, critical_census(f1, box, 64), 0.1)
    assert not R.censuses_match(a, [], 0.1)
