"""Report and frame emission.

JSON reports are written with every float at 17 significant digits so that a
report round-trips exactly and identical runs produce identical bytes.  Frame
files are CSV with columns ``s``, the coordinates, then ``value``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import is_dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import jet as J
from .errors import PreconditionError
from .fields import Box, CriticalPoint, Field, Grid, critical_census
from .val import DeformationPath

SCHEMA = 1


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def plain(obj):
    """Convert reports to JSON-ready builtins (numpy, dataclasses, boxes)."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, Box):
        return obj.as_list()
    if hasattr(obj, "to_dict"):
        return plain(obj.to_dict())
    if is_dataclass(obj):
        return plain(obj.__dict__)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _emit(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(k) + ": ")
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
        elif all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                _emit(v, out, indent, level)
                if i < len(obj) - 1:
                    out.append(", ")
            out.append("]")
        else:
            out.append("[\n")
            for i, v in enumerate(obj):
                out.append(pad)
                _emit(v, out, indent, level + 1)
                out.append(",\n" if i < len(obj) - 1 else "\n")
            out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        # JSON has no inf/nan
        out.append(fmt(obj) if math.isfinite(obj) else "null")
    else:
        out.append(json.dumps(obj))


def dumps(report: dict, indent=2) -> str:
    out = []
    _emit(plain(report), out, indent, 0)
    return "".join(out) + "\n"


def envelope(command: str, body: dict) -> dict:
    return {"schema": SCHEMA, "command": command, **body}


# frames -------------------------------------------------------------------------

COORDS = ("x", "y", "z")


def sample_frames(path: DeformationPath, s_values, box: Box, counts):
    """Sample f_s on a tensor grid; returns (s_values, points, values[s, point])."""
    grid = Grid(tuple(int(c) for c in np.broadcast_to(counts, (box.dim,))))
    pts = grid.points(box)
    vals = np.stack([np.asarray(path(s)(pts), dtype=float) for s in s_values])
    return np.asarray(s_values, dtype=float), pts, vals


def frames_csv(s_values, pts, vals, names=None) -> str:
    names = list(names or COORDS[: pts.shape[1]])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", *names, "value"])
    for s, row in zip(s_values, vals):
        fs = fmt(s)
        for p, v in zip(pts, row):
            w.writerow([fs, *(fmt(c) for c in p), fmt(v)])
    return buf.getvalue()


def read_frames(text: str):
    """Parse frame CSV back into (s_values, points, values[s, point], names)."""
    rows = list(csv.reader(io.StringIO(text)))
    head, body = rows[0], np.array(rows[1:], dtype=float)
    if head[0] != "s" or head[-1] != "value":
        raise PreconditionError("frame file must have columns s, coordinates, value",
                                stage="report", witness={"header": head})
    s_all = body[:, 0]
    s_values = np.unique(s_all)
    first = body[s_all == s_values[0], 1:-1]
    vals = []
    for s in s_values:
        block = body[s_all == s]
        if block.shape[0] != first.shape[0] or not np.array_equal(block[:, 1:-1], first):
            raise PreconditionError("frames are not sampled on a common grid", stage="report",
                                    witness={"s": float(s)})
        vals.append(block[:, -1])
    return s_values, first, np.array(vals), head[1:-1]


def _hermite(t):
    """Cubic Hermite basis on [0, 1] and its first two derivatives.

    Rows: value basis at the left/right node, slope basis at the left/right node.
    """
    t2, t3 = t * t, t * t * t
    val = np.stack([2 * t3 - 3 * t2 + 1, -2 * t3 + 3 * t2, t3 - 2 * t2 + t, t3 - t2])
    d1 = np.stack([6 * t2 - 6 * t, -6 * t2 + 6 * t, 3 * t2 - 4 * t + 1, 3 * t2 - 2 * t])
    d2 = np.stack([12 * t - 6, -12 * t + 6, 6 * t - 4, 6 * t - 2])
    return val, d1, d2


def _cell(axis, v):
    i = np.clip(np.searchsorted(axis, v, side="right") - 1, 0, len(axis) - 2)
    h = axis[i + 1] - axis[i]
    return i, h, (v - axis[i]) / h


class SampledField(Field):
    """Shape-preserving interpolant of tensor-grid samples (one or two variables).

    One variable: PCHIP.  Two variables: bicubic Hermite patches whose node
    slopes come from PCHIP along each axis.  Data that are monotone along a
    grid line stay monotone along it, so interpolation adds no spurious
    critical points on steep cutoff ramps.
    """

    def __init__(self, pts, values):
        pts = np.asarray(pts, dtype=float)
        self.dim = pts.shape[1]
        self.axes = [np.unique(pts[:, i]) for i in range(self.dim)]
        shape = tuple(len(a) for a in self.axes)
        if int(np.prod(shape)) != len(pts):
            raise PreconditionError("samples do not form a tensor grid", stage="report")
        V = np.asarray(values, dtype=float).reshape(shape)
        if self.dim == 1:
            self._p = PchipInterpolator(self.axes[0], V)
            self._d1, self._d2 = self._p.derivative(1), self._p.derivative(2)
        elif self.dim == 2:
            u, w = self.axes
            Fu = PchipInterpolator(u, V, axis=0).derivative()(u)
            self._nodes = (V, Fu, PchipInterpolator(w, V, axis=1).derivative()(w),
                           PchipInterpolator(w, Fu, axis=1).derivative()(w))
        else:
            raise PreconditionError("reloading frames is limited to one or two variables",
                                    stage="report", witness={"dim": self.dim})
        self.domain = Box(tuple(a[0] for a in self.axes), tuple(a[-1] for a in self.axes))

    def _eval2(self, u, w):
        V, Fu, Fw, Fuw = self._nodes
        i, hu, t = _cell(self.axes[0], u)
        j, hw, r = _cell(self.axes[1], w)
        A = _hermite(t)
        B = _hermite(r)
        # corner data: value, u-slope, w-slope, cross, scaled to the unit cell
        coef = {}
        for p in (0, 1):
            for q in (0, 1):
                coef[p, q] = (V[i + p, j + q], hu * Fu[i + p, j + q], hw * Fw[i + p, j + q],
                              hu * hw * Fuw[i + p, j + q])

        def combo(da, db):
            a, b = A[da], B[db]
            out = 0.0
            for p in (0, 1):
                for q in (0, 1):
                    v, su, sw, x = coef[p, q]
                    out = out + v * a[p] * b[q] + su * a[2 + p] * b[q] \
                        + sw * a[p] * b[2 + q] + x * a[2 + p] * b[2 + q]
            return out / (hu ** da * hw ** db)

        return combo

    def compose(self, inputs):
        if self.dim == 1:
            (x,) = inputs
            v = np.asarray(J.value(x), dtype=float)
            f0 = self._p(v)
            return J.apply1(x, f0, self._d1(v), self._d2(v)) if isinstance(x, J.Jet) else f0
        x, y = inputs
        if isinstance(x, J.Jet) or isinstance(y, J.Jet):
            like = x if isinstance(x, J.Jet) else y
            x, y = J.as_jet(x, like), J.as_jet(y, like)
        combo = self._eval2(np.asarray(J.value(x), dtype=float), np.asarray(J.value(y), dtype=float))
        f0 = combo(0, 0)
        if not isinstance(x, J.Jet):
            return f0
        return J.apply2(x, y, f0, combo(1, 0), combo(0, 1), combo(2, 0), combo(1, 1), combo(0, 2))


def load_path(text: str) -> DeformationPath:
    """Rebuild a deformation path from frame CSV (nearest stored frame in s).

    Critical points of the reloaded fields are only located to one grid cell,
    recorded as ``info["spacing"]``.
    """
    s_values, pts, vals, names = read_frames(text)
    fields = [SampledField(pts, v) for v in vals]

    def family(s):
        return fields[int(np.argmin(np.abs(s_values - s)))]

    box = fields[0].domain
    spacing = max(float(np.max(np.diff(a))) for a in fields[0].axes)
    return DeformationPath(family, s_values[0], s_values[-1], box, dim=pts.shape[1],
                           info={"s_values": s_values, "names": names, "spacing": spacing})


def endpoint_censuses(path: DeformationPath, box: Box | None = None, grid=None, tol=1e-6):
    box = box or path.support
    return (critical_census(path.start(), box, grid, tol),
            critical_census(path.end(), box, grid, tol))


def censuses_match(a, b, atol):
    """Same count and indices, locations within ``atol`` (lists in the same order)."""
    def key(p):
        return p["location"] if isinstance(p, dict) else list(p.location)

    def idx(p):
        return p["index"] if isinstance(p, dict) else p.index

    if len(a) != len(b):
        return False
    return all(idx(p) == idx(q) and np.max(np.abs(np.subtract(key(p), key(q)))) <= atol
               for p, q in zip(a, b))


def census_dicts(census):
    return [p.to_dict() if isinstance(p, CriticalPoint) else p for p in census]
