"""Vals in product normal form and the value elevator built on cutoff flows.

A val is described by a :class:`TubeChart`: some coordinates form the base,
the others the fiber, and on the closed tube ``T = {q <= r}`` the function
splits as ``f = f_W(base) + q(fiber)``.  The crest is ``h = f_W + r``.

:func:`elevate` post-composes ``f`` on the tube with the flow ``psi`` whose
anchor is the crest, so values are moved near the base while the crest and
everything outside the tube stay untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping

import numpy as np

from . import jet as J
from .bump import beta, canonical_flow
from .errors import CertificationError, PreconditionError
from .fields import (Box, CriticalPoint, Field, Grid, LambdaField, as_grid,
                     critical_census)


def take(v, idx):
    """Row subset of a jet, an array, or a scalar (returned as is)."""
    if isinstance(v, J.Jet):
        return v.take(idx)
    if np.ndim(v) == 0:
        return v
    return np.asarray(v)[idx]


def patch(base, idx, piece):
    """Copy of ``base`` (jet or array) with rows ``idx`` replaced by ``piece``."""
    if len(idx) == 0:
        return base
    if isinstance(base, J.Jet):
        piece = J.as_jet(piece, base.take(idx))
        out = J.Jet(base.val.copy(),
                    None if base.grad is None else base.grad.copy(),
                    None if base.hess is None else base.hess.copy())
        out.val[idx] = piece.val
        if out.grad is not None:
            out.grad[idx] = piece.grad
        if out.hess is not None:
            out.hess[idx] = piece.hess
        return out
    out = np.array(base, dtype=float, copy=True)
    out[idx] = J.value(piece)
    return out


def _eval(obj, inputs, m):
    if isinstance(obj, Field):
        return obj.compose(inputs)
    if callable(obj):
        return obj(inputs)
    return float(obj)


def _nrows(inputs):
    return len(np.atleast_1d(J.value(inputs[0])))


# tube charts -------------------------------------------------------------------

@dataclass(frozen=True)
class TubeChart:
    """Product-form val.

    ``size`` (r_W) and ``f_on_base`` are fields on the base coordinates, or
    plain numbers when the base is a point.  ``fiber_metric`` is a field on
    the fiber coordinates (sum of squares when omitted).  Points outside
    ``window`` are never in the tube.
    """

    total_dim: int
    base_axes: tuple
    size: object
    f_on_base: object
    fiber_metric: Field | None = None
    window: Box | None = None
    box: Box | None = None

    @classmethod
    def from_field(cls, f: Field, base_axes, size, box: Box, **kw):
        """Chart whose base function is ``f`` restricted to fiber = 0."""
        base_axes = tuple(base_axes)
        n = f.dim

        def f_on_base(bs):
            like = bs[0] if bs else None
            full, it = [], iter(bs)
            for i in range(n):
                if i in base_axes:
                    full.append(next(it))
                else:
                    full.append(J.as_jet(0.0, like) if isinstance(like, J.Jet)
                                else np.zeros_like(np.asarray(J.value(like), dtype=float)))
            return f.compose(full)

        fw = LambdaField(len(base_axes), f_on_base, name="f|W")
        return cls(n, base_axes, size, fw, box=box, **kw)

    @property
    def base_dim(self):
        return len(self.base_axes)

    @property
    def fiber_axes(self):
        return tuple(i for i in range(self.total_dim) if i not in self.base_axes)

    def base(self, inputs):
        return [inputs[i] for i in self.base_axes]

    def fiber(self, inputs):
        return [inputs[i] for i in self.fiber_axes]

    def fW(self, base_inputs, m=1):
        return _eval(self.f_on_base, base_inputs, m)

    def r(self, base_inputs, m=1):
        return _eval(self.size, base_inputs, m)

    def crest(self, base_inputs, m=1):
        return self.fW(base_inputs, m) + self.r(base_inputs, m)

    def q(self, fiber_inputs, m=1):
        if not fiber_inputs:
            return np.zeros(m)
        if self.fiber_metric is not None:
            return self.fiber_metric.compose(fiber_inputs)
        out = 0.0
        for z in fiber_inputs:
            out = out + z * z
        return out

    def in_window(self, points):
        pts = np.atleast_2d(points)
        if self.window is None:
            return np.ones(len(pts), dtype=bool)
        return self.window.contains(pts)

    def in_tube(self, points):
        """Mask of points in the closed tube."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cols = [pts[:, i] for i in range(self.total_dim)]
        m = len(pts)
        q = np.broadcast_to(np.asarray(J.value(self.q(self.fiber(cols), m)), dtype=float), (m,))
        r = np.broadcast_to(np.asarray(J.value(self.r(self.base(cols), m)), dtype=float), (m,))
        return (q <= r) & self.in_window(pts)

    def base_samples(self, count=129):
        """Sample points of the base (rows of base coordinates)."""
        if self.base_dim == 0:
            return np.zeros((1, 0)), None
        box = self.window if self.window is not None else self.box
        if box is None:
            raise PreconditionError("tube needs a sampling box", stage="tube")
        sub = Box(tuple(box.lo[i] for i in self.base_axes), tuple(box.hi[i] for i in self.base_axes))
        per = count if self.base_dim == 1 else max(17, int(round(count ** (2 / 3))))
        return Grid.uniform(self.base_dim, per).points(sub), sub

    def base_values(self, obj, base_pts):
        if self.base_dim == 0:
            return np.atleast_1d(np.asarray(J.value(_eval(obj, [], 1)), dtype=float))
        cols = [base_pts[:, i] for i in range(self.base_dim)]
        v = J.value(_eval(obj, cols, len(base_pts)))
        return np.broadcast_to(np.asarray(v, dtype=float), (len(base_pts),))

    def check(self, f: Field, count=41, rtol=1e-9):
        """Verify r > 0 and f = f_W + q on sampled tube points."""
        box = self.window if self.window is not None else self.box
        if box is None:
            raise PreconditionError("tube needs a sampling box", stage="tube")
        pts = Grid.uniform(self.total_dim, count).points(box)
        cols = [pts[:, i] for i in range(self.total_dim)]
        m = len(pts)
        r = np.broadcast_to(np.asarray(J.value(self.r(self.base(cols), m)), dtype=float), (m,))
        if np.any(r <= 0):
            i = int(np.argmin(r))
            raise PreconditionError("tube size must be positive", stage="tube",
                                    witness={"point": pts[i].tolist(), "size": float(r[i])})
        inside = self.in_tube(pts)
        lhs = f(pts)
        fw = np.broadcast_to(np.asarray(J.value(self.fW(self.base(cols), m)), dtype=float), (m,))
        q = np.broadcast_to(np.asarray(J.value(self.q(self.fiber(cols), m)), dtype=float), (m,))
        err = np.where(inside, np.abs(lhs - fw - q), 0.0)
        scale = 1.0 + np.abs(lhs)
        bad = err > rtol * scale
        if np.any(bad):
            i = int(np.argmax(err / scale))
            raise PreconditionError("f is not f_W + q on the tube", stage="tube",
                                    witness={"point": pts[i].tolist(), "defect": float(err[i])})


# deformation paths --------------------------------------------------------------

class DeformationPath:
    """A family s -> f_s, constant for s outside [s_min, s_max]."""

    def __init__(self, family: Callable, s_min: float, s_max: float, support: Box | None,
                 landmarks: Mapping | None = None, dim: int = 1, info: Mapping | None = None):
        self.family = family
        self.s_min, self.s_max = float(s_min), float(s_max)
        self.support = support
        self.landmarks = dict(landmarks or {})
        self.dim = dim
        self.info = dict(info or {})
        self._cache = {}

    def __call__(self, s) -> Field:
        s = float(np.clip(s, self.s_min, self.s_max))
        if s not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[s] = self.family(s)
        return self._cache[s]

    at = __call__

    def parameters(self, steps):
        return np.linspace(self.s_min, self.s_max, int(steps))

    def start(self):
        return self(self.s_min)

    def end(self):
        return self(self.s_max)


def constant_path(f: Field, support=None):
    return DeformationPath(lambda s: f, 0.0, 1.0, support, dim=f.dim)


# elevator ----------------------------------------------------------------------

class ElevatedField(Field):
    """Output of :func:`elevate`; evaluates lazily on any input jets."""

    def __init__(self, f: Field, tube: TubeChart, e, s: float):
        self.f, self.tube, self.e, self.s = f, tube, e, float(s)
        self.dim = f.dim

    def compose(self, inputs):
        inputs = list(inputs)
        F = self.f.compose(inputs)
        if self.s == 0:
            return F
        m = _nrows(inputs)
        vals = np.stack([np.broadcast_to(np.asarray(J.value(x), dtype=float), (m,)) for x in inputs], axis=1)
        idx = np.flatnonzero(self.tube.in_tube(vals))
        if idx.size == 0:
            return F
        sub = [take(x, idx) for x in inputs]
        b = self.tube.base(sub)
        fw = self.tube.fW(b, idx.size)
        r = self.tube.r(b, idx.size)
        t = (_eval(self.e, b, idx.size) - fw) * self.s
        piece = canonical_flow("psi", fw + r, r * (1.0 / 3.0), t, take(F, idx))
        return patch(F, idx, piece)


def elevate(f: Field, tube: TubeChart, e, s: float = 1.0, check=True) -> ElevatedField:
    """f_{e,s}: move the base values of ``f`` toward ``e`` (fully at s = 1).

    ``e`` is a field on the base (or a number when the base is a point) with
    ``e <= (h + 2 f_W)/3``.
    """
    if check:
        tube.check(f)
        base_pts, _ = tube.base_samples()
        ev = tube.base_values(e, base_pts)
        fw = tube.base_values(tube.f_on_base, base_pts)
        h = fw + tube.base_values(tube.size, base_pts)
        slack = (h + 2 * fw) / 3 - ev
        tolv = 1e-12 * (1 + np.abs(h))
        if np.any(slack < -tolv):
            i = int(np.argmin(slack))
            raise PreconditionError("target exceeds (crest + 2 base)/3", stage="elevate",
                                    witness={"base_point": base_pts[i].tolist(),
                                             "excess": float(-slack[i])})
    return ElevatedField(f, tube, e, s)


# lowering a critical value ---------------------------------------------------

@dataclass
class Neighborhood:
    """Region where the final function is the original shifted by a constant."""

    tube: TubeChart
    level: float  # f_W threshold
    fiber_fraction: float = 2.0 / 3.0

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cols = [pts[:, i] for i in range(self.tube.total_dim)]
        m = len(pts)
        fw = np.broadcast_to(np.asarray(J.value(self.tube.fW(self.tube.base(cols), m)), dtype=float), (m,))
        r = np.broadcast_to(np.asarray(J.value(self.tube.r(self.tube.base(cols), m)), dtype=float), (m,))
        q = np.broadcast_to(np.asarray(J.value(self.tube.q(self.tube.fiber(cols), m)), dtype=float), (m,))
        return (fw >= self.level) & (q <= self.fiber_fraction * r) & self.tube.in_window(pts)


def _support_box(tube: TubeChart, base_mask_level):
    box = tube.window if tube.window is not None else tube.box
    lo, hi = list(box.lo), list(box.hi)
    if tube.base_dim:
        pts, sub = tube.base_samples(257)
        fw = tube.base_values(tube.f_on_base, pts)
        active = pts[fw > base_mask_level]
        if len(active):
            step = [sub.widths[j] / (len(np.unique(pts[:, j])) - 1) for j in range(tube.base_dim)]
            for j, ax in enumerate(tube.base_axes):
                lo[ax] = max(box.lo[ax], active[:, j].min() - step[j])
                hi[ax] = min(box.hi[ax], active[:, j].max() + step[j])
            r = tube.base_values(tube.size, active).max()
        else:
            r = 0.0
    else:
        r = float(tube.r([], 1))
    if tube.fiber_metric is None:
        half = np.sqrt(max(r, 0.0))
        for ax in tube.fiber_axes:
            lo[ax] = max(box.lo[ax], -half)
            hi[ax] = min(box.hi[ax], half)
    return Box(tuple(lo), tuple(hi))


def lower_value(f: Field, tube: TubeChart, kappa: float, u: float, u_prime: float,
                steps: int = 16) -> DeformationPath:
    """Path lowering the critical level ``kappa`` of the nappe W to ``u``.

    Uses ``a = (2u' + u)/3`` and ``eps = (u - u')/3``.  The final function
    equals ``f - (kappa - u)`` on ``path.info["neighborhood"]``.
    """
    if not u_prime < u <= kappa:
        raise PreconditionError("need u' < u <= kappa", stage="lower",
                                witness={"u_prime": u_prime, "u": u, "kappa": kappa})
    tube.check(f)
    if tube.base_dim:
        pts, sub = tube.base_samples()
        fw = tube.base_values(tube.f_on_base, pts)
        edge = np.zeros(len(pts), dtype=bool)
        for j in range(tube.base_dim):
            edge |= np.isclose(pts[:, j], sub.lo[j]) | np.isclose(pts[:, j], sub.hi[j])
        bad = edge & (fw >= u_prime)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise PreconditionError("f is not W-proper above u': {f_W >= u'} reaches the box frontier",
                                    stage="lower", witness={"base_point": pts[i].tolist(),
                                                            "f_W": float(fw[i])})
        if np.max(fw) > kappa + 1e-9 * (1 + abs(kappa)):
            i = int(np.argmax(fw))
            raise PreconditionError("kappa must be the top level of f on W", stage="lower",
                                    witness={"base_point": pts[i].tolist(), "f_W": float(fw[i])})
    a = (2 * u_prime + u) / 3
    eps = (u - u_prime) / 3
    disp = u - kappa
    nbhd = Neighborhood(tube, (u_prime + 2 * u) / 3 + kappa - u)
    support = _support_box(tube, a)
    info = {"a": a, "eps": eps, "neighborhood": nbhd, "kappa": kappa, "u": u,
            "u_prime": u_prime, "steps": int(steps)}
    if disp == 0:
        return DeformationPath(lambda s: f, 0.0, 1.0, support, dim=f.dim, info=info)

    def family(sigma):
        w = float(beta(sigma))
        if w == 0:
            return f

        def target(bs):
            fw = tube.fW(bs, _nrows(bs) if bs else 1)
            return canonical_flow("phi", a, eps, w * disp, fw)

        return elevate(f, tube, target, 1.0, check=False)

    return DeformationPath(family, 0.0, 1.0, support, dim=f.dim, info=info)


# moving critical values in 1D ---------------------------------------------------

class PatchedField(Field):
    """Field equal to ``base`` except on given windows, where pieces take over."""

    def __init__(self, base: Field, pieces):
        self.base = base
        self.pieces = list(pieces)  # (Box, Field, sign)
        self.dim = base.dim

    def compose(self, inputs):
        inputs = list(inputs)
        out = self.base.compose(inputs)
        m = _nrows(inputs)
        vals = np.stack([np.broadcast_to(np.asarray(J.value(x), dtype=float), (m,)) for x in inputs], axis=1)
        for window, piece, sign in self.pieces:
            idx = np.flatnonzero(window.contains(vals))
            if idx.size:
                sub = [take(x, idx) for x in inputs]
                out = patch(out, idx, piece.compose(sub) * sign)
        return out


def _location(key):
    if isinstance(key, CriticalPoint):
        return float(key.location[0])
    return float(np.atleast_1d(key)[0])


def move_values_1d(k: Field, targets: Mapping, box: Box | None = None, grid=None,
                   tol=1e-8) -> DeformationPath:
    """Path moving chosen critical values of a 1D Morse function to ``targets``.

    Keys of ``targets`` are critical points (or their locations).  Each moved
    point gets its own window of half the distance to its nearest neighbour.
    """
    box = box or getattr(k, "domain", None)
    if box is None:
        raise PreconditionError("move_values_1d needs a box", stage="move")
    census = critical_census(k, box, grid if grid is not None else 512, tol)
    if not census:
        raise PreconditionError("no critical points in the box", stage="move")
    degenerate = [p for p in census if not p.nondegenerate]
    if degenerate:
        raise PreconditionError("function is not Morse on the box", stage="move",
                                witness={"point": list(degenerate[0].location)})
    locs = np.array([p.location[0] for p in census])
    wanted = {}
    for key, val in targets.items():
        x = _location(key)
        i = int(np.argmin(np.abs(locs - x)))
        if abs(locs[i] - x) > 1e-6 * (1 + abs(x)):
            raise PreconditionError("target key is not a critical point", stage="move",
                                    witness={"location": x})
        wanted[i] = float(val)
    final = [wanted.get(i, p.value) for i, p in enumerate(census)]
    for i in range(len(census) - 1):
        lo_i, hi_i = (i, i + 1) if census[i].index == 0 else (i + 1, i)
        if census[lo_i].index == census[hi_i].index:
            continue
        if not final[lo_i] < final[hi_i]:
            raise PreconditionError("order violation: a minimum would not stay below its neighbouring maximum",
                                    stage="move", witness={"minimum": census[lo_i].location[0],
                                                           "maximum": census[hi_i].location[0]})
    pieces = []
    for i, target in sorted(wanted.items()):
        p = census[i]
        c = p.location[0]
        if target == p.value:
            continue
        gaps = [abs(c - locs[j]) for j in range(len(locs)) if j != i]
        gaps += [2 * (c - box.lo[0]), 2 * (box.hi[0] - c)]
        rho = 0.5 * min(gaps)
        window = Box((c - rho,), (c + rho,))
        sign = 1.0 if target < p.value else -1.0
        g = k if sign > 0 else -k
        kappa = sign * p.value
        u = sign * target
        ends = g(np.array([c - rho, c + rho]))
        is_min = (p.index == 0) == (sign > 0)
        if is_min:
            r = float(np.min(ends) - kappa)
            q = LambdaField(1, lambda xs, g=g, kappa=kappa: g.compose(xs) - kappa)
            tube = TubeChart(1, (), r, kappa, fiber_metric=q, window=window, box=window)
            u_prime = u - max(1.0, kappa - u)
        else:
            top = float(np.max(ends))
            if not u > top:
                raise PreconditionError(
                    "order violation: target passes the neighbouring values inside the window",
                    stage="move", witness={"point": c, "target": target})
            tube = TubeChart(1, (0,), 1.0, g, window=window, box=window)
            u_prime = (u + top) / 2
        lp = lower_value(g, tube, kappa, u, u_prime)
        pieces.append((window, lp, sign, c, target))
    windows = [pc[0] for pc in pieces]
    for a_, b_ in zip(windows, windows[1:]):
        if a_.hi[0] > b_.lo[0]:
            raise PreconditionError("overlapping supports", stage="move")

    def family(s):
        if not pieces:
            return k
        return PatchedField(k, [(w, lp(s), sg) for w, lp, sg, _, _ in pieces])

    support = None
    if pieces:
        support = Box((min(p_[0].lo[0] for p_ in pieces),), (max(p_[0].hi[0] for p_ in pieces),))
    path = DeformationPath(family, 0.0, 1.0, support, dim=1,
                           info={"census_before": census, "targets": final,
                                 "windows": windows})
    _verify_move(path, k, census, final, box, grid, tol, pieces)
    return path


def _verify_move(path, k, census, final, box, grid, tol, pieces):
    after = critical_census(path.end(), box, grid if grid is not None else 512, tol)
    if len(after) != len(census):
        raise CertificationError("critical set changed while moving values", stage="move",
                                 witness={"before": len(census), "after": len(after)})
    for p, q, t in zip(census, after, final):
        if abs(p.location[0] - q.location[0]) > 1e-6 or abs(q.value - t) > 1e-6 * (1 + abs(t)):
            raise CertificationError("moved critical point missed its target", stage="move",
                                     witness={"location": q.location[0], "value": q.value,
                                              "target": t})
    for window, lp, sign, c, target in pieces:
        x = np.linspace(c - 1e-3 * window.widths[0], c + 1e-3 * window.widths[0], 21)
        shift = path.end()(x) - k(x)
        if np.max(np.abs(shift - (target - k(np.array([c]))[0]))) > 1e-8 * (1 + abs(target)):
            raise CertificationError("deformation is not a constant shift near the moved point",
                                     stage="move", witness={"point": c})


# pseudo-gradient check ----------------------------------------------------------

@dataclass
class PgfReport:
    passed: bool
    min_value: float
    witness: list | None
    checked: int
    regular_threshold: float = 0.0
    extra: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return {"passed": self.passed, "min_value": self.min_value, "witness": self.witness,
                "checked": self.checked}


def vector_values(Z, pts):
    """Evaluate a vector field given as components (fields) or as a callable."""
    if callable(Z) and not isinstance(Z, (list, tuple)):
        return np.asarray(Z(pts), dtype=float).reshape(len(pts), -1)
    return np.stack([np.broadcast_to(np.asarray(c(pts) if isinstance(c, Field) else c, dtype=float),
                                     (len(pts),)) for c in Z], axis=1)


def verify_pgf(Z, f: Field, box: Box, grid=None, tol=1e-8) -> PgfReport:
    """Check Z(f) > 0 on the grid points where ||grad f|| > tol."""
    grid = as_grid(grid, f.dim)
    pts = grid.points(box)
    g = f.gradient(pts)
    z = vector_values(Z, pts)
    zf = np.einsum("mi,mi->m", z, g)
    reg = np.linalg.norm(g, axis=1) > tol
    if not np.any(reg):
        return PgfReport(True, float("inf"), None, 0, tol)
    vals = zf[reg]
    i = int(np.argmin(vals))
    mn = float(vals[i])
    return PgfReport(mn > 0, mn, pts[reg][i].tolist(), int(reg.sum()), tol)


def gradient_field(f: Field):
    """Gradient of ``f`` as a callable vector field."""
    return lambda pts: f.gradient(np.atleast_2d(pts))
