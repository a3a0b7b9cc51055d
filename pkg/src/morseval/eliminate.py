"""Eliminate a hump-dip pair in the product model F(u, y, z) = k(u) - |y|^2 + |z|^2.

The reduction runs on the one-variable factor k and is then carried to the
product by two nested elevations: the z-tube moves the values of k(u) + |z|^2
and the y-tube moves the values of -F.  Both act inside tubes around the
u-axis, so F_s = F exactly off the support box and the critical points of
F_s are those of k_s on the u-axis.

Stages on the factor:

1. lower the hump value below the nape when needed (skipped otherwise);
2. the dromedary path, which merges the pair at t0 and removes it.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import dromedary as D
from .bump import beta
from .errors import MorsevalError, PreconditionError
from .fields import Box, Field, Grid, LambdaField, critical_census
from .val import DeformationPath, ElevatedField, TubeChart, lower_value, verify_pgf

FIBER_FACTOR = 1.125  # fiber half-width of the default box, in units of sqrt(r)


@dataclass
class ProductModel:
    k: Field
    a: int  # number of y (negative) fiber coordinates
    b: int  # number of z (positive) fiber coordinates
    interval: tuple
    radius_y: float = 16.0
    radius_z: float = 16.0
    box: Box | None = None
    nape: float | None = None

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or 1 + self.a + self.b > 3:
            raise PreconditionError("need 1 + a + b <= 3 fiber dimensions", stage="eliminate",
                                    witness={"a": self.a, "b": self.b})
        if not (self.radius_y > 0 and self.radius_z > 0):
            raise PreconditionError("tube radii must be positive", stage="eliminate")
        lo, hi = (float(v) for v in self.interval)
        self.interval = (lo, hi)
        if self.box is None:
            half = [FIBER_FACTOR * np.sqrt(self.radius_y)] * self.a + \
                   [FIBER_FACTOR * np.sqrt(self.radius_z)] * self.b
            self.box = Box(tuple([lo] + [-h for h in half]), tuple([hi] + half))
        if self.box.dim != self.dim:
            raise PreconditionError("box dimension must be 1 + a + b", stage="eliminate")
        self.F = product(self.k, self.a, self.b)

    @property
    def dim(self):
        return 1 + self.a + self.b

    @property
    def y_axes(self):
        return tuple(range(1, 1 + self.a))

    @property
    def z_axes(self):
        return tuple(range(1 + self.a, 1 + self.a + self.b))

    def lift(self, u):
        """Points (u, 0, 0) of the u-axis."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.hstack([u[:, None], np.zeros((len(u), self.a + self.b))])


def product(k: Field, a: int, b: int) -> Field:
    def fn(xs):
        out = k.compose([xs[0]])
        for y in xs[1:1 + a]:
            out = out - y * y
        for z in xs[1 + a:1 + a + b]:
            out = out + z * z
        return out

    return LambdaField(1 + a + b, fn, name="F")


def extend(model: ProductModel, k_new: Field) -> Field:
    """Carry a change k -> k_new of the factor to the product by nested elevations."""
    if k_new is model.k:
        return model.F
    a, b = model.a, model.b
    if b:
        G = product(model.k, 0, b)
        tube_z = TubeChart(1 + b, (0,), model.radius_z, model.k)
        G_new = ElevatedField(G, tube_z, k_new, 1.0)
    else:
        G, G_new = model.k, k_new
    if not a:
        return G_new
    base_axes = (0,) + model.z_axes
    tube_y = TubeChart(model.dim, base_axes, model.radius_y, -G)
    return -ElevatedField(-model.F, tube_y, -G_new, 1.0)


def check_capacity(model: ProductModel, k_new: Field, count=4001):
    """Raising must stay within r_z/3 (when b > 0); lowering within r_y/3 (when a > 0)."""
    u = np.linspace(*model.interval, count)[:, None]
    diff = k_new(u) - model.k(u)
    up, down = float(max(diff.max(), 0.0)), float(max(-diff.min(), 0.0))
    if model.b and up > model.radius_z / 3:
        raise PreconditionError("z-tube too thin for the raise", stage="eliminate",
                                witness={"raise": up, "capacity": model.radius_z / 3})
    if model.a and down > model.radius_y / 3:
        raise PreconditionError("y-tube too thin for the lowering", stage="eliminate",
                                witness={"lower": down, "capacity": model.radius_y / 3})
    return {"raise": up, "lower": down}


def blend_pg(Z, F_t: Field, r: float, argument=None):
    """Z_t = (1 - beta(w)) grad F_t + beta(w) Z with w = F_t/r (or ``argument(pts)``)."""
    if not r > 0:
        raise PreconditionError("blend radius must be positive", stage="eliminate")

    def field(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        g = F_t.gradient(pts)
        w = argument(pts) if argument is not None else F_t(pts) / r
        wt = beta(np.asarray(w, dtype=float))[:, None]
        z = np.asarray(Z(pts), dtype=float).reshape(g.shape)
        return (1 - wt) * g + wt * z

    return field


def tube_excess(model: ProductModel):
    """max(|y|^2/r_y, |z|^2/r_z) - 1: nonpositive on the tubes, where F_s may differ from F."""
    def arg(pts):
        pts = np.atleast_2d(pts)
        parts = [np.zeros(len(pts))]
        if model.a:
            parts.append(np.sum(pts[:, 1:1 + model.a] ** 2, axis=1) / model.radius_y)
        if model.b:
            parts.append(np.sum(pts[:, 1 + model.a:] ** 2, axis=1) / model.radius_z)
        return np.max(parts, axis=0) - 1.0

    return arg


@dataclass
class EliminationReport:
    timeline: list
    t0: float
    support: Box
    outside_max_dev: float
    monotone_min_step: float
    pgf: list
    stages: dict = dc_field(default_factory=dict)

    @property
    def counts(self):
        return [row["count"] for row in self.timeline]

    @property
    def passed(self):
        before, after = self.timeline[0], self.timeline[-1]
        degenerate = [row for row in self.timeline if row.get("degenerate")]
        return (before["count"] == 2 and after["count"] == 0 and len(degenerate) == 1
                and self.outside_max_dev == 0.0 and self.monotone_min_step >= -1e-10
                and all(p["passed"] for p in self.pgf))

    def to_dict(self):
        return {
            "timeline": [{**{k: v for k, v in row.items() if k != "census"},
                          "census": [c.to_dict() for c in row["census"]]} for row in self.timeline],
            "t0": self.t0,
            "support": self.support.as_list(),
            "outside_max_dev": self.outside_max_dev,
            "monotone_min_step": self.monotone_min_step,
            "pgf": self.pgf,
            "stages": self.stages,
            "passed": self.passed,
        }


def _factor_census(k: Field, interval, grid=4096):
    box = Box((interval[0],), (interval[1],))
    cen = critical_census(k, box, grid)
    if len(cen) != 2 or cen[0].index != 1 or cen[1].index != 0:
        raise PreconditionError("the factor needs exactly a hump followed by a dip on the interval",
                                stage="eliminate", witness={"census": [c.to_dict() for c in cen]})
    return cen


def factor_path(model: ProductModel):
    """Stages 1 and 2 on the factor: (path on s in [0, S], stage info)."""
    k, (lo, hi) = model.k, model.interval
    hump, dip = _factor_census(k, model.interval)
    c, d = hump.location[0], dip.location[0]
    x = np.linspace(d, hi, 4001)[1:-1]
    info = {"hump": c, "dip": d}
    if np.max(k(x[:, None])) > hump.value:
        lowered, stage1 = k, None
        info["lowering"] = "skipped"
    else:
        n = model.nape if model.nape is not None else d + 0.6 * (hi - d)
        kn = float(k(np.array([[n]]))[0])
        if not (d < n < hi and kn > dip.value):
            raise PreconditionError("nape must lie right of the dip with a higher value", stage="eliminate",
                                    witness={"nape": n})
        u_prime = (2 * dip.value + kn) / 3
        u = (dip.value + 2 * kn) / 3
        window = Box((lo,), (d,))
        tube = TubeChart(1, (0,), 1.0, k, window=window, box=window)
        try:
            stage1 = lower_value(k, tube, hump.value, u, u_prime)
        except MorsevalError as err:
            err.stage = "eliminate/lower"
            raise
        lowered = stage1.end()
        info["lowering"] = {"nape": n, "kappa": hump.value, "u": u, "u_prime": u_prime,
                            "support": stage1.support.as_list()}
    try:
        frame = D.detect(lowered, model.interval)
        drom = D.path(lowered, frame)
    except MorsevalError as err:
        err.stage = "eliminate/dromedary"
        raise
    offset = 1.0 if stage1 is not None else 0.0
    info["frame"] = frame.to_dict()
    info["offset"] = offset

    def family(s):
        if s <= offset and stage1 is not None:
            return stage1(s)
        return drom(s - offset)

    u_lo, u_hi = frame.b, frame.n
    if stage1 is not None:
        u_lo = min(u_lo, stage1.support.lo[0])
        u_hi = max(u_hi, stage1.support.hi[0])
    landmarks = {k_: v + offset for k_, v in drom.landmarks.items()}
    return DeformationPath(family, 0.0, offset + 2.0, Box((u_lo,), (u_hi,)), landmarks, dim=1,
                           info={**info, "dromedary": drom, "stage1": stage1})


def eliminate_pair(model: ProductModel, verify=True, grid=None):
    """Path on F removing the pair, with its report (``None`` when verify is False)."""
    kp = factor_path(model)
    ends = [kp(s) for s in (kp.info["offset"], kp.s_max)]
    if kp.info["stage1"] is not None:
        ends.append(kp.info["stage1"].end())
    caps = [check_capacity(model, e) for e in ends]
    lo = [kp.support.lo[0]] + [-np.sqrt(model.radius_y)] * model.a + [-np.sqrt(model.radius_z)] * model.b
    hi = [kp.support.hi[0]] + [np.sqrt(model.radius_y)] * model.a + [np.sqrt(model.radius_z)] * model.b
    support = Box(tuple(lo), tuple(hi))
    if np.any(np.array(lo) <= np.array(model.box.lo)) or np.any(np.array(hi) >= np.array(model.box.hi)):
        raise PreconditionError("support is not strictly inside the box", stage="eliminate",
                                witness={"support": support.as_list(), "box": model.box.as_list()})

    def family(s):
        return extend(model, kp(s))

    path = DeformationPath(family, kp.s_min, kp.s_max, support, kp.landmarks, dim=model.dim,
                           info={"factor": kp, "capacity": caps})
    report = verify_elimination(model, path, grid) if verify else None
    return path, report


def _grid(model, grid):
    if grid is not None:
        return grid
    return Grid(tuple([512] + [17] * (model.a + model.b)))


def verify_elimination(model: ProductModel, path: DeformationPath, grid=None, samples=4000, seed=0):
    kp = path.info["factor"]
    offset = kp.info["offset"]
    t0 = path.landmarks["t0"]
    g = _grid(model, grid)
    s_values = sorted({0.0, offset + 0.5, offset + 1.0, t0 - 0.05, t0, t0 + 0.05, path.s_max}
                      | ({0.5, 1.0} if offset else set()))
    timeline = []
    for s in s_values:
        tol = 1e-6 if s == t0 else 1e-8
        cen = critical_census(path(s), model.box, g, tol)
        timeline.append({"s": s, "count": len(cen), "census": cen,
                         "degenerate": any(not c.nondegenerate for c in cen),
                         "on_axis": all(np.max(np.abs(c.location[1:]), initial=0.0) <= 1e-6 for c in cen)})

    rng = np.random.default_rng(seed)
    lo, hi = np.array(model.box.lo), np.array(model.box.hi)
    pts = lo + (hi - lo) * rng.uniform(size=(samples, model.dim))
    pts = pts[~path.support.contains(pts)]
    F0 = model.F(pts)
    outside = max(float(np.max(np.abs(path(s)(pts) - F0), initial=0.0)) for s in s_values)

    inner = path.support.lo + path.support.widths * rng.uniform(size=(samples // 2, model.dim))
    ss = np.linspace(offset, path.s_max, 9)
    vals = np.array([path(s)(inner) for s in ss])
    mono = float(np.min(np.diff(vals, axis=0)))

    pgf = []
    arg = tube_excess(model)
    Z = model.F.gradient
    pg_grid = Grid(tuple([129] + [9] * (model.a + model.b)))
    for s in (0.0, offset + 0.5, t0 + 0.1, path.s_max):
        Zs = blend_pg(Z, path(s), 1.0, argument=arg)
        rep = verify_pgf(Zs, path(s), model.box, pg_grid, 1e-6)
        pgf.append({"s": s, **rep.to_dict()})

    stages = {k: v for k, v in kp.info.items() if k not in ("dromedary", "stage1")}
    stages["capacity"] = path.info["capacity"]
    return EliminationReport(timeline, t0, path.support, outside, mono, pgf, stages)
