"""Cancel the hump-dip pair of a one-variable dromedary function.

A dromedary function ``k`` on an interval has ``k' <= 0`` exactly on one
interval ``[c, d]`` (a local max at c, a local min at d) and is increasing
elsewhere; some later point ``n`` (the nape) sits above ``k(c)``.  The
cancellation replaces ``k`` near ``[c, d]`` by cubic models: first one with
critical points exactly at c and d, then one with none, and blends between
them.  Along the blend the pair merges into a single cubic-type degenerate
point at the landmark ``t0`` and disappears.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from . import jet as J
from .bump import CutoffSpec, beta, beta_inverse
from .errors import CertificationError, PreconditionError
from .fields import Box, Field, Function1D, LambdaField, critical_census, newton_refine
from .quadrature import CumulativeIntegral
from .val import DeformationPath, patch, take

FRAME_GRID = 10_000
MARGIN = 1e-9
NAMES = ("b_prime", "b", "c_prime", "c", "d", "d_prime", "n", "n_prime")


class DromedaryError(PreconditionError):
    stage = "dromedary"


def _values(k: Field, x, order=2):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    jt = k.jet(x[:, None], order)
    out = [jt.val]
    if order >= 1:
        out.append(jt.grad[:, 0])
    if order >= 2:
        out.append(jt.hess[:, 0, 0])
    return out


# frames ------------------------------------------------------------------------

@dataclass(frozen=True)
class DromedaryFrame:
    b_prime: float
    b: float
    c_prime: float
    c: float
    d: float
    d_prime: float
    n: float
    n_prime: float
    interval: tuple

    def points(self):
        return tuple(getattr(self, k) for k in NAMES)

    @property
    def gap(self):
        return self.d - self.c

    def to_dict(self):
        out = {k: getattr(self, k) for k in NAMES}
        out["interval"] = list(self.interval)
        return out


def check_frame(k: Field, frame: DromedaryFrame, grid=FRAME_GRID):
    """Re-verify the ordering and the dromedary condition on a dense grid."""
    pts = frame.points()
    lo, hi = frame.interval
    if not (lo < pts[0] and all(a < b for a, b in zip(pts, pts[1:])) and pts[-1] < hi):
        raise DromedaryError("frame points must satisfy b' < b < c' < c < d < d' < n < n' inside the interval",
                             witness=frame.to_dict())
    c, d = frame.c, frame.d
    x = np.linspace(lo, hi, grid)
    _, kp = _values(k, x, 1)
    near = (np.abs(x - c) < 1e-9) | (np.abs(x - d) < 1e-9)
    inner = (x > c) & (x < d) & ~near
    outer = ((x < c) | (x > d)) & ~near
    if np.any(kp[inner] > 0):
        i = int(np.flatnonzero(inner)[np.argmax(kp[inner])])
        raise DromedaryError("k' must be nonpositive on [c, d]", witness={"x": float(x[i]), "k'": float(kp[i])})
    if np.any(kp[outer] <= 0):
        i = int(np.flatnonzero(outer)[np.argmin(kp[outer])])
        raise DromedaryError("k' must be positive off [c, d]", witness={"x": float(x[i]), "k'": float(kp[i])})
    ends = _values(k, [c, d], 1)[1]
    if np.max(np.abs(ends)) > 1e-8:
        raise DromedaryError("c and d must be critical", witness={"k'(c)": float(ends[0]), "k'(d)": float(ends[1])})
    kc, kdp, kn = _values(k, [c, frame.d_prime, frame.n], 0)[0]
    if not kc < kn:
        raise DromedaryError("missing n with k(n) > k(c)", witness={"k(c)": float(kc), "k(n)": float(kn)})
    if not kdp < kc:
        raise DromedaryError("missing d' with k(d') < k(c)", witness={"k(c)": float(kc), "k(d')": float(kdp)})
    return frame


def detect(k: Field, interval, points=None, grid=FRAME_GRID) -> DromedaryFrame:
    """Locate c, d from the sign of k' and place (or accept) the other six points."""
    lo, hi = (float(v) for v in interval)
    if not lo < hi:
        raise DromedaryError("interval needs lo < hi", witness={"interval": [lo, hi]})
    x = np.linspace(lo, hi, grid + 2)[1:-1]
    kv, kp = _values(k, x, 1)
    neg = kp <= 0
    if not np.any(neg):
        raise DromedaryError("no nonpositive-derivative interval")
    runs = np.flatnonzero(np.diff(neg.astype(int)) == 1).size + int(neg[0])
    if runs > 1:
        starts = np.flatnonzero(np.diff(neg.astype(int)) == 1) + 1
        raise DromedaryError("{k' <= 0} is disconnected", witness={"second_run_at": float(x[starts[-1]])})
    idx = np.flatnonzero(neg)
    i0, i1 = int(idx[0]), int(idx[-1])
    if i0 == 0 or i1 == len(x) - 1:
        raise DromedaryError("{k' <= 0} reaches the end of the interval",
                             witness={"x": float(x[i0] if i0 == 0 else x[i1])})
    box = Box((lo,), (hi,))
    # the zeros of k' are bracketed by the grid cells at both ends of the run
    c = brentq(lambda t: _values(k, t, 1)[1][0], x[i0 - 1], x[i0], xtol=1e-15, rtol=1e-15)
    d = brentq(lambda t: _values(k, t, 1)[1][0], x[i1], x[i1 + 1], xtol=1e-15, rtol=1e-15)
    ref = newton_refine(k, [[c], [d]], box, tol=1e-10)
    if len(ref) == 2:
        c, d = sorted(float(v) for v in ref[:, 0])
    if not d - c > 1e-9:
        raise DromedaryError("no nonpositive-derivative interval (only a degenerate critical point)",
                             witness={"x": c})
    if points is not None:
        vals = [float(points[k_]) for k_ in NAMES] if isinstance(points, dict) else [float(v) for v in points]
        if len(vals) != 8:
            raise DromedaryError("a frame needs eight points")
        vals[3], vals[4] = c, d
        return check_frame(k, DromedaryFrame(*vals, interval=(lo, hi)), grid)

    kc = float(_values(k, c, 0)[0][0])
    gap = d - c
    left = c - lo
    c_prime = c - min(gap / 4, left / 4)
    b = c - left / 2
    b_prime = c - 3 * left / 4
    off = gap / 4
    for _ in range(60):
        if d + off < hi and _values(k, d + off, 0)[0][0] < kc:
            break
        off /= 2
    else:
        raise DromedaryError("missing d' with k(d') < k(c)")
    d_prime = d + off
    after = (x > d_prime) & (kv > kc)
    if not np.any(after):
        raise DromedaryError("missing n with k(n) > k(c)", witness={"k(c)": kc})
    x0 = float(x[np.flatnonzero(after)[0]])
    n = x0 + 0.2 * (hi - x0)
    n_prime = x0 + 0.5 * (hi - x0)
    frame = DromedaryFrame(b_prime, b, c_prime, c, d, d_prime, n, n_prime, (lo, hi))
    return check_frame(k, frame, grid)


# rahla cubics --------------------------------------------------------------------

class RahlaError(DromedaryError):
    pass


@dataclass(frozen=True)
class Rahla:
    """p(x) = P((x - d)/L) with P(X) = lam X - 3 ct X^2 + 2 X^3 and ct = (c - d)/L."""

    flavor: int
    c: float
    d: float
    scale: float = 1.0

    @property
    def lam(self):
        return 2.0 * self.flavor

    @property
    def ct(self):
        return (self.c - self.d) / self.scale

    @property
    def coefficients(self):
        """Coefficients of P in powers of the rescaled variable (x - d)/L."""
        return (0.0, self.lam, -3 * self.ct, 2.0)

    def _X(self, x):
        return (np.asarray(x, dtype=float) - self.d) / self.scale

    def __call__(self, x):
        X = self._X(x)
        return self.lam * X - 3 * self.ct * X ** 2 + 2 * X ** 3

    def d1(self, x):
        X = self._X(x)
        return (self.lam - 6 * self.ct * X + 6 * X ** 2) / self.scale

    def d2(self, x):
        X = self._X(x)
        return (-6 * self.ct + 12 * X) / self.scale ** 2

    def field(self):
        return Function1D(self.__call__, self.d1, self.d2, name=f"p{self.flavor}")

    def critical_points(self):
        """Real zeros of p' in x."""
        disc = 36 * self.ct ** 2 - 24 * self.lam
        if disc < 0:
            return []
        r = np.sqrt(disc)
        roots = sorted({(6 * self.ct - r) / 12, (6 * self.ct + r) / 12})
        return [self.d + self.scale * X for X in roots]

    def to_dict(self):
        return {"flavor": self.flavor, "c": self.c, "d": self.d, "scale": self.scale,
                "coefficients": list(self.coefficients)}


def default_scale(frame: DromedaryFrame, flavor: int):
    gap = frame.gap
    if flavor == 0 or gap < 2 / np.sqrt(3):
        return 1.0
    return 2.0 * gap


def validate_rahla(p: Rahla, n: float):
    if abs(p(p.d)) > 0:
        raise RahlaError("rahla must vanish at d", witness={"clause": "p(d)=0"})
    if not p.d1(n) > 0:
        raise RahlaError("rahla must increase at n", witness={"clause": "p'(n)>0", "p'(n)": float(p.d1(n))})
    crit = p.critical_points()
    if p.flavor == 0:
        ok = len(crit) == 2 and abs(crit[0] - p.c) <= 1e-9 * (1 + abs(p.c)) and abs(crit[1] - p.d) <= 1e-9 * (1 + abs(p.d))
        if not ok:
            raise RahlaError("zeros of p0' must be exactly {c, d}", witness={"clause": "zeros", "zeros": crit})
    elif crit:
        X = p.ct / 2
        raise RahlaError("p1' must not vanish", witness={"clause": "zeros", "zeros": crit,
                                                         "min_p1'": float(p.d1(p.d + p.scale * X))})
    return p


def rahla(frame: DromedaryFrame, flavor: int, scale: float | None = None) -> Rahla:
    if flavor not in (0, 1):
        raise PreconditionError("rahla flavor must be 0 or 1", stage="dromedary")
    L = default_scale(frame, flavor) if scale is None else float(scale)
    if not L > 0:
        raise PreconditionError("rahla scale must be positive", stage="dromedary")
    return validate_rahla(Rahla(flavor, frame.c, frame.d, L), frame.n)


# scolie ------------------------------------------------------------------------

@dataclass
class ScolieResult:
    eta: float
    e: float
    delta: float
    delta1: float
    offset: float          # constant C with g1 = k(c) + eta (1 + p) - C on [c', d']
    A: float               # g1 = A + eta p on [c', d']
    g1: Field
    rahla: Rahla
    conclusions: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return {"eta": self.eta, "e": self.e, "delta": self.delta, "delta1": self.delta1,
                "offset": self.offset, "A": self.A, "rahla": self.rahla.to_dict(),
                "conclusions": self.conclusions}


class RaisedField(Field):
    """k + ramp (g~ - k), read off the cubic model directly on its window."""

    dim = 1

    def __init__(self, k: Field, g_tilde: Field, ramp: CutoffSpec, window, model: Field):
        self.k, self.g_tilde, self.ramp = k, g_tilde, ramp
        self.window, self.model = window, model

    def compose(self, inputs):
        (x,) = inputs
        v = np.atleast_1d(np.asarray(J.value(x), dtype=float))
        pure = (v >= self.window[0]) & (v <= self.window[1])
        out = self.model.compose([x])
        rest = np.flatnonzero(~pure)
        if rest.size:
            xr = take(x, rest)
            kx = self.k.compose([xr])
            piece = kx + self.ramp.jet(xr) * (self.g_tilde.compose([xr]) - kx)
            out = patch(out, rest, piece)
        return out


def _blend_piece(k: Field, q1, q1p, q1pp, e, delta1, offset, alpha: CutoffSpec):
    """Value and derivatives of the raised function between k's branch and q1's branch."""
    lo = e - delta1

    def integrand(t):
        return alpha(t) * (_values(k, t, 1)[1] - q1p(t))

    J_ = CumulativeIntegral(integrand, lo, e, panels=64, order=16)

    def f0(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left, right = x <= lo, x >= e
        mid = ~(left | right)
        out[left] = q1(x[left]) - offset
        if np.any(right):
            out[right] = _values(k, x[right], 0)[0]
        if np.any(mid):
            xm = x[mid]
            out[mid] = _values(k, xm, 0)[0] + (J_.total - J_(xm))
        return out

    def f1(x):
        x = np.asarray(x, dtype=float)
        a = alpha(x)
        kp = _values(k, x, 1)[1]
        return a * q1p(x) + (1 - a) * kp

    def f2(x):
        x = np.asarray(x, dtype=float)
        a, da = alpha(x), alpha.derivative(x)
        _, kp, kpp = _values(k, x, 2)
        return a * q1pp(x) + (1 - a) * kpp + da * (q1p(x) - kp)

    return Function1D(f0, f1, f2, name="g~1"), J_


def scolie(k: Field, frame: DromedaryFrame, q: Rahla, margin=MARGIN, grid=4001) -> ScolieResult:
    """Raise k to a function that is A + eta q on [c', d'] and k outside (b, n)."""
    c, d, n = frame.c, frame.d, frame.n
    kc = float(_values(k, c, 0)[0][0])
    kn = float(_values(k, n, 0)[0][0])
    X1 = np.linspace(frame.b_prime, frame.d_prime, grid)
    X2 = np.linspace(frame.d_prime, frame.n_prime, grid)
    k1v = _values(k, X1, 0)[0]
    k2p = _values(k, X2, 1)[1]
    p1, pp2, pn = q(X1), q.d1(X2), float(q(n))

    eta = 1.0
    while True:
        ok1 = np.all(k1v < kc + eta * (1 + p1) - margin)
        q1p = eta * pp2
        ok2 = np.all(q1p > margin) and np.all(q1p < k2p - margin)
        ok3 = kc + eta * (1 + pn) < kn - margin
        if ok1 and ok2 and ok3:
            break
        eta /= 2
        if eta < 1e-12:
            raise DromedaryError("eta underflow before the scolie conditions hold", stage="scolie",
                                 witness={"eta": eta, "below": bool(ok1), "slopes": bool(ok2), "nape": bool(ok3)})

    def q1(x):
        return kc + eta * (1 + q(x))

    def q1p_(x):
        return eta * q.d1(x)

    def q1pp(x):
        return eta * q.d2(x)

    def gap_fn(x):
        return _values(k, x, 0)[0][0] - q1(x)

    if not (gap_fn(frame.d_prime) < 0 < gap_fn(n)):
        raise DromedaryError("no crossing e of k and q1 in (d', n)", stage="scolie")
    e = brentq(gap_fn, frame.d_prime, n, xtol=1e-15, rtol=1e-15)
    delta = (frame.c_prime - frame.b) / 2
    room = float(np.min(q1(X1) - k1v))

    delta1 = (e - frame.d_prime) / 2
    while True:
        alpha = CutoffSpec("alpha_dec", delta1, e)
        lo = e - delta1
        tail = CumulativeIntegral(lambda t: alpha(t) * (_values(k, t, 1)[1] - q1p_(t)), lo, e, panels=64)
        offset = float(q1(lo) - _values(k, lo, 0)[0][0] - tail.total)
        if offset < room - margin:
            break
        delta1 /= 2
        if delta1 < 1e-12:
            raise DromedaryError("blend width underflow in the scolie", stage="scolie")

    g_tilde, _ = _blend_piece(k, q1, q1p_, q1pp, e, delta1, offset, alpha)
    ramp = CutoffSpec("beta_inc", delta, frame.b)
    g1 = RaisedField(k, g_tilde, ramp, (frame.b + delta, e - delta1),
                     Function1D(lambda x: q1(x) - offset, q1p_, q1pp, name="A + eta p"))
    A = kc + eta - offset
    res = ScolieResult(eta, e, delta, delta1, offset, A, g1, q)
    res.conclusions = verify_scolie(k, frame, res)
    return res


def _cubic_fit_residual(x, y):
    coef = np.polyfit(x - np.mean(x), y, 3)
    return float(np.max(np.abs(np.polyval(coef, x - np.mean(x)) - y)))


def verify_scolie(k: Field, frame: DromedaryFrame, res: ScolieResult, grid=20001):
    lo, hi = frame.interval
    x = np.linspace(lo, hi, grid)
    kv = _values(k, x, 0)[0]
    gv, gp = _values(res.g1, x, 1)
    c, d = frame.c, frame.d
    outside = (x <= frame.b) | (x >= frame.n)
    below = float(np.min(gv - kv))
    equal_outside = bool(np.all(gv[outside] == kv[outside]))
    off = ((x < c) | (x > d)) & (np.abs(x - c) > 1e-6) & (np.abs(x - d) > 1e-6)
    min_slope = float(np.min(gp[off]))
    gc, gn = _values(res.g1, [c, frame.n], 0)[0]
    w = np.linspace(frame.c_prime, frame.d_prime, 2001)
    gw = _values(res.g1, w, 0)[0]
    model = res.A + res.eta * res.rahla(w)
    out = {
        "k_le_g1": below >= -1e-12,
        "min_g1_minus_k": below,
        "equal_outside": equal_outside,
        "g1_increasing_off_cd": min_slope > 0,
        "min_slope_off_cd": min_slope,
        "g1c_lt_g1n": bool(gc < gn),
        "model_residual": float(np.max(np.abs(gw - model))),
        "cubic_fit_residual": _cubic_fit_residual(w, gw),
    }
    out["passed"] = bool(out["k_le_g1"] and equal_outside and out["g1_increasing_off_cd"]
                         and out["g1c_lt_g1n"] and out["cubic_fit_residual"] <= 1e-8)
    if not out["passed"]:
        raise CertificationError("scolie conclusions fail", stage="scolie", witness=out)
    return out


# the cancellation path -------------------------------------------------------------

def blend(f: Field, g: Field, w):
    """f + w (g - f); exact where g equals f."""
    w = float(w)
    if w == 0:
        return f
    if w == 1:
        return g

    def fn(xs):
        a = f.compose(xs)
        return a + w * (g.compose(xs) - a)

    return LambdaField(f.dim, fn)


def min_slope(k: Field, frame: DromedaryFrame, count=2001):
    """Minimum of k' over [c', d'] (grid plus a local parabolic refinement)."""
    x = np.linspace(frame.c_prime, frame.d_prime, count)
    _, kp, kpp = _values(k, x, 2)
    i = int(np.argmin(kp))
    best = kp[i]
    if kpp[i] != 0:
        # one Newton step on k'' = 0 from the best node
        jt = k.jet(np.array([[x[i]]]), 2)
        h = 1e-5
        k3 = (_values(k, [x[i] + h], 2)[2][0] - _values(k, [x[i] - h], 2)[2][0]) / (2 * h)
        if k3 > 0:
            xs = np.clip(x[i] - jt.hess[0, 0, 0] / k3, frame.c_prime, frame.d_prime)
            best = min(best, _values(k, xs, 1)[1][0])
    return float(best)


def closed_form_t0(eta1, eta2, rescaled_gap):
    """Blend parameter in (1, 2) where the blended cubic derivative first stops vanishing."""
    g2 = 1.5 * rescaled_gap ** 2
    w0 = g2 * eta1 / (eta2 * (2 - g2) + g2 * eta1)
    return 1.0 + float(beta_inverse(w0))


def path(k: Field, frame: DromedaryFrame, scale: float | None = None, bisection_steps=60) -> DeformationPath:
    """The monotone path k -> k1 (s in [0,1]) -> k2 (s in [1,2]) with its landmark t0."""
    L = 2.0 * frame.gap if scale is None else float(scale)
    p0 = rahla(frame, 0, L)
    p1 = rahla(frame, 1, L)
    first = scolie(k, frame, p0)
    k1 = first.g1
    check_frame(k1, frame)
    second = scolie(k1, frame, p1)
    k2 = second.g1

    def family(s):
        if s <= 0:
            return k
        if s < 1:
            return blend(k, k1, beta(s))
        if s == 1:
            return k1
        if s < 2:
            return blend(k1, k2, beta(s - 1))
        return k2

    # bisection on "k_s' has no zero in [c', d']"
    a, b = 1.0, 2.0
    for _ in range(bisection_steps):
        mid = 0.5 * (a + b)
        if min_slope(family(mid), frame) > 0:
            b = mid
        else:
            a = mid
    t0 = 0.5 * (a + b)
    t0_cf = closed_form_t0(first.eta, second.eta, frame.gap / L)
    landmarks = {"t0": t0, "t0_closed_form": t0_cf}
    info = {"frame": frame, "scale": L, "scolie": [first, second], "k1": k1, "k2": k2,
            "degenerate_x": 0.5 * (frame.c + frame.d)}
    return DeformationPath(family, 0.0, 2.0, Box((frame.b,), (frame.n,)), landmarks, dim=1, info=info)


# verification ------------------------------------------------------------------

def census_sweep(p: DeformationPath, s_values, grid=4096, tol=1e-8):
    frame = p.info["frame"]
    box = Box((frame.interval[0],), (frame.interval[1],))
    out = []
    for s in s_values:
        cen = critical_census(p(s), box, grid, tol)
        out.append({"s": float(s), "count": len(cen), "points": cen})
    return out


def degenerate_at_t0(p: DeformationPath, grid=4096, tol=1e-6):
    """Census at the landmark; the degenerate point is only located to sqrt(roundoff)."""
    frame = p.info["frame"]
    box = Box((frame.interval[0],), (frame.interval[1],))
    cen = critical_census(p(p.landmarks["t0"]), box, grid, tol)
    third = None
    if len(cen) == 1:
        x0 = cen[0].location[0]
        h = 1e-4
        f = p(p.landmarks["t0"])
        third = float((_values(f, [x0 + h], 2)[2][0] - _values(f, [x0 - h], 2)[2][0]) / (2 * h))
    return {"census": cen, "count": len(cen),
            "degenerate": len(cen) == 1 and not cen[0].nondegenerate,
            "third_derivative": third}


def verify_path(p: DromedaryFrame | DeformationPath, k: Field | None = None, s_count=200, x_count=400):
    """Monotonicity, support and cubic-window checks on an (s, x) grid."""
    frame = p.info["frame"]
    k = p.start() if k is None else k
    lo, hi = frame.interval
    x = np.linspace(lo, hi, x_count)
    s = np.linspace(p.s_min - 0.1, p.s_max + 0.1, s_count)
    K = np.array([p(si)(x[:, None]) for si in s])
    k0 = k(x[:, None])
    steps = np.diff(K, axis=0)
    outside = (x <= frame.b) | (x >= frame.n)
    w = np.linspace(frame.c_prime, frame.d_prime, 401)
    cubic = max(_cubic_fit_residual(w, p(si)(w[:, None])) for si in s if si >= 1)
    out = {
        "monotone_min_step": float(np.min(steps)),
        "monotone": bool(np.min(steps) >= -1e-10),
        "outside_max_dev": float(np.max(np.abs(K[:, outside] - k0[outside]))),
        "cubic_fit_residual": cubic,
    }
    out["equal_outside"] = out["outside_max_dev"] <= 1e-10
    out["cubic_window"] = cubic <= 1e-8
    out["passed"] = out["monotone"] and out["equal_outside"] and out["cubic_window"]
    return out
