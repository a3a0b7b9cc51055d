"""Path method: conjugate h to k through the interpolation k + t (h - k).

The time-dependent field Z_t solves Z_t(k + t d) = -d with d = h - k; its flow
phi_t then satisfies (k + t d) o phi_t = k, hence h o phi_1 = k.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PreconditionError
from .fields import Box, Field, Grid, ScalarField

SINGULAR = 1e-8
LHOPITAL_DEPTH = 3


class MoserError(PreconditionError):
    stage = "moser"


@dataclass
class MoserProblem:
    h: ScalarField
    k: ScalarField
    W: np.ndarray
    box: Box | None = None  # where trajectories must stay; unchecked when None

    def __post_init__(self):
        if self.h.vars != self.k.vars:
            raise PreconditionError("h and k must share their variables", stage="moser")
        self.W = np.asarray(self.W, dtype=float).reshape(-1, self.h.dim)
        self.d = self.h - self.k
        if len(self.W):
            dw = np.abs(self.d(self.W))
            if np.any(dw > 1e-10):
                i = int(np.argmax(dw))
                raise PreconditionError("d = h - k must vanish on W", stage="moser",
                                        witness={"point": self.W[i].tolist(), "d": float(dw[i])})
        self._derivs = {}

    @property
    def dim(self):
        return self.h.dim

    def _nth(self, field: ScalarField, j):
        key = (id(field), j)
        if key not in self._derivs:
            v = field.vars[0]
            self._derivs[key] = field.derivative_field(*([v] * j)) if j else field
        return self._derivs[key]


def moser_field(p: MoserProblem, t: float, x):
    """Z_t at the points ``x`` (shape (m,) in 1D, (m, n) otherwise)."""
    if p.dim == 1:
        x = np.asarray(x, dtype=float).reshape(-1)
        pts = x[:, None]
        num = -p.d(pts)
        den = p._nth(p.k, 1)(pts) + t * p._nth(p.d, 1)(pts)
        out = np.zeros_like(x)
        ok = np.abs(den) > SINGULAR
        out[ok] = num[ok] / den[ok]
        for i in np.flatnonzero(~ok):
            out[i] = _lhopital(p, t, pts[i:i + 1])
        return out
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    g = p.k.gradient(pts) + t * p.d.gradient(pts)
    dv = p.d(pts)
    n2 = np.sum(g * g, axis=1)
    out = np.zeros_like(pts)
    ok = np.sqrt(n2) > SINGULAR
    out[ok] = (-dv[ok] / n2[ok])[:, None] * g[ok]
    bad = ~ok & (np.abs(dv) > 1e-12)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise MoserError("interpolant is critical where d does not vanish", witness={"point": pts[i].tolist(),
                                                                                     "t": t})
    return out


def _lhopital(p, t, pt):
    for j in range(LHOPITAL_DEPTH + 1):
        num = -p._nth(p.d, j)(pt)[0]
        den = p._nth(p.k, j + 1)(pt)[0] + t * p._nth(p.d, j + 1)(pt)[0]
        if abs(den) > SINGULAR:
            return num / den
        if abs(num) > SINGULAR:
            break
    raise MoserError("singular denominator with non-vanishing numerator (vanishing-order condition fails)",
                     witness={"point": pt.ravel().tolist(), "t": t})


@dataclass
class Isotopy:
    problem: MoserProblem
    sub_box: Box
    steps: int
    starts: np.ndarray
    history: np.ndarray  # (steps+1, m, n)
    residual: float
    fixed_W_error: float
    times: np.ndarray = dc_field(default=None)

    @property
    def endpoints(self):
        return self.history[-1]

    def flow(self, t, x):
        return _rk4(self.problem, np.atleast_2d(x), self.steps, t_end=t)[-1]


def _rk4(p: MoserProblem, x0, steps, t_end=1.0, check_box=True):
    x = np.array(x0, dtype=float).reshape(len(x0), -1)
    dt = t_end / steps
    hist = [x.copy()]

    def Z(t, y):
        return moser_field(p, t, y).reshape(y.shape) if p.dim > 1 else moser_field(p, t, y[:, 0])[:, None]

    for i in range(steps):
        t = i * dt
        k1 = Z(t, x)
        k2 = Z(t + dt / 2, x + dt / 2 * k1)
        k3 = Z(t + dt / 2, x + dt / 2 * k2)
        k4 = Z(t + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        bad = ~np.all(np.isfinite(x), axis=1)
        if check_box and p.box is not None:
            bad |= ~p.box.contains(np.where(np.isfinite(x), x, 0.0))
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise MoserError("trajectory escapes the domain", stage="moser",
                             witness={"start": hist[0][j].tolist(), "t": (i + 1) * dt})
        hist.append(x.copy())
    return np.array(hist)


def conjugacy_residual(p: MoserProblem, starts, ends):
    return float(np.max(np.abs(p.h(ends) - p.k(starts)))) if len(starts) else 0.0


def moser_isotopy(p: MoserProblem, sub_box: Box, steps: int = 200, samples: int = 201) -> Isotopy:
    """Integrate the path-method flow from sample points of ``sub_box`` (classical RK4)."""
    if steps < 1:
        raise PreconditionError("steps must be positive", stage="moser")
    per = samples if p.dim == 1 else max(5, int(round(samples ** (1 / p.dim))))
    starts = Grid.uniform(p.dim, per).points(sub_box)
    if len(p.W):
        starts = np.vstack([starts, p.W])
    hist = _rk4(p, starts, steps)
    res = conjugacy_residual(p, starts, hist[-1])
    fixed = 0.0
    if len(p.W):
        fixed = float(np.max(np.abs(hist[:, -len(p.W):, :] - p.W[None])))
    return Isotopy(p, sub_box, steps, starts, hist, res, fixed, np.linspace(0, 1, steps + 1))


def order_check(p: MoserProblem, sub_box: Box, steps: int = 200, samples: int = 101, floor=1e-13):
    """Residuals at steps/2 and steps; passes when halving the step at least halves it."""
    coarse = moser_isotopy(p, sub_box, max(1, steps // 2), samples).residual
    fine = moser_isotopy(p, sub_box, steps, samples).residual
    ratio = coarse / fine if fine > 0 else float("inf")
    passed = ratio >= 2 or max(coarse, fine) <= floor
    return {"steps": [max(1, steps // 2), steps], "residuals": [coarse, fine],
            "ratio": ratio, "passed": bool(passed)}


# vanishing-order surrogate ------------------------------------------------------

def vanishing_order(f: ScalarField, w, max_order: int = 8, threshold=1e-7) -> int:
    """Smallest j with |f^(j)(w)| > threshold, or max_order + 1."""
    if max_order > 8:
        raise PreconditionError("max_order is limited to 8", stage="moser")
    if f.dim != 1:
        raise PreconditionError("vanishing_order needs a one-variable field", stage="moser")
    pt = np.array([[float(np.atleast_1d(w)[0])]])
    v = f.vars[0]
    for j in range(max_order + 1):
        fj = f.derivative_field(*([v] * j)) if j else f
        if abs(fj(pt)[0]) > threshold:
            return j
    return max_order + 1


def surrogate_check(h: ScalarField, d: ScalarField, W, max_order=8):
    """ord_w(d) >= 1 + 2 ord_w(h') at every w in W."""
    rows = []
    ok = True
    hp = h.derivative_field(h.vars[0])
    for w in np.asarray(W, dtype=float).reshape(-1):
        od = vanishing_order(d, w, max_order)
        oh = vanishing_order(hp, w, max_order)
        need = 1 + 2 * oh
        rows.append({"w": float(w), "ord_d": od, "ord_h_prime": oh, "required": need,
                     "passed": od >= need})
        ok &= od >= need
    return {"passed": bool(ok), "points": rows}
