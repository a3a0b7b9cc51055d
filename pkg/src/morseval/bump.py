"""Smooth bump kernel, its primitive, cutoff families and their 1D flows.

The kernel is ``rho(x) = (2 pi)^(1/4) exp(-cot(pi x)^2) / sin(pi x)`` on (0, 1),
zero elsewhere, normalized so that the integral of ``rho^2`` is 1.  With
``u = cot(pi x)`` the square is ``sqrt(2 pi) (1 + u^2) exp(-2 u^2)``, whose
primitive has the closed form ``beta(x) = erfc(sqrt(2) u) / 2``.

The four cutoffs are rescalings of ``beta``.  Their flows (as vector fields on
the line) all reduce to one universal flow ``Y`` of the field ``A(y) = beta(-y)``,
which equals 1 for y <= -1 and 0 for y >= 0.  ``Y`` is computed through the
time function ``T`` with ``T' = 1/A``: ``Y(tau, y) = T^-1(T(y) + tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import erfc, erfcinv, erfcx

from . import jet as J
from .errors import PreconditionError
from .quadrature import CumulativeIntegral

SQRT2 = np.sqrt(2.0)
SQRT2PI = np.sqrt(2.0 * np.pi)
_U_CAP = 1e5  # beyond this |cot| every term below is exactly 0 or 1 in floats


def _cot(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.cos(np.pi * x) / np.sin(np.pi * x)


def kernel(x):
    """The bump kernel rho, supported in [0, 1]."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    u = _cot(xs)
    with np.errstate(over="ignore", under="ignore"):
        val = (2 * np.pi) ** 0.25 * np.exp(-np.minimum(u * u, 1e300)) / np.sin(np.pi * xs)
    return np.where(inside & (np.abs(u) < _U_CAP), val, 0.0)


def rho2(x):
    """rho squared, the derivative of beta."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    u = _cot(np.where(inside, x, 0.5))
    ok = inside & (np.abs(u) < _U_CAP)
    u = np.where(ok, u, 0.0)
    return np.where(ok, SQRT2PI * (1 + u * u) * np.exp(-2 * u * u), 0.0)


def rho2_prime(x):
    """Derivative of rho squared."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    u = _cot(np.where(inside, x, 0.5))
    ok = inside & (np.abs(u) < _U_CAP)
    u = np.where(ok, u, 0.0)
    u2 = u * u
    val = SQRT2PI * 2 * np.pi * u * (1 + 2 * u2) * (1 + u2) * np.exp(-2 * u2)
    return np.where(ok, val, 0.0)


def beta(x):
    """Primitive of rho^2: 0 for x <= 0, 1 for x >= 1, smooth and increasing between."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    u = _cot(np.where(inside, x, 0.5))
    val = 0.5 * erfc(SQRT2 * u)
    return np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, val))


def beta_complement(x):
    """1 - beta(x) without cancellation."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    u = _cot(np.where(inside, x, 0.5))
    val = 0.5 * erfc(-SQRT2 * u)
    return np.where(x <= 0, 1.0, np.where(x >= 1, 0.0, val))


def beta_inverse(w):
    """Inverse of beta on (0, 1)."""
    w = np.asarray(w, dtype=float)
    if np.any((w <= 0) | (w >= 1)):
        raise PreconditionError("beta_inverse needs 0 < w < 1", stage="bump")
    return 0.5 - np.arctan(erfcinv(2 * w) / SQRT2) / np.pi


def beta_jet(x):
    """beta applied to a jet or an array."""
    if not isinstance(x, J.Jet):
        return beta(x)
    return J.apply1(x, beta(x.val), rho2(x.val), rho2_prime(x.val))


def beta_complement_jet(x):
    if not isinstance(x, J.Jet):
        return beta_complement(x)
    return J.apply1(x, beta_complement(x.val), -rho2(x.val), -rho2_prime(x.val))


# cutoffs -----------------------------------------------------------------------

KINDS = ("beta_inc", "alpha_dec", "alpha_comp", "beta_comp")


@dataclass(frozen=True)
class CutoffSpec:
    """A rescaled cutoff.

    ``beta_inc``  x -> beta((x - a)/eps), rising from 0 at a to 1 at a + eps;
    ``alpha_dec`` x -> beta((a - x)/eps), falling from 1 at a - eps to 0 at a;
    ``alpha_comp`` is 1 - beta_inc and ``beta_comp`` is 1 - alpha_dec.
    """

    kind: str
    eps: float
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown cutoff kind {self.kind!r}", stage="bump")
        if not self.eps > 0:
            raise PreconditionError("cutoff width eps must be positive", stage="bump",
                                    witness={"eps": self.eps})

    def _arg(self, x):
        if self.kind in ("beta_inc", "alpha_comp"):
            return (x - self.a) / self.eps, 1.0
        return (self.a - x) / self.eps, -1.0

    def __call__(self, x):
        z, _ = self._arg(np.asarray(x, dtype=float))
        if self.kind in ("beta_inc", "alpha_dec"):
            return beta(z)
        return beta_complement(z)

    def derivative(self, x):
        z, sign = self._arg(np.asarray(x, dtype=float))
        d = sign * rho2(z) / self.eps
        return d if self.kind in ("beta_inc", "alpha_dec") else -d

    def jet(self, x):
        z = (x - self.a) / self.eps if self.kind in ("beta_inc", "alpha_comp") else (self.a - x) / self.eps
        if self.kind in ("beta_inc", "alpha_dec"):
            return beta_jet(z)
        return beta_complement_jet(z)

    def flow_params(self):
        """(direction, anchor) of the equivalent canonical flow.

        ``"psi"`` is the flow of a field equal to 1 below ``anchor - eps`` and 0
        above ``anchor``; ``"phi"`` is the flow of a field equal to 0 below
        ``anchor`` and 1 above ``anchor + eps``.
        """
        if self.kind == "alpha_dec":
            return "psi", self.a
        if self.kind == "alpha_comp":
            return "psi", self.a + self.eps
        if self.kind == "beta_inc":
            return "phi", self.a
        return "phi", self.a - self.eps


def cutoff(spec: CutoffSpec, x):
    return spec(x)


def cutoff_derivative(spec: CutoffSpec, x):
    return spec.derivative(x)


# universal flow ----------------------------------------------------------------

_V_LO, _V_HI = -8.0, 18.0


def _h(v):
    """Integrand of the non-elementary part of the time function."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    neg = v <= 0
    vn = v[neg]
    out[neg] = erfc(-SQRT2 * vn) / (np.pi * (1 + vn * vn) * erfc(SQRT2 * vn))
    vp = v[~neg]
    with np.errstate(over="ignore"):
        out[~neg] = erfc(-SQRT2 * vp) * np.exp(2 * vp * vp) / (
            np.pi * (1 + vp * vp) * erfcx(SQRT2 * vp))
    return out


@lru_cache(maxsize=1)
def _time_table():
    # built once; lru_cache makes concurrent first use harmless (pure result)
    table = CumulativeIntegral(_h, _V_LO, _V_HI, panels=26 * 32, order=16)
    knots_g = (np.arctan(table.knots) + np.pi / 2) / np.pi + table.values
    return table, knots_g


def _G(V):
    table, _ = _time_table()
    V = np.asarray(V, dtype=float)
    H = np.where(V <= _V_LO, 0.0, table(np.clip(V, _V_LO, _V_HI)))
    return (np.arctan(V) + np.pi / 2) / np.pi + H


def _G_prime(V):
    V = np.asarray(V, dtype=float)
    return 1.0 / (np.pi * (1 + V * V)) + _h(V)


def _time(y):
    """T(y) for y < 0, with T(-1) = 0 and T' = 1/A."""
    y = np.asarray(y, dtype=float)
    left = y <= -1
    V = np.tan(np.pi * (np.where(left, -0.5, y) + 0.5))
    return np.where(left, y + 1, _G(V))


def _time_inverse(T):
    """y with T(y) = T, for T > 0 (values above the table saturate near 0)."""
    T = np.asarray(T, dtype=float)
    table, knots_g = _time_table()
    V = np.empty_like(T)
    low = T <= knots_g[0]
    V[low] = np.tan(np.pi * T[low] - np.pi / 2)
    high = T >= knots_g[-1]
    V[high] = _V_HI
    mid = ~(low | high)
    if np.any(mid):
        t = T[mid]
        j = np.clip(np.searchsorted(knots_g, t) - 1, 0, len(knots_g) - 2)
        a, b = table.knots[j].copy(), table.knots[j + 1].copy()
        ga = knots_g[j]
        gb = knots_g[j + 1]
        v = a + (b - a) * (t - ga) / (gb - ga)
        act = np.arange(len(t))
        for _ in range(60):
            r = _G(v[act]) - t[act]
            a[act] = np.where(r < 0, v[act], a[act])
            b[act] = np.where(r >= 0, v[act], b[act])
            nv = v[act] - r / _G_prime(v[act])
            bad = ~((nv > a[act]) & (nv < b[act]))
            nv = np.where(bad, (a[act] + b[act]) / 2, nv)
            nv = np.where(r == 0, v[act], nv)
            # converged, or bracketed down to adjacent floats
            done = (np.abs(nv - v[act]) <= 1e-15 * (1 + np.abs(v[act]))) | (r == 0)
            v[act] = nv
            act = act[~done]
            if act.size == 0:
                break
        V[mid] = v
    return np.arctan(V) / np.pi - 0.5


def _A(y):
    return beta(-np.asarray(y, dtype=float))


def _A_prime(y):
    return -rho2(-np.asarray(y, dtype=float))


def universal_flow(tau, y):
    """Y(tau, y): flow for time tau of the field A(y) = beta(-y)."""
    tau, y = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(y, dtype=float))
    tau, y = tau.ravel(), y.ravel()
    out = y.copy()
    frozen = y >= 0
    inner = (y > -1) & (y < 0)
    V = np.tan(np.pi * (np.where(inner, y, -0.5) + 0.5))
    frozen |= inner & (V >= _V_HI)
    move = ~frozen
    if np.any(move):
        T1 = _time(y[move]) + tau[move]
        res = np.where(T1 <= 0, T1 - 1, 0.0)
        pos = T1 > 0
        if np.any(pos):
            res[pos] = _time_inverse(T1[pos])
        out[move] = np.where(tau[move] == 0, y[move], res)
    return out, frozen


def universal_flow_partials(tau, y):
    """Y and its first and second partials in (tau, y)."""
    Y, frozen = universal_flow(tau, y)
    y = np.broadcast_to(np.asarray(y, dtype=float), np.shape(Y)).ravel()
    AY, Ay = _A(Y), _A(y)
    dAY, dAy = _A_prime(Y), _A_prime(y)
    safe = np.where(frozen | (Ay == 0), 1.0, Ay)
    ratio = np.where(frozen, 1.0, AY / safe)
    Yt = np.where(frozen, 0.0, AY)
    Yy = ratio
    Ytt = np.where(frozen, 0.0, dAY * AY)
    Yty = np.where(frozen, 0.0, dAY * ratio)
    Yyy = np.where(frozen, 0.0, ratio * (dAY - dAy) / safe)
    return Y, Yt, Yy, Ytt, Yty, Yyy


def _universal_jet(tau, y):
    if not isinstance(tau, J.Jet) and not isinstance(y, J.Jet):
        return universal_flow(tau, y)[0]
    like = tau if isinstance(tau, J.Jet) else y
    tau, y = J.as_jet(tau, like), J.as_jet(y, like)
    Y, Yt, Yy, Ytt, Yty, Yyy = universal_flow_partials(tau.val, y.val)
    return J.apply2(tau, y, Y, Yt, Yy, Ytt, Yty, Yyy)


# cutoff flows ------------------------------------------------------------------

def canonical_flow(direction, anchor, eps, t, x):
    """Flow of a canonical cutoff field for time ``t`` starting at ``x``.

    All of ``anchor``, ``eps``, ``t``, ``x`` may be scalars, arrays or jets.
    Points on the fixed half-line and points whose whole trajectory stays on
    the plateau 1 are handled exactly (identity and translation by ``t``).
    """
    vals = [np.asarray(J.value(v), dtype=float) for v in (anchor, eps, t, x)]
    av, ev, tv, xv = np.broadcast_arrays(*vals)
    av, ev, tv, xv = av.ravel(), ev.ravel(), tv.ravel(), xv.ravel()
    m = xv.size
    if np.any(ev <= 0):
        raise PreconditionError("cutoff width eps must be positive", stage="flow")
    jets = [v for v in (anchor, eps, t, x) if isinstance(v, J.Jet)]
    if direction == "psi":
        ident = xv >= av
        trans = ~ident & (np.maximum(xv, xv + tv) <= av - ev)
    else:
        ident = xv <= av
        trans = ~ident & (np.minimum(xv, xv + tv) >= av + ev)
    if not jets:
        # with jets the t-derivative at t = 0 is still needed, so only values shortcut
        ident |= tv == 0
        trans &= ~ident
    gen = ~(ident | trans)
    if not jets:
        out = np.where(ident, xv, xv + tv)
        if np.any(gen):
            a, e, tt, xx = av[gen], ev[gen], tv[gen], xv[gen]
            if direction == "psi":
                out[gen] = a + e * universal_flow(tt / e, (xx - a) / e)[0]
            else:
                out[gen] = a - e * universal_flow(-tt / e, (a - xx) / e)[0]
        return out if np.ndim(x) or np.ndim(t) or np.ndim(anchor) or np.ndim(eps) else float(out[0])
    like = jets[0]
    A_, E_, T_, X_ = (J.as_jet(v, like, m) for v in (anchor, eps, t, x))
    parts = [(np.flatnonzero(ident), X_.take(np.flatnonzero(ident))),
             (np.flatnonzero(trans), X_.take(np.flatnonzero(trans)) + T_.take(np.flatnonzero(trans)))]
    gi = np.flatnonzero(gen)
    if gi.size:
        a, e, tt, xx = A_.take(gi), E_.take(gi), T_.take(gi), X_.take(gi)
        inv_e = J.reciprocal(e)
        if direction == "psi":
            piece = a + e * _universal_jet(tt * inv_e, (xx - a) * inv_e)
        else:
            piece = a - e * _universal_jet(-(tt * inv_e), (a - xx) * inv_e)
        still = tt.val == 0
        piece.val[still] = xx.val[still]
        parts.append((gi, piece))
    return J.assemble(m, parts, like)


def cutoff_flow(spec: CutoffSpec, t, x):
    """Flow of the cutoff ``spec`` (seen as a vector field) for time ``t`` from ``x``."""
    direction, anchor = spec.flow_params()
    return canonical_flow(direction, anchor, spec.eps, t, x)


def flow_by_integration(spec: CutoffSpec, t, x, atol=1e-12, rtol=1e-12):
    """Reference solution of x' = cutoff(x) by an embedded Runge-Kutta 4(5) pair."""
    x0 = float(x)
    t = float(t)
    if t == 0:
        return x0
    sol = solve_ivp(lambda _s, y: spec(y), (0.0, t), [x0], method="RK45",
                    atol=atol, rtol=rtol, max_step=max(spec.eps / 4, 1e-3))
    return float(sol.y[0, -1])


@dataclass(frozen=True)
class Flow1D:
    """Flow of a cutoff field; ``flow(t, x)`` is increasing in ``x``."""

    spec: CutoffSpec

    def __call__(self, t, x):
        return cutoff_flow(self.spec, t, x)

    def inverse(self, t, x):
        return cutoff_flow(self.spec, -t, x)

    def derivative(self, t, x):
        """Spatial derivative of the flow map at ``x``."""
        xj = J.Jet(np.atleast_1d(np.asarray(x, dtype=float)).copy(),
                   np.ones((np.size(x), 1)))
        out = cutoff_flow(self.spec, t, xj)
        return J.as_jet(out, xj).grad[:, 0]
