"""Extension of a transverse sheet along the hyperbolic flow of a split model.

Coordinates on E are (n, tau, r) with n in N, tau along the unit vector p and
r in R, so P = R p + R.  The model flow is Lambda_t(n, tau, r) =
(e^-t n, e^t tau, e^t r), generated by Z(n, tau, r) = (-n, tau, r), and the
model quadratic is q = -|n|^2 + tau^2 + |r|^2.

A sheet through s p is given as a graph r = theta(n).  Flowing it gives the
invariant set {r = (tau/s) theta((tau/s) n)}, which :func:`chi` parametrizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import jet as J
from .errors import PreconditionError
from .fields import Box, Field, LambdaField, critical_census


@dataclass(frozen=True)
class SplitModel:
    n_dim: int
    r_dim: int
    s: float
    nu: float
    rho: float
    delta: float

    def __post_init__(self):
        if self.n_dim < 1 or self.r_dim < 0 or self.n_dim + 1 + self.r_dim > 3:
            raise PreconditionError("need 1 <= dim N and dim N + 1 + dim R <= 3", stage="transverse",
                                    witness={"n_dim": self.n_dim, "r_dim": self.r_dim})
        for name in ("s", "nu", "rho", "delta"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"{name} must be positive", stage="transverse")
        if self.delta > np.sqrt(self.s * self.nu) * (1 + 1e-12):
            raise PreconditionError("delta must not exceed sqrt(s nu)", stage="transverse",
                                    witness={"delta": self.delta, "bound": float(np.sqrt(self.s * self.nu))})

    @property
    def dim(self):
        return self.n_dim + 1 + self.r_dim

    def split(self, u):
        u = np.atleast_2d(u)
        return u[:, :self.n_dim], u[:, self.n_dim], u[:, self.n_dim + 1:]

    def flow(self, t, u):
        n, tau, r = self.split(u)
        t = np.asarray(t, dtype=float).reshape(-1, 1)
        return np.hstack([np.exp(-t) * n, np.exp(t) * tau[:, None], np.exp(t) * r])

    def field(self, u):
        n, tau, r = self.split(u)
        return np.hstack([-n, tau[:, None], r])

    def q(self, u):
        n, tau, r = self.split(u)
        return -np.sum(n * n, axis=1) + tau ** 2 + np.sum(r * r, axis=1)

    def with_delta(self, delta):
        return SplitModel(self.n_dim, self.r_dim, self.s, self.nu, self.rho, delta)


@dataclass
class GraphSheet:
    """Sheet r = theta(n) through s p, plus optional extra invariant rays in P.

    ``theta`` holds one field per R coordinate, each a function of the N
    coordinates with theta(0) = 0.  ``extra_rays`` are directions in P (rows of
    length 1 + dim R) whose open half-lines are added to the invariant set.
    """

    theta: Sequence[Field]
    extra_rays: np.ndarray = dc_field(default_factory=lambda: np.zeros((0, 0)))

    def values(self, inputs):
        return [th.compose(inputs) for th in self.theta]

    def at(self, n):
        n = np.atleast_2d(np.asarray(n, dtype=float))
        if not self.theta:
            return np.zeros((len(n), 0))
        return np.stack([th(n) for th in self.theta], axis=1)


def check_sheet(model: SplitModel, sheet: GraphSheet, samples=400, seed=0):
    if len(sheet.theta) != model.r_dim:
        raise PreconditionError("theta needs one component per R coordinate", stage="transverse",
                                witness={"components": len(sheet.theta), "r_dim": model.r_dim})
    if any(th.dim != model.n_dim for th in sheet.theta):
        raise PreconditionError("theta components must be functions on N", stage="transverse")
    zero = sheet.at(np.zeros((1, model.n_dim)))
    if np.any(np.abs(zero) > 1e-12):
        raise PreconditionError("theta(0) must be 0", stage="transverse", witness={"theta(0)": zero[0].tolist()})
    n = _ball(np.random.default_rng(seed), model.n_dim, samples, model.nu)
    size = np.sqrt(np.sum(sheet.at(n) ** 2, axis=1))
    if np.any(size >= model.rho):
        i = int(np.argmax(size))
        raise PreconditionError("sheet leaves R^rho over N^nu", stage="transverse",
                                witness={"n": n[i].tolist(), "norm_theta": float(size[i])})


def _ball(rng, dim, count, radius):
    v = rng.normal(size=(count, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * radius * rng.uniform(0, 1, size=(count, 1)) ** (1 / dim)


def chi_components(model: SplitModel, sheet: GraphSheet, inputs):
    """chi on input jets or arrays (n_1, ..., n_k, tau)."""
    n, tau = list(inputs[:model.n_dim]), inputs[model.n_dim]
    scale = tau * (1.0 / model.s)
    args = [scale * ni for ni in n]
    return n + [tau] + [scale * v for v in sheet.values(args)]


def chi(model: SplitModel, sheet: GraphSheet, n, tau):
    """chi(n, tau) = n + tau p + (tau/s) theta((tau/s) n), rows of E coordinates."""
    n = np.atleast_2d(np.asarray(n, dtype=float)).reshape(-1, model.n_dim)
    tau = np.broadcast_to(np.asarray(tau, dtype=float).reshape(-1), (len(n),))
    bad = (np.linalg.norm(n, axis=1) >= model.delta) | (np.abs(tau) >= model.delta)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise PreconditionError("chi needs |n| < delta and |tau| < delta", stage="transverse",
                                witness={"n": n[i].tolist(), "tau": float(tau[i])})
    comps = chi_components(model, sheet, [n[:, i] for i in range(model.n_dim)] + [tau])
    m = len(n)
    return np.stack([np.broadcast_to(np.asarray(J.value(c), dtype=float), (m,)) for c in comps], axis=1)


def on_invariant_set(model: SplitModel, sheet: GraphSheet, u, tol=1e-12):
    """Membership through the graph relation (s/tau) r = theta((tau/s) n), tau > 0."""
    n, tau, r = model.split(u)
    pos = tau > 0
    out = np.zeros(len(n), dtype=bool)
    if np.any(pos):
        scale = tau[pos] / model.s
        expect = scale[:, None] * sheet.at(scale[:, None] * n[pos])
        dev = np.max(np.abs(r[pos] - expect), axis=1) if model.r_dim else np.zeros(int(pos.sum()))
        out[pos] = dev <= tol * (1 + np.max(np.abs(u[pos]), axis=1))
    return out


def _parameters(model, count, rng, positive=True):
    n = _ball(rng, model.n_dim, count, model.delta * (1 - 1e-9))
    lo = 0.0 if positive else -model.delta
    tau = rng.uniform(lo, model.delta, size=count)
    tau = np.where(tau == 0, model.delta / 2, tau)
    return n, tau


def tangency(model, sheet, n, tau, h=1e-5):
    """Residuals of Z(chi) against the chi-derivative along (n, tau) -> (e^-t n, e^t tau).

    The AD residual compares Z(chi) with tau d/dtau chi - D_n chi . n; the
    finite-difference residual differentiates t -> chi(e^-t n, e^t tau) at 0.
    """
    k = model.n_dim
    pts = np.hstack([n, tau[:, None]])
    comps = chi_components(model, sheet, J.Jet.variables(pts, 1))
    u = np.stack([J.as_jet(c, J.Jet.variables(pts, 1)[0]).val for c in comps], axis=1)
    grads = [J.as_jet(c, J.Jet.variables(pts, 1)[0]).grad for c in comps]
    along = np.stack([tau * g[:, k] - np.sum(n * g[:, :k], axis=1) for g in grads], axis=1)
    ad = np.max(np.abs(along - model.field(u)), axis=1)
    # the perturbed arguments must stay inside the balls
    ok = np.exp(h) * np.maximum(np.abs(tau), np.linalg.norm(n, axis=1)) < model.delta
    n, tau, u = n[ok], tau[ok], u[ok]
    fwd = chi(model, sheet, np.exp(-h) * n, np.exp(h) * tau)
    bwd = chi(model, sheet, np.exp(h) * n, np.exp(-h) * tau)
    fd = np.max(np.abs((fwd - bwd) / (2 * h) - model.field(u)), axis=1)
    return ad, fd, np.hstack([n, tau[:, None]])


def q_on_chart(model: SplitModel, sheet: GraphSheet) -> Field:
    """(n, tau) -> q(chi(n, tau)) as a field (jets flow through)."""
    k = model.n_dim

    def fn(xs):
        comps = chi_components(model, sheet, xs)
        out = -comps[0] * comps[0]
        for c in comps[1:k]:
            out = out - c * c
        for c in comps[k:]:
            out = out + c * c
        return out

    return LambdaField(k + 1, fn, name="q o chi")


def _clause(passed, **data):
    return {"passed": bool(passed), **data}


def verify_extension(model: SplitModel, sheet: GraphSheet, samples: int = 1000, seed=0, grid=None):
    """Certify the extension clauses on random samples; returns a report dict."""
    check_sheet(model, sheet, seed=seed)
    rng = np.random.default_rng(seed)
    report = {"delta": model.delta, "samples": samples}

    # (a) tangency to the model field
    n, tau = _parameters(model, samples, rng)
    ad, fd, used = tangency(model, sheet, n, tau)
    report["a_tangency"] = _clause(max(ad.max(), fd.max()) <= 1e-6, ad_residual=float(ad.max()),
                                   fd_residual=float(fd.max()), checked=int(len(used)),
                                   witness=used[int(np.argmax(fd))].tolist())

    # (b) cone points on the invariant set are chi-images
    n, tau = _parameters(model, 4 * samples, rng)
    scale = tau / model.s
    r = scale[:, None] * sheet.at(scale[:, None] * n) if model.r_dim else np.zeros((len(n), 0))
    u = np.hstack([n, tau[:, None], r])
    in_cone = (model.s ** 2 * np.sum(r * r, axis=1) <= tau ** 2 * model.rho ** 2) & \
              (np.sqrt(np.sum(r * r, axis=1)) < model.delta)
    cone = u[in_cone][:samples]
    member = on_invariant_set(model, sheet, cone)
    nn, tt, _ = model.split(cone)
    inside = (np.linalg.norm(nn, axis=1) < model.delta) & (tt > 0) & (tt < model.delta)
    image = chi(model, sheet, nn[inside], tt[inside]) if np.any(inside) else np.zeros((0, model.dim))
    err = np.max(np.abs(image - cone[inside]), axis=1) if len(image) else np.zeros(0)
    ok_b = bool(np.all(member) and np.all(inside) and (err.size == 0 or err.max() <= 1e-12))
    bad = np.flatnonzero(~(member & inside))
    report["b_cone_inclusion"] = _clause(ok_b, count=int(len(cone)),
                                         max_error=float(err.max()) if err.size else 0.0,
                                         witness=cone[bad[0]].tolist() if bad.size else None)

    # (c) q > 0 on the ray and on the sub-cone |n| < tau
    n, tau = _parameters(model, samples, rng)
    vals = model.q(chi(model, sheet, n, tau))
    sub = np.linalg.norm(n, axis=1) < tau
    ray = model.q(chi(model, sheet, np.zeros((samples, model.n_dim)), tau))
    bad = np.flatnonzero(sub & (vals <= 0))
    ok_c = bad.size == 0 and bool(np.all(ray > 0))
    report["c_q_positive"] = _clause(ok_c, subcone_samples=int(sub.sum()),
                                     full_domain_fraction=float(np.mean(vals > 0)),
                                     witness=np.hstack([n[bad[0]], tau[bad[0]]]).tolist() if bad.size else None)

    # (d) q o chi has the single critical point 0, nondegenerate of coindex 1
    G = q_on_chart(model, sheet)
    half = model.delta / np.sqrt(model.n_dim) * (1 - 1e-9)
    box = Box(tuple([-half] * model.n_dim + [-model.delta * (1 - 1e-9)]),
              tuple([half] * model.n_dim + [model.delta * (1 - 1e-9)]))
    cen = critical_census(G, box, grid if grid is not None else (48 if model.n_dim == 1 else 24))
    ok_d = (len(cen) == 1 and np.linalg.norm(cen[0].location) <= 1e-7 and cen[0].nondegenerate
            and cen[0].coindex == 1 and cen[0].index == model.n_dim)
    report["d_unique_critical"] = _clause(ok_d, census=[c.to_dict() for c in cen],
                                          witness=None if ok_d or not cen else list(cen[-1].location))

    # (e) the invariant set meets P only along the ray through p
    t = rng.uniform(0, model.delta, size=samples)
    t = np.where(t == 0, model.delta / 2, t)
    pts = [chi(model, sheet, np.zeros((samples, model.n_dim)), t)]
    rays = np.asarray(sheet.extra_rays, dtype=float)
    if rays.size:
        rays = rays.reshape(-1, 1 + model.r_dim)
        for v in rays:
            v = v / np.linalg.norm(v)
            pts.append(np.hstack([np.zeros((samples, model.n_dim)), t[:, None] * v[None, :]]))
    P_pts = np.vstack(pts)
    _, ptau, pr = model.split(P_pts)
    off = (ptau <= 0) | (np.max(np.abs(pr), axis=1, initial=0.0) > 1e-12)
    report["e_single_ray"] = _clause(not np.any(off), count=int(len(P_pts)),
                                     witness=P_pts[np.flatnonzero(off)[0]].tolist() if np.any(off) else None)
    report["passed"] = all(v["passed"] for k, v in report.items() if isinstance(v, dict))
    return report


def injectivity(model: SplitModel, sheet: GraphSheet, samples=2000, resolution=1e-4, seed=0):
    """No two parameter samples further apart than ``resolution`` share an image point."""
    n, tau = _parameters(model, samples, np.random.default_rng(seed))
    u = chi(model, sheet, n, tau)
    params = np.hstack([n, tau[:, None]])
    pairs = cKDTree(u).query_pairs(resolution / 2, output_type="ndarray")
    if len(pairs) == 0:
        return {"passed": True, "pairs": 0}
    gap = np.linalg.norm(params[pairs[:, 0]] - params[pairs[:, 1]], axis=1)
    bad = gap > resolution
    return {"passed": not bool(np.any(bad)), "pairs": int(len(pairs)),
            "witness": params[pairs[np.flatnonzero(bad)[0]]].tolist() if np.any(bad) else None}


def invariance(model: SplitModel, sheet: GraphSheet, samples=1000, seed=0):
    """Lambda_t maps chi-image points to points satisfying the graph relation."""
    rng = np.random.default_rng(seed)
    n, tau = _parameters(model, samples, rng)
    u = chi(model, sheet, n, tau)
    lo = np.log(np.maximum(np.linalg.norm(n, axis=1), 1e-300) / model.delta)
    hi = np.log(model.delta / tau)
    t = lo + (hi - lo) * rng.uniform(0.05, 0.95, size=samples)
    moved = model.flow(t, u)
    ok = on_invariant_set(model, sheet, moved, tol=1e-10)
    return {"passed": bool(np.all(ok)), "count": samples,
            "witness": None if np.all(ok) else moved[np.flatnonzero(~ok)[0]].tolist()}
