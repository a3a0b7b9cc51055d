"""Smooth fields, boxes, jets at points and critical-point censuses.

Every field implements :meth:`Field.compose`, which evaluates it on a list of
input jets (one per coordinate).  That single entry point gives values,
derivatives and composition with other fields for free.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from . import expr as E
from . import jet as J
from .errors import DomainError, PreconditionError

DEFAULT_GRID = 64
DEFAULT_TOL = 1e-8


# boxes and grids -----------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise PreconditionError("box bounds must have equal, nonzero length", stage="box")
        if any(not a < b for a, b in zip(lo, hi)):
            raise PreconditionError("box needs lo < hi on every axis", stage="box",
                                    witness={"lo": lo, "hi": hi})
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def of(cls, *intervals):
        return cls(tuple(a for a, _ in intervals), tuple(b for _, b in intervals))

    @property
    def dim(self):
        return len(self.lo)

    @property
    def widths(self):
        return np.subtract(self.hi, self.lo)

    def contains(self, points, slack=0.0):
        p = np.atleast_2d(points)
        w = self.widths * slack
        return np.all((p >= np.subtract(self.lo, w)) & (p <= np.add(self.hi, w)), axis=1)

    def shrink(self, factor):
        mid = (np.add(self.lo, self.hi)) / 2
        half = self.widths / 2 * factor
        return Box(tuple(mid - half), tuple(mid + half))

    def as_list(self):
        return [[a, b] for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class Grid:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if any(c < 2 for c in counts):
            raise PreconditionError("grid counts must be at least 2", stage="grid")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def uniform(cls, dim, count=DEFAULT_GRID):
        return cls((count,) * dim)

    def axes(self, box: Box):
        return [np.linspace(a, b, c) for a, b, c in zip(box.lo, box.hi, self.counts)]

    def points(self, box: Box):
        mesh = np.meshgrid(*self.axes(box), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def as_grid(grid, dim):
    if grid is None:
        return Grid.uniform(dim)
    if isinstance(grid, Grid):
        return grid
    if np.ndim(grid) == 0:
        return Grid.uniform(dim, int(grid))
    return Grid(tuple(grid))


# fields ----------------------------------------------------------------------

class Field:
    """A smooth real function of ``dim`` variables."""

    dim: int = 1

    def compose(self, inputs: Sequence):
        raise NotImplementedError

    def jet(self, points, order=2) -> J.Jet:
        pts = _points(points, self.dim)
        out = self.compose(J.Jet.variables(pts, order))
        return J.as_jet(out, J.Jet.variables(pts, order)[0]) if not isinstance(out, J.Jet) else out

    def __call__(self, points):
        pts = _points(points, self.dim)
        out = self.compose([pts[:, i] for i in range(self.dim)])
        return np.broadcast_to(np.asarray(J.value(out), dtype=float), (len(pts),)).copy()

    def gradient(self, points):
        return self.jet(points, 1).grad

    def hessian(self, points):
        return self.jet(points, 2).hess

    # composition helpers
    def __add__(self, other):
        return LambdaField(self.dim, lambda xs: self.compose(xs) + _eval(other, xs))

    def __sub__(self, other):
        return LambdaField(self.dim, lambda xs: self.compose(xs) - _eval(other, xs))

    def __rsub__(self, other):
        return LambdaField(self.dim, lambda xs: _eval(other, xs) - self.compose(xs))

    def __neg__(self):
        return LambdaField(self.dim, lambda xs: -self.compose(xs))

    def __mul__(self, other):
        return LambdaField(self.dim, lambda xs: self.compose(xs) * _eval(other, xs))

    __rmul__ = __mul__
    __radd__ = __add__


def _eval(f, xs):
    return f.compose(xs) if isinstance(f, Field) else f


def _points(points, dim):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    if pts.shape[1] != dim:
        raise PreconditionError(f"expected points of dimension {dim}, got {pts.shape[1]}",
                                stage="eval")
    return pts


class LambdaField(Field):
    """Field defined by a function of input jets."""

    def __init__(self, dim, fn: Callable, name=None):
        self.dim = dim
        self.fn = fn
        self.name = name

    def compose(self, inputs):
        return self.fn(list(inputs))

    def __repr__(self):
        return f"LambdaField({self.name or '...'}, dim={self.dim})"


class ConstantField(Field):
    def __init__(self, dim, c):
        self.dim = dim
        self.c = float(c)

    def compose(self, inputs):
        return self.c


class Function1D(Field):
    """One-variable field from vectorized value and derivative callables.

    Inputs are deduplicated before evaluation, which keeps product-grid
    evaluations cheap when the underlying function is expensive.
    """

    dim = 1

    def __init__(self, f0, f1, f2, name=None):
        self.f0, self.f1, self.f2 = f0, f1, f2
        self.name = name

    def compose(self, inputs):
        (x,) = inputs
        v = np.asarray(J.value(x), dtype=float)
        uniq, inv = np.unique(v, return_inverse=True)
        order = x.order if isinstance(x, J.Jet) else 0
        f0 = np.asarray(self.f0(uniq), dtype=float)[inv]
        if order == 0:
            return f0
        f1 = np.asarray(self.f1(uniq), dtype=float)[inv]
        f2 = np.asarray(self.f2(uniq), dtype=float)[inv] if order >= 2 else None
        return J.apply1(x, f0, f1, f2)

    def derivative(self, x, k):
        x = np.asarray(x, dtype=float)
        return np.asarray((self.f0, self.f1, self.f2)[k](x), dtype=float)

    def __repr__(self):
        return f"Function1D({self.name or '...'})"


class ScalarField(Field):
    """Expression-backed field with exact derivatives."""

    def __init__(self, ast, variables, domain: Box | None = None, source=None):
        self.ast = ast
        self.vars = tuple(variables)
        self.dim = len(self.vars)
        self.domain = domain
        self.source = source if source is not None else E.to_source(ast)
        self._derivs = {}

    def compose(self, inputs):
        env = dict(zip(self.vars, inputs))
        try:
            return E.evaluate(self.ast, env)
        except DomainError as err:
            idx = (err.witness or {}).get("index") if isinstance(err.witness, dict) else None
            if idx is not None:
                err.witness = {"point": [float(np.atleast_1d(J.value(x))[idx]) for x in inputs]}
            raise

    def derivative_ast(self, *var_names):
        """Symbolic mixed partial derivative (cached)."""
        key = tuple(var_names)
        if key not in self._derivs:
            node = self.ast
            for v in key:
                node = E.diff(node, v)
            self._derivs[key] = node
        return self._derivs[key]

    def derivative_field(self, *var_names):
        return ScalarField(self.derivative_ast(*var_names), self.vars, self.domain)

    def to_source(self):
        return E.to_source(self.ast)

    def __sub__(self, other):
        if isinstance(other, ScalarField) and other.vars == self.vars:
            return ScalarField(E.BinOp("-", self.ast, other.ast), self.vars, self.domain)
        return super().__sub__(other)

    def __add__(self, other):
        if isinstance(other, ScalarField) and other.vars == self.vars:
            return ScalarField(E.BinOp("+", self.ast, other.ast), self.vars, self.domain)
        return super().__add__(other)

    def __neg__(self):
        return ScalarField(E.Neg(self.ast), self.vars, self.domain)

    def __eq__(self, other):
        return isinstance(other, ScalarField) and self.ast == other.ast and self.vars == other.vars

    def __hash__(self):
        return hash((self.ast, self.vars))

    def __repr__(self):
        return f"ScalarField({self.source!r}, vars={list(self.vars)})"


def parse(src: str, variables=("x",), domain: Box | None = None) -> ScalarField:
    """Parse ``src`` into a field over the named variables."""
    variables = tuple(variables)
    if len(set(variables)) != len(variables):
        raise PreconditionError("variable names must be distinct", stage="parse",
                                witness={"vars": list(variables)})
    if len(variables) > 3:
        raise PreconditionError("at most three variables are supported", stage="parse")
    ast = E.parse_ast(src, variables)
    return ScalarField(ast, variables, domain, source=src)


def eval_jet(f: Field, p, order=2):
    """Value, gradient and Hessian of ``f`` at one point (as far as ``order``)."""
    if order not in (0, 1, 2):
        raise PreconditionError("order must be 0, 1 or 2", stage="eval")
    pt = np.atleast_1d(np.asarray(p, dtype=float)).reshape(1, -1)
    jt = f.jet(pt, order)
    out = [float(jt.val[0])]
    if order >= 1:
        out.append(jt.grad[0].copy())
    if order >= 2:
        out.append(jt.hess[0].copy())
    return tuple(out)


# critical points ---------------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    value: float
    index: int
    coindex: int
    nondegenerate: bool
    hessian_eigenvalues: tuple = dc_field(default=())

    def to_dict(self):
        return {
            "location": list(self.location),
            "value": self.value,
            "index": self.index,
            "coindex": self.coindex,
            "nondegenerate": self.nondegenerate,
            "hessian_eigenvalues": list(self.hessian_eigenvalues),
        }


def classify(f: Field, locations, tol=DEFAULT_TOL):
    """Build :class:`CriticalPoint` records from refined locations."""
    locations = np.asarray(locations, dtype=float).reshape(-1, f.dim)
    if len(locations) == 0:
        return []
    jt = f.jet(locations, 2)
    out = []
    for i, loc in enumerate(locations):
        H = 0.5 * (jt.hess[i] + jt.hess[i].T)
        lam = np.linalg.eigvalsh(H)
        thr = tol * (1.0 + np.linalg.norm(H, 2))
        neg = int(np.sum(lam < -thr))
        pos = int(np.sum(lam > thr))
        out.append(CriticalPoint(
            location=tuple(float(v) for v in loc),
            value=float(jt.val[i]),
            index=neg,
            coindex=pos,
            nondegenerate=bool(np.min(np.abs(lam)) > thr),
            hessian_eigenvalues=tuple(float(v) for v in lam),
        ))
    return out


def _merge(points, radius):
    """Greedy merge of points closer than ``radius``; deterministic order."""
    if len(points) == 0:
        return np.zeros((0, points.shape[1] if np.ndim(points) == 2 else 1))
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    kept = []
    for p in pts:
        if all(np.linalg.norm(p - q) > radius for q in kept):
            kept.append(p)
    kept = np.array(kept)
    return kept[np.lexsort(kept.T[::-1])]


def _grad_norm(f, pts):
    jt = f.jet(pts, 1)
    return jt.grad, np.linalg.norm(jt.grad, axis=1)


def newton_refine(f: Field, seeds, box: Box, tol=DEFAULT_TOL, max_iter=40):
    """Damped Newton on grad f = 0 from each seed; returns converged points."""
    x = np.array(seeds, dtype=float).reshape(-1, f.dim)
    if len(x) == 0:
        return x
    lo, hi = np.array(box.lo), np.array(box.hi)
    margin = 0.05 * (hi - lo)
    active = np.ones(len(x), dtype=bool)
    done = np.zeros(len(x), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        jt = f.jet(x[idx], 2)
        g, H = jt.grad, jt.hess
        gn = np.linalg.norm(g, axis=1)
        # keep iterating past tol: near degenerate points convergence is only
        # linear and the location error is about sqrt(|grad|)
        conv = gn == 0
        done[idx[conv]] = True
        active[idx[conv]] = False
        keep = ~conv
        idx, g, H, gn = idx[keep], g[keep], H[keep], gn[keep]
        if idx.size == 0:
            break
        step = -np.einsum("mij,mj->mi", np.linalg.pinv(H, rcond=1e-14), g)
        lam = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        newx = x[idx].copy()
        for _half in range(30):
            pi = np.flatnonzero(pending)
            if pi.size == 0:
                break
            trial = x[idx[pi]] + lam[pi, None] * step[pi]
            inside = np.all((trial >= lo - margin) & (trial <= hi + margin), axis=1)
            tn = np.full(pi.size, np.inf)
            if np.any(inside):
                tn[inside] = _grad_norm(f, trial[inside])[1]
            ok = tn < gn[pi]
            newx[pi[ok]] = trial[ok]
            pending[pi[ok]] = False
            lam[pi[~ok]] *= 0.5
        stalled = pending
        x[idx[~stalled]] = newx[~stalled]
        # a stalled seed is either converged to roundoff or hopeless
        done[idx[stalled]] = gn[stalled] <= tol
        active[idx[stalled]] = False
    idx = np.flatnonzero(active | done)
    if idx.size == 0:
        return np.zeros((0, f.dim))
    gn = _grad_norm(f, x[idx])[1]
    ok = (gn <= tol) & box.contains(x[idx], slack=1e-12)
    return x[idx[ok]]


def grid_seeds(f: Field, box: Box, grid: Grid):
    """Grid nodes where ||grad f|| is a (non-strict) local minimum over the 3^n stencil."""
    pts = grid.points(box)
    _, gn = _grad_norm(f, pts)
    shape = grid.counts
    G = gn.reshape(shape)
    pad = np.pad(G, 1, mode="constant", constant_values=np.inf)
    is_min = np.ones(shape, dtype=bool)
    n = len(shape)
    for off in itertools.product((-1, 0, 1), repeat=n):
        if all(o == 0 for o in off):
            continue
        sl = tuple(slice(1 + o, 1 + o + s) for o, s in zip(off, shape))
        is_min &= G <= pad[sl]
    return pts[is_min.ravel()]


def critical_census(f: Field, box: Box, grid=None, tol=DEFAULT_TOL):
    """Critical points of ``f`` in ``box`` by grid seeding and Newton refinement."""
    grid = as_grid(grid, f.dim)
    seeds = grid_seeds(f, box, grid)
    refined = newton_refine(f, seeds, box, tol)
    merged = _merge(refined, 10 * tol)
    return classify(f, merged, tol)


def brute_force_census(f: Field, box: Box, grid=None, tol=DEFAULT_TOL, refine=10,
                       max_nodes=2_000_000):
    """Independent census: sign-change cell scan on a refined grid, then bisection.

    A cell is kept when every gradient component takes both signs (or zero) on
    its corners.  Kept cells are split in halves along every axis until their
    width is below ``tol``; the surviving cell centres are the critical points.
    """
    grid = as_grid(grid, f.dim)
    n = f.dim
    counts = [(c - 1) * refine + 1 for c in grid.counts]
    total = np.prod(counts, dtype=float)
    if total > max_nodes:
        scale = (max_nodes / total) ** (1.0 / n)
        counts = [max(2, int(c * scale)) for c in counts]
    fine = Grid(tuple(counts))
    axes = fine.axes(box)
    pts = fine.points(box)
    g = np.concatenate([f.jet(chunk, 1).grad for chunk in np.array_split(pts, max(1, len(pts) // 200_000))])
    g = g.reshape(tuple(counts) + (n,))
    cell_shape = tuple(c - 1 for c in counts)
    gmin = np.full(cell_shape + (n,), np.inf)
    gmax = np.full(cell_shape + (n,), -np.inf)
    for off in itertools.product((0, 1), repeat=n):
        sl = tuple(slice(o, o + s) for o, s in zip(off, cell_shape))
        gmin = np.minimum(gmin, g[sl])
        gmax = np.maximum(gmax, g[sl])
    cand = np.all((gmin <= 0) & (gmax >= 0), axis=-1)
    idx = np.argwhere(cand)
    lo = np.stack([axes[d][idx[:, d]] for d in range(n)], axis=1) if len(idx) else np.zeros((0, n))
    hi = np.stack([axes[d][idx[:, d] + 1] for d in range(n)], axis=1) if len(idx) else np.zeros((0, n))
    corners = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)
    halves = corners  # child offsets in units of half width
    while len(lo) and np.max(hi - lo) > tol:
        width = (hi - lo) / 2
        clo = (lo[:, None, :] + halves[None, :, :] * width[:, None, :]).reshape(-1, n)
        chi = clo + np.repeat(width, len(halves), axis=0)
        cpts = (clo[:, None, :] + corners[None, :, :] * (chi - clo)[:, None, :]).reshape(-1, n)
        cg = f.jet(cpts, 1).grad.reshape(len(clo), len(corners), n)
        keep = np.all((cg.min(axis=1) <= 0) & (cg.max(axis=1) >= 0), axis=1)
        lo, hi = clo[keep], chi[keep]
        if len(lo) > 200_000:
            raise PreconditionError("brute-force census exploded; the field is too flat",
                                    stage="census", witness={"cells": int(len(lo))})
        # drop duplicate cells produced from neighbouring parents
        if len(lo):
            key = np.round(lo / max(tol, 1e-300)).astype(np.int64)
            _, first = np.unique(key, axis=0, return_index=True)
            lo, hi = lo[np.sort(first)], hi[np.sort(first)]
    centres = (lo + hi) / 2 if len(lo) else np.zeros((0, n))
    merged = _merge(centres, 10 * tol)
    return classify(f, merged, tol)


def same_census(a, b, tol=DEFAULT_TOL):
    """Point-for-point match within 10*tol (both lists sorted lexicographically)."""
    if len(a) != len(b):
        return False
    return all(np.linalg.norm(np.subtract(p.location, q.location)) <= 10 * tol
               for p, q in zip(a, b))
