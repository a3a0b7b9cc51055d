"""Morse charts by completing squares with variable coefficients.

Near a critical point ``c``, Taylor's formula with integral remainder writes
``f(x) = f(c) + (x-c)^T b(x) (x-c)`` with ``b(x) = int_0^1 (1-t) H(c + t(x-c)) dt``.
A pointwise LDL^T factorization of ``b(x)`` (pivot order and an optional
linear pre-rotation fixed once at ``c``) is exactly the iterated completion
of squares, and gives coordinates ``y`` with ``f - f(c) = sum(sign_k y_k^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import null_space

from .errors import CertificationError, PreconditionError
from .fields import Field, eval_jet
from .quadrature import gauss_legendre

PIVOT_FLOOR = 1e-10


class QuadFormField:
    """b(x) from the integral remainder, evaluated by Gauss-Legendre with order doubling."""

    def __init__(self, f: Field, c, rtol=1e-13, max_order=256):
        self.f = f
        self.c = np.atleast_1d(np.asarray(c, dtype=float))
        self.rtol = rtol
        self.max_order = max_order
        self.value_at_c = float(f(self.c.reshape(1, -1))[0])

    def _with_order(self, pts, order):
        t, w = gauss_legendre(order)
        d = pts - self.c
        nodes = self.c + t[None, :, None] * d[:, None, :]
        m, n = pts.shape
        H = self.f.hessian(nodes.reshape(-1, n)).reshape(m, order, n, n)
        return np.einsum("k,mkij->mij", w * (1 - t), H)

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        order = 16
        b = self._with_order(pts, order)
        while order < self.max_order:
            order *= 2
            b2 = self._with_order(pts, order)
            diff = np.max(np.abs(b2 - b)) if b.size else 0.0
            b = b2
            if diff <= self.rtol * (1 + np.max(np.abs(b))):
                break
        return b

    def reconstruct(self, points):
        """f(c) + (x-c)^T b(x) (x-c)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = pts - self.c
        return self.value_at_c + np.einsum("mi,mij,mj->m", d, self(pts), d)


def quadratic_remainder(f: Field, c, tol=1e-8) -> QuadFormField:
    """Integral-remainder quadratic form of ``f`` at the critical point ``c``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    _, g = eval_jet(f, c, 1)
    if np.linalg.norm(g) > tol:
        raise PreconditionError("center is not a critical point", stage="normal-form",
                                witness={"point": c.tolist(), "gradient": g.tolist()})
    return QuadFormField(f, c)


# completion of squares ---------------------------------------------------------

def pivot_plan(B0, floor=PIVOT_FLOOR):
    """Constant change of variables M (x - c = M xi) making LDL^T pivots nonzero.

    Each step takes the remaining variable with the largest |diagonal| of the
    current Schur complement; when every diagonal entry is negligible, two
    variables are rotated by 45 degrees to create one.
    """
    B0 = np.asarray(B0, dtype=float)
    n = B0.shape[0]
    M = np.eye(n)
    scale = 1.0 + np.max(np.abs(B0))

    def schur(k):
        S = M.T @ B0 @ M
        if k == 0:
            return S
        return S[k:, k:] - S[k:, :k] @ np.linalg.solve(S[:k, :k], S[:k, k:])

    for k in range(n):
        T = schur(k)
        diag = np.abs(np.diag(T))
        if diag.max() <= floor * scale:
            off = np.abs(T - np.diag(np.diag(T)))
            i, j = np.unravel_index(np.argmax(off), off.shape)
            if off[i, j] <= floor * scale:
                raise PreconditionError("degenerate quadratic form", stage="normal-form")
            a, b = M[:, k + i].copy(), M[:, k + j].copy()
            M[:, k + i] = (a + b) / np.sqrt(2)
            M[:, k + j] = (a - b) / np.sqrt(2)
            T = schur(k)
            diag = np.abs(np.diag(T))
        p = int(np.argmax(diag))
        if p:
            M[:, [k, k + p]] = M[:, [k + p, k]]
    return M


def ldl_batch(A):
    """Unpivoted LDL^T of a stack of symmetric matrices: returns (L, D)."""
    A = np.array(A, dtype=float, copy=True)
    m, n, _ = A.shape
    L = np.tile(np.eye(n), (m, 1, 1))
    D = np.zeros((m, n))
    for k in range(n):
        D[:, k] = A[:, k, k]
        col = A[:, k + 1:, k] / D[:, k, None]
        L[:, k + 1:, k] = col
        A[:, k + 1:, k + 1:] -= col[:, :, None] * A[:, None, k, k + 1:]
    return L, D


def signature(B0):
    """(negatives, positives) of a nondegenerate symmetric matrix via completion of squares."""
    B0 = 0.5 * (np.asarray(B0, dtype=float) + np.asarray(B0, dtype=float).T)
    M = pivot_plan(B0)
    _, D = ldl_batch((M.T @ B0 @ M)[None])
    return int(np.sum(D[0] < 0)), int(np.sum(D[0] > 0))


@dataclass
class MorseChart:
    """Chart psi with f(psi(y)) - f(c) = sum(signs * y^2) on a ball."""

    f: Field
    center: np.ndarray
    signs: np.ndarray
    radius: float
    residual_bound: float
    inverse_error: float
    linear: np.ndarray  # D psi(0)^-1: linear @ D psi(0) = Id
    plan: np.ndarray = dc_field(repr=False, default=None)
    order_map: np.ndarray = dc_field(repr=False, default=None)
    remainder: QuadFormField = dc_field(repr=False, default=None)

    @property
    def index(self):
        return int(np.sum(self.signs < 0))

    @property
    def coindex(self):
        return int(np.sum(self.signs > 0))

    def coordinates(self, points):
        """y = Y(x): Morse coordinates of original points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        B = self.remainder(pts)
        Bt = np.einsum("ji,mjk,kl->mil", self.plan, B, self.plan)
        L, D = ldl_batch(Bt)
        xi = np.linalg.solve(self.plan, (pts - self.center).T).T
        z = np.einsum("mji,mj->mi", L, xi)  # L^T xi
        y = np.sqrt(np.abs(D)) * z
        return y[:, self.order_map]

    def __call__(self, y, tol=1e-14, max_iter=40):
        """psi(y): invert the coordinates by Newton with a difference Jacobian."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        x = self.center + np.linalg.solve(self.linear, y.T).T
        n = len(self.center)
        h = 1e-7 * max(self.radius, 1e-3)
        for _ in range(max_iter):
            r = self.coordinates(x) - y
            if np.max(np.abs(r)) <= tol * (1 + np.max(np.abs(y))):
                break
            Jm = np.empty((len(x), n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = h
                Jm[:, :, j] = (self.coordinates(x + e) - self.coordinates(x - e)) / (2 * h)
            x = x - np.linalg.solve(Jm, r[:, :, None])[:, :, 0]
        return x

    def quadratic(self, y):
        y = np.atleast_2d(y)
        return np.sum(self.signs * y * y, axis=1)


def _ball(rng, n, count, radius):
    v = rng.normal(size=(count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return v * r


def morse_chart(f: Field, c, radius: float, samples=1000, seed=0, tol=1e-8) -> MorseChart:
    """Morse chart of ``f`` at the nondegenerate critical point ``c``.

    The radius is halved until every pivot stays within a factor 2 of its
    value at ``c`` on the ball (``radius_used`` is ``chart.radius``).
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = len(c)
    rem = quadratic_remainder(f, c, tol)
    B0 = rem(c.reshape(1, -1))[0]
    lam = np.linalg.eigvalsh(0.5 * (B0 + B0.T))
    if np.min(np.abs(lam)) <= tol * (1 + np.max(np.abs(lam))):
        raise PreconditionError("degenerate critical point", stage="normal-form",
                                witness={"point": c.tolist(), "eigenvalues": (2 * lam).tolist()})
    M = pivot_plan(B0)
    L0, D0 = ldl_batch((M.T @ B0 @ M)[None])
    L0, D0 = L0[0], D0[0]
    order = np.argsort(np.sign(D0), kind="stable")  # negative squares first
    signs = np.sign(D0)[order]
    rng = np.random.default_rng(seed)
    rad = float(radius)
    while True:
        pts = c + _ball(rng, n, samples, rad)
        _, D = ldl_batch(np.einsum("ji,mjk,kl->mil", M, rem(pts), M))
        if np.all(D / D0 >= 0.5):
            break
        rad /= 2
        if rad < 1e-6:
            raise PreconditionError("chart radius collapsed below 1e-6", stage="normal-form",
                                    witness={"point": c.tolist()})
    Lam = (np.sqrt(np.abs(D0))[:, None] * L0.T) @ np.linalg.inv(M)
    chart = MorseChart(f, c, signs, rad, 0.0, 0.0, Lam[order], M, order, rem)
    y = chart.coordinates(pts)
    back = chart(y)
    resid = np.max(np.abs(f(back) - rem.value_at_c - chart.quadratic(y)))
    chart.residual_bound = float(resid)
    chart.inverse_error = float(np.max(np.abs(back - pts)))
    fc = abs(rem.value_at_c)
    if resid > 1e-6 * max(1.0, fc) or chart.inverse_error > 1e-8:
        raise CertificationError("Morse chart residual above tolerance", stage="normal-form",
                                 witness={"residual": float(resid),
                                          "inverse_error": chart.inverse_error})
    return chart


def linear_model_residual(chart: MorseChart, radius: float, samples=1000, seed=0):
    """sup over the ball of |f(x) - f(c) - sum(signs * (Lx)^2)| for the linear chart L."""
    rng = np.random.default_rng(seed)
    n = len(chart.center)
    pts = chart.center + _ball(rng, n, samples, radius)
    y = (pts - chart.center) @ chart.linear.T
    return float(np.max(np.abs(chart.f(pts) - chart.remainder.value_at_c - chart.quadratic(y))))


def radius_halving_ratio(chart: MorseChart, radius=None, floor=1e-13):
    """Ratio of linear-model residuals at radius and radius/2 (None when both vanish)."""
    radius = chart.radius if radius is None else radius
    big = linear_model_residual(chart, radius)
    small = linear_model_residual(chart, radius / 2)
    if big <= floor * (1 + abs(chart.remainder.value_at_c)):
        return None
    return big / max(small, 1e-300)


# negative graphs ---------------------------------------------------------------

@dataclass
class NegativeGraph:
    """N' written as the graph of g: N -> P over the B-orthogonal splitting."""

    g: np.ndarray  # P-coordinates per N-coordinate
    N: np.ndarray
    P: np.ndarray
    margin: float


def _check_negative(B, N, label):
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if N.shape[0] != B.shape[0]:
        N = N.T
    neg = int(np.sum(np.linalg.eigvalsh(B) < 0))
    if N.shape[1] != neg or np.linalg.matrix_rank(N) != N.shape[1]:
        raise PreconditionError(f"{label} is not a maximal negative subspace", stage="negative-graph",
                                witness={"dimension": int(N.shape[1]), "expected": neg})
    G = N.T @ B @ N
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    if w.size and w[-1] >= 0:
        raise PreconditionError(f"{label} is not negative definite", stage="negative-graph",
                                witness={"vector": (N @ V[:, -1]).tolist(), "q": float(w[-1])})
    return N


def _orient(P):
    for j in range(P.shape[1]):
        i = int(np.argmax(np.abs(P[:, j])))
        if P[i, j] < 0:
            P[:, j] = -P[:, j]
    return P


def graph_margin(B, N, P, g):
    """Smallest eigenvalue of -q|N - q|P o g as a form on N-coordinates (> 0 when valid)."""
    Q = -(N.T @ B @ N) - g.T @ (P.T @ B @ P) @ g
    return float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min()) if Q.size else float("inf")


def negative_graph(B, N, N_prime, samples=1000, seed=0) -> NegativeGraph:
    """Linear map g with N' = {x + g(x)} over N (+) N^perp_B, certified q(g x) < -q(x)."""
    B = 0.5 * (np.asarray(B, dtype=float) + np.asarray(B, dtype=float).T)
    if np.min(np.abs(np.linalg.eigvalsh(B))) <= 1e-12 * (1 + np.max(np.abs(B))):
        raise PreconditionError("quadratic form is degenerate", stage="negative-graph")
    N = _check_negative(B, N, "N")
    Np = _check_negative(B, N_prime, "N'")
    k = N.shape[1]
    P = _orient(null_space(N.T @ B)) if k < B.shape[0] else np.zeros((B.shape[0], 0))
    coef = np.linalg.solve(np.hstack([N, P]), Np)
    A, C = coef[:k], coef[k:]
    g = C @ np.linalg.inv(A)
    margin = graph_margin(B, N, P, g)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(samples, k))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    lhs = np.einsum("mi,ij,mj->m", a @ g.T, P.T @ B @ P, a @ g.T)
    rhs = -np.einsum("mi,ij,mj->m", a, N.T @ B @ N, a)
    if margin <= 0 or np.any(lhs >= rhs):
        raise CertificationError("graph fails q(g x) < -q(x)", stage="negative-graph",
                                 witness={"margin": margin})
    return NegativeGraph(g, N, P, margin)
