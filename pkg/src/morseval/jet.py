"""Batched second-order forward-mode jets.

A :class:`Jet` holds, for a batch of ``m`` evaluation points, the values of a
quantity together with its gradient and Hessian with respect to ``n`` seed
variables.  Lower orders simply leave ``grad``/``hess`` as ``None``, so the same
evaluation code serves value-only, first-order and second-order requests.

Elementary functions dispatch on their argument: plain floats and arrays go
straight to numpy, jets go through the chain rule in :func:`apply1`.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


class Jet:
    __array_ufunc__ = None  # make numpy defer to the reflected jet operators
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad=None, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    # construction -----------------------------------------------------
    @classmethod
    def variables(cls, points, order=2):
        """Seed jets for the columns of ``points`` (shape ``(m, n)``)."""
        pts = np.asarray(points, dtype=float)
        m, n = pts.shape
        out = []
        for i in range(n):
            grad = hess = None
            if order >= 1:
                grad = np.zeros((m, n))
                grad[:, i] = 1.0
            if order >= 2:
                hess = np.zeros((m, n, n))
            out.append(cls(pts[:, i].copy(), grad, hess))
        return out

    @property
    def order(self):
        if self.grad is None:
            return 0
        return 1 if self.hess is None else 2

    def __len__(self):
        return len(self.val)

    def take(self, idx):
        g = None if self.grad is None else self.grad[idx]
        h = None if self.hess is None else self.hess[idx]
        return Jet(self.val[idx], g, h)

    def __repr__(self):
        return f"Jet(order={self.order}, m={np.shape(self.val)[0] if np.ndim(self.val) else 1})"

    # arithmetic -------------------------------------------------------
    def __neg__(self):
        return Jet(-self.val, _neg(self.grad), _neg(self.hess))

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val + other.val, _add(self.grad, other.grad),
                       _add(self.hess, other.hess))
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            val = a.val * b.val
            grad = hess = None
            if a.grad is not None and b.grad is not None:
                grad = a.grad * b.val[:, None] + b.grad * a.val[:, None]
            if a.hess is not None and b.hess is not None:
                cross = a.grad[:, :, None] * b.grad[:, None, :]
                hess = (a.hess * b.val[:, None, None] + b.hess * a.val[:, None, None]
                        + cross + np.swapaxes(cross, 1, 2))
            return Jet(val, grad, hess)
        c = np.asarray(other, dtype=float)
        return Jet(self.val * c, _scale(self.grad, c, 1), _scale(self.hess, c, 2))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        c = np.asarray(other, dtype=float)
        if np.any(c == 0):
            raise DomainError("division by zero")
        return self * (1.0 / c)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, k):
        return power(self, k)


def _neg(a):
    return None if a is None else -a


def _add(a, b):
    if a is None or b is None:
        return None
    return a + b


def _scale(a, c, extra):
    if a is None:
        return None
    if np.ndim(c) == 0:
        return a * c
    return a * c.reshape(c.shape + (1,) * extra)


def value(x):
    return x.val if isinstance(x, Jet) else x


def apply1(x, f0, f1=None, f2=None):
    """Chain rule for a scalar function with value/first/second derivative arrays."""
    grad = hess = None
    if x.grad is not None:
        grad = x.grad * f1[:, None]
    if x.hess is not None:
        hess = (x.hess * f1[:, None, None]
                + f2[:, None, None] * x.grad[:, :, None] * x.grad[:, None, :])
    return Jet(f0, grad, hess)


def apply2(x, y, f0, fx, fy, fxx, fxy, fyy):
    """Chain rule for a scalar function of two jets sharing the same seeds."""
    grad = hess = None
    if x.grad is not None:
        grad = x.grad * fx[:, None] + y.grad * fy[:, None]
    if x.hess is not None:
        gx, gy = x.grad, y.grad
        xy = gx[:, :, None] * gy[:, None, :]
        hess = (x.hess * fx[:, None, None] + y.hess * fy[:, None, None]
                + fxx[:, None, None] * gx[:, :, None] * gx[:, None, :]
                + fxy[:, None, None] * (xy + np.swapaxes(xy, 1, 2))
                + fyy[:, None, None] * gy[:, :, None] * gy[:, None, :])
    return Jet(f0, grad, hess)


def where(mask, a, b):
    """Select ``a`` where ``mask`` holds and ``b`` elsewhere (jets or arrays)."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(mask, a, b)
    ref = a if isinstance(a, Jet) else b
    m = len(ref.val)
    a = as_jet(a, ref, m)
    b = as_jet(b, ref, m)
    val = np.where(mask, a.val, b.val)
    grad = hess = None
    if ref.grad is not None:
        grad = np.where(mask[:, None], a.grad, b.grad)
    if ref.hess is not None:
        hess = np.where(mask[:, None, None], a.hess, b.hess)
    return Jet(val, grad, hess)


def as_jet(x, like, m=None):
    """Promote a constant (scalar or per-point array) to a jet shaped like ``like``."""
    if isinstance(x, Jet):
        return x
    m = len(like.val) if m is None else m
    val = np.broadcast_to(np.asarray(x, dtype=float), (m,)).copy()
    grad = None if like.grad is None else np.zeros_like(like.grad)
    hess = None if like.hess is None else np.zeros_like(like.hess)
    return Jet(val, grad, hess)


# elementary functions --------------------------------------------------

def reciprocal(x):
    v = value(x)
    if np.any(np.asarray(v) == 0):
        raise DomainError("division by zero", witness=_first(np.asarray(v) == 0))
    if not isinstance(x, Jet):
        return 1.0 / v
    r = 1.0 / v
    return apply1(x, r, -r * r, 2.0 * r * r * r)


def power(x, k):
    k = int(k)
    v = value(x)
    if k < 0 and np.any(np.asarray(v) == 0):
        raise DomainError("division by zero", witness=_first(np.asarray(v) == 0))
    if not isinstance(x, Jet):
        return np.power(np.asarray(v, dtype=float), k)
    if k == 0:
        return as_jet(1.0, x)
    if k == 1:
        return x
    if k == 2:
        return x * x
    f1 = k * np.power(v, k - 1)
    f2 = k * (k - 1) * np.power(v, k - 2)
    return apply1(x, np.power(v, k), f1, f2)


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.val)
    return apply1(x, e, e, e)


def log(x):
    v = np.asarray(value(x))
    if np.any(v <= 0):
        raise DomainError("log of a nonpositive number", witness=_first(v <= 0))
    if not isinstance(x, Jet):
        return np.log(v)
    r = 1.0 / x.val
    return apply1(x, np.log(x.val), r, -r * r)


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    s, c = np.sin(x.val), np.cos(x.val)
    return apply1(x, s, c, -s)


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    s, c = np.sin(x.val), np.cos(x.val)
    return apply1(x, c, -s, -c)


def sqrt(x):
    v = np.asarray(value(x))
    if np.any(v < 0):
        raise DomainError("sqrt of a negative number", witness=_first(v < 0))
    if not isinstance(x, Jet):
        return np.sqrt(v)
    if x.order >= 1 and np.any(v == 0):
        # sqrt is not differentiable at 0
        raise DomainError("derivative of sqrt at 0", witness=_first(v == 0))
    r = np.sqrt(x.val)
    return apply1(x, r, 0.5 / r, -0.25 / (r * x.val))


def _first(mask):
    idx = np.flatnonzero(np.atleast_1d(mask))
    return {"index": int(idx[0])} if idx.size else None


FUNCTIONS = {"exp": exp, "log": log, "sin": sin, "cos": cos, "sqrt": sqrt}


def assemble(m, parts, like):
    """Build a length-``m`` jet from ``(indices, piece)`` pairs covering 0..m-1."""
    out = as_jet(0.0, like, m)
    for idx, piece in parts:
        if len(idx) == 0:
            continue
        piece = as_jet(piece, like.take(idx)) if not isinstance(piece, Jet) else piece
        out.val[idx] = piece.val
        if out.grad is not None:
            out.grad[idx] = piece.grad
        if out.hess is not None:
            out.hess[idx] = piece.hess
    return out
