"""Forward-mode automatic differentiation on generic scalars.

Two scalar types are provided:

``Dual``
    Carries a value together with its gradient and (optionally) Hessian with
    respect to a fixed set of ``width`` seed directions.  Every field
    broadcasts over an arbitrary leading batch shape, so a single pass
    differentiates one term of a path objective at every time step at once.

``Jet``
    A light first-order dual whose coefficients may themselves be ``Dual``
    instances (or arrays).  It is used to take Jacobians of model functions
    (drift, diffusion columns) inside expressions that are simultaneously
    being differentiated to second order by ``Dual``.

Model code stays agnostic of all this by using the module-level ``exp``,
``log`` and ``sqrt`` plus ordinary arithmetic operators.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Dual",
    "Jet",
    "exp",
    "log",
    "sqrt",
    "grad",
    "hessian_dense",
    "value_grad_hessian",
    "solve_linear",
    "det_generic",
]


def _c1(c):
    # constant factor broadcast against a gradient axis
    return np.asarray(c)[..., None]


def _c2(c):
    # constant factor broadcast against Hessian axes
    return np.asarray(c)[..., None, None]


class Dual:
    """Batched forward-mode dual number of differentiation order 1 or 2.

    ``val`` has an arbitrary (possibly empty) batch shape ``S``; ``grad`` has
    shape ``S + (width,)`` and ``hess``, when present, ``S + (width, width)``.
    """

    __slots__ = ("val", "grad", "hess")
    # keep ndarray operators from absorbing us into object arrays
    __array_ufunc__ = None

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def seed(cls, val, index, width, order=2):
        """Independent variable number ``index`` out of ``width``."""
        val = np.asarray(val, dtype=float)
        grad = np.zeros(val.shape + (width,))
        grad[..., index] = 1.0
        hess = np.zeros(val.shape + (width, width)) if order == 2 else None
        return cls(val, grad, hess)

    @classmethod
    def constant(cls, val, width, order=2):
        val = np.asarray(val, dtype=float)
        grad = np.zeros(val.shape + (width,))
        hess = np.zeros(val.shape + (width, width)) if order == 2 else None
        return cls(val, grad, hess)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, Dual):
            h = None if self.hess is None else self.hess + other.hess
            return Dual(self.val + other.val, self.grad + other.grad, h)
        return Dual(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, Dual):
            h = None if self.hess is None else self.hess - other.hess
            return Dual(self.val - other.val, self.grad - other.grad, h)
        return Dual(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        h = None if self.hess is None else -self.hess
        return Dual(other - self.val, -self.grad, h)

    def __neg__(self):
        h = None if self.hess is None else -self.hess
        return Dual(-self.val, -self.grad, h)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, Dual):
            val = self.val * other.val
            grad = self.grad * _c1(other.val) + other.grad * _c1(self.val)
            if self.hess is None:
                return Dual(val, grad)
            cross = self.grad[..., :, None] * other.grad[..., None, :]
            hess = (
                self.hess * _c2(other.val)
                + other.hess * _c2(self.val)
                + cross
                + np.swapaxes(cross, -1, -2)
            )
            return Dual(val, grad, hess)
        h = None if self.hess is None else self.hess * _c2(other)
        return Dual(self.val * other, self.grad * _c1(other), h)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, Dual):
            return self * other._reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return self._reciprocal() * other

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("Dual exponents must be constants")
        v = self.val
        return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    # -- elementary functions ---------------------------------------------

    def _chain(self, f0, f1, f2):
        g = self.grad
        if self.hess is None:
            return Dual(f0, _c1(f1) * g)
        outer = g[..., :, None] * g[..., None, :]
        return Dual(f0, _c1(f1) * g, _c2(f1) * self.hess + _c2(f2) * outer)

    def _reciprocal(self):
        inv = 1.0 / self.val
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        inv = 1.0 / self.val
        return self._chain(np.log(self.val), inv, -inv * inv)

    def sqrt(self):
        s = np.sqrt(self.val)
        return self._chain(s, 0.5 / s, -0.25 / (s * self.val))

    def __repr__(self):
        return f"Dual(val={self.val!r})"


class Jet:
    """First-order jet with generic coefficients.

    ``parts[j]`` is the derivative of ``val`` in seed direction ``j``.  Both
    ``val`` and the parts may be floats, arrays or :class:`Dual` instances.
    Operands that are not jets are treated as constants with respect to the
    jet directions; in this package every quantity seeded in those
    directions enters the computation as a ``Jet``, so that convention is
    exact.
    """

    __slots__ = ("val", "parts")
    __array_ufunc__ = None

    def __init__(self, val, parts):
        self.val = val
        self.parts = tuple(parts)

    @classmethod
    def seed(cls, val, index, width):
        return cls(val, tuple(1.0 if j == index else 0.0 for j in range(width)))

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val + other.val, tuple(a + b for a, b in zip(self.parts, other.parts)))
        return Jet(self.val + other, self.parts)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val - other.val, tuple(a - b for a, b in zip(self.parts, other.parts)))
        return Jet(self.val - other, self.parts)

    def __rsub__(self, other):
        return Jet(other - self.val, tuple(-p for p in self.parts))

    def __neg__(self):
        return Jet(-self.val, tuple(-p for p in self.parts))

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(
                self.val * other.val,
                tuple(a * other.val + self.val * b for a, b in zip(self.parts, other.parts)),
            )
        return Jet(self.val * other, tuple(p * other for p in self.parts))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            inv = 1.0 / other.val
            return Jet(
                self.val * inv,
                tuple((a - self.val * inv * b) * inv for a, b in zip(self.parts, other.parts)),
            )
        inv = 1.0 / other
        return Jet(self.val * inv, tuple(p * inv for p in self.parts))

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        v = other * inv
        return Jet(v, tuple(-v * inv * p for p in self.parts))

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("Jet exponents must be constants")
        d = p * self.val ** (p - 1)
        return Jet(self.val**p, tuple(d * q for q in self.parts))

    def exp(self):
        e = exp(self.val)
        return Jet(e, tuple(e * p for p in self.parts))

    def log(self):
        inv = 1.0 / self.val
        return Jet(log(self.val), tuple(inv * p for p in self.parts))

    def sqrt(self):
        s = sqrt(self.val)
        d = 0.5 / s
        return Jet(s, tuple(d * p for p in self.parts))

    def __repr__(self):
        return f"Jet(val={self.val!r})"


def exp(x):
    if isinstance(x, (Dual, Jet)):
        return x.exp()
    return np.exp(x)


def log(x):
    if isinstance(x, (Dual, Jet)):
        return x.log()
    return np.log(x)


def sqrt(x):
    if isinstance(x, (Dual, Jet)):
        return x.sqrt()
    return np.sqrt(x)


def jet_parts(v, width):
    """Derivative parts of ``v``; zeros when ``v`` is jet-constant."""
    if isinstance(v, Jet):
        return v.parts
    return (0.0,) * width


def jet_value(v):
    return v.val if isinstance(v, Jet) else v


# -- whole-vector helpers ---------------------------------------------------


def grad(fn, x):
    """Exact forward-mode gradient of ``fn`` at ``x``.

    ``fn`` maps a sequence of generic scalars to one generic scalar.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    seeds = [Dual.seed(x[i], i, m, order=1) for i in range(m)]
    out = fn(seeds)
    if not isinstance(out, Dual):
        return np.zeros(m)
    return np.asarray(out.grad, dtype=float).reshape(m)


def value_grad_hessian(fn, x):
    """Value, gradient and dense Hessian of ``fn`` at ``x`` in one pass."""
    x = np.asarray(x, dtype=float)
    m = x.size
    seeds = [Dual.seed(x[i], i, m, order=2) for i in range(m)]
    out = fn(seeds)
    if not isinstance(out, Dual):
        return float(out), np.zeros(m), np.zeros((m, m))
    return (
        float(out.val),
        np.asarray(out.grad, dtype=float).reshape(m),
        np.asarray(out.hess, dtype=float).reshape(m, m),
    )


def hessian_dense(fn, x):
    return value_grad_hessian(fn, x)[2]


# -- tiny generic linear algebra --------------------------------------------
#
# These run on generic scalars (batched Duals included), so they avoid
# pivoting; the diffusion matrices they are applied to are well conditioned
# by model assumption.  Scalar and 2x2 cases are closed-form.


def solve_linear(mat, rhs):
    """Solve ``mat @ x = rhs`` for a small matrix of generic scalars."""
    n = len(rhs)
    if n == 1:
        return [rhs[0] / mat[0][0]]
    if n == 2:
        a, b = mat[0][0], mat[0][1]
        c, d = mat[1][0], mat[1][1]
        det = a * d - b * c
        return [(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det]
    a = [list(row) for row in mat]
    x = list(rhs)
    for k in range(n):
        piv = a[k][k]
        for i in range(k + 1, n):
            f = a[i][k] / piv
            for j in range(k + 1, n):
                a[i][j] = a[i][j] - f * a[k][j]
            x[i] = x[i] - f * x[k]
    out = [None] * n
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s = s - a[i][j] * out[j]
        out[i] = s / a[i][i]
    return out


def det_generic(mat):
    """Determinant of a small matrix of generic scalars."""
    n = len(mat)
    if n == 1:
        return mat[0][0]
    if n == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    a = [list(row) for row in mat]
    det = 1.0
    for k in range(n):
        piv = a[k][k]
        det = det * piv
        for i in range(k + 1, n):
            f = a[i][k] / piv
            for j in range(k + 1, n):
                a[i][j] = a[i][j] - f * a[k][j]
    return det
