"""Forward-mode dual numbers carrying a gradient vector."""

from __future__ import annotations

import math

import numpy as np

from doakit.errors import DomainError


class Dual:
    __slots__ = ("val", "grad")

    def __init__(self, val: float, grad):
        self.val = float(val)
        self.grad = np.asarray(grad, dtype=np.float64)

    @classmethod
    def constant(cls, val: float, nvars: int) -> Dual:
        return cls(val, np.zeros(nvars))

    @classmethod
    def variable(cls, val: float, index: int, nvars: int) -> Dual:
        g = np.zeros(nvars)
        g[index] = 1.0
        return cls(val, g)

    def __add__(self, o: Dual) -> Dual:
        return Dual(self.val + o.val, self.grad + o.grad)

    def __sub__(self, o: Dual) -> Dual:
        return Dual(self.val - o.val, self.grad - o.grad)

    def __mul__(self, o: Dual) -> Dual:
        return Dual(self.val * o.val, self.grad * o.val + o.grad * self.val)

    def __truediv__(self, o: Dual) -> Dual:
        if o.val == 0.0:
            raise DomainError("division by zero")
        q = self.val / o.val
        return Dual(q, (self.grad - q * o.grad) / o.val)

    def __neg__(self) -> Dual:
        return Dual(-self.val, -self.grad)

    def __pow__(self, k: int) -> Dual:
        if k == 0:
            return Dual(1.0, np.zeros_like(self.grad))
        return Dual(self.val**k, k * self.val ** (k - 1) * self.grad)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.grad!r})"


def sin(a: Dual) -> Dual:
    return Dual(math.sin(a.val), math.cos(a.val) * a.grad)


def cos(a: Dual) -> Dual:
    return Dual(math.cos(a.val), -math.sin(a.val) * a.grad)


def exp(a: Dual) -> Dual:
    e = math.exp(a.val)
    return Dual(e, e * a.grad)


def tanh(a: Dual) -> Dual:
    t = math.tanh(a.val)
    return Dual(t, (1.0 - t * t) * a.grad)


def sqrt(a: Dual) -> Dual:
    if a.val <= 0.0:
        raise DomainError(f"sqrt is not differentiable at {a.val!r}")
    r = math.sqrt(a.val)
    return Dual(r, a.grad / (2.0 * r))


def dabs(a: Dual) -> Dual:
    if a.val == 0.0:
        raise DomainError("abs is not differentiable at 0")
    s = 1.0 if a.val > 0 else -1.0
    return Dual(abs(a.val), s * a.grad)


UNARY = {"sin": sin, "cos": cos, "exp": exp, "tanh": tanh, "sqrt": sqrt, "abs": dabs}
