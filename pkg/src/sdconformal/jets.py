"""Truncated multivariate Taylor (jet) arithmetic.

A jet stores the Taylor coefficients of an analytic function at a base
point, up to a fixed total degree, in up to five variables.  Coefficient
convention: ``coeffs[mu] = d^mu f / mu!``, so multiplication is a plain
truncated convolution.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

MAX_VARS = 5


class JetDomainError(ArithmeticError):
    """A jet operation left the analytic domain (division by a jet with
    zero constant term, log/sqrt of a nonpositive constant term, ...)."""


def _monomials(nvars: int, degree: int):
    """Multi-indices of total degree `degree`, lexicographic."""
    if nvars == 1:
        yield (degree,)
        return
    for head in range(degree, -1, -1):
        for tail in _monomials(nvars - 1, degree - head):
            yield (head,) + tail


@lru_cache(maxsize=None)
def _tables(nvars: int, order: int):
    mindex = [mu for deg in range(order + 1) for mu in _monomials(nvars, deg)]
    index = {mu: i for i, mu in enumerate(mindex)}
    ii, jj, kk = [], [], []
    for i, mi in enumerate(mindex):
        for j, mj in enumerate(mindex):
            s = tuple(a + b for a, b in zip(mi, mj))
            k = index.get(s)
            if k is not None:
                ii.append(i)
                jj.append(j)
                kk.append(k)
    return (
        tuple(mindex),
        index,
        np.asarray(ii, dtype=np.intp),
        np.asarray(jj, dtype=np.intp),
        np.asarray(kk, dtype=np.intp),
    )


class JetSpace:
    """Shared structure (variables, truncation order, index tables) for jets."""

    __slots__ = ("vars", "order", "mindex", "index", "_ii", "_jj", "_kk")

    _cache: dict[tuple, "JetSpace"] = {}

    def __new__(cls, variables, order):
        variables = tuple(variables)
        key = (variables, int(order))
        hit = cls._cache.get(key)
        if hit is not None:
            return hit
        if not 1 <= len(variables) <= MAX_VARS:
            raise ValueError(f"jet spaces support 1..{MAX_VARS} variables")
        if order < 0:
            raise ValueError("order must be >= 0")
        self = object.__new__(cls)
        self.vars = variables
        self.order = int(order)
        self.mindex, self.index, self._ii, self._jj, self._kk = _tables(
            len(variables), int(order)
        )
        cls._cache[key] = self
        return self

    def __len__(self):
        return len(self.mindex)

    def __repr__(self):
        return f"JetSpace(vars={self.vars}, order={self.order})"

    def constant(self, value: float) -> "Jet":
        c = np.zeros(len(self.mindex))
        c[0] = float(value)
        return Jet(self, c)

    def zero(self) -> "Jet":
        return Jet(self, np.zeros(len(self.mindex)))

    def variable(self, name: str, value: float) -> "Jet":
        """The jet of the coordinate function `name` at `value`."""
        pos = self.vars.index(name)
        c = np.zeros(len(self.mindex))
        c[0] = float(value)
        if self.order >= 1:
            unit = tuple(1 if i == pos else 0 for i in range(len(self.vars)))
            c[self.index[unit]] = 1.0
        return Jet(self, c)

    def seed(self, point: dict[str, float]) -> dict[str, "Jet"]:
        """Seed every space variable at the given base point."""
        return {v: self.variable(v, point[v]) for v in self.vars}


class Jet:
    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- basic accessors -------------------------------------------------
    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def extract(self, mu) -> float:
        """The partial derivative d^mu f at the base point."""
        if isinstance(mu, int):
            mu = (mu,)
        mu = tuple(mu)
        if len(mu) != len(self.space.vars):
            raise IndexError("multi-index length does not match variables")
        if mu not in self.space.index:
            raise IndexError(f"multi-index {mu} exceeds jet order")
        fact = 1.0
        for m in mu:
            fact *= math.factorial(m)
        return float(self.coeffs[self.space.index[mu]]) * fact

    def gradient(self) -> np.ndarray:
        """First partial derivatives, in variable order."""
        n = len(self.space.vars)
        out = np.empty(n)
        for i in range(n):
            unit = tuple(1 if j == i else 0 for j in range(n))
            out[i] = self.coeffs[self.space.index[unit]]
        return out

    def derivative(self, var: str) -> "Jet":
        """The jet of df/d(var), truncated one order lower."""
        if self.space.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        pos = self.space.vars.index(var)
        lower = JetSpace(self.space.vars, self.space.order - 1)
        c = np.zeros(len(lower.mindex))
        for mu, i in lower.index.items():
            up = tuple(m + 1 if j == pos else m for j, m in enumerate(mu))
            c[i] = (mu[pos] + 1) * self.coeffs[self.space.index[up]]
        return Jet(lower, c)

    def truncate(self, order: int) -> "Jet":
        lower = JetSpace(self.space.vars, order)
        c = np.array([self.coeffs[self.space.index[mu]] for mu in lower.mindex])
        return Jet(lower, c)

    # -- ring operations -------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets from different spaces")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.space.constant(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.space, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.space, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.space, other.coeffs - self.coeffs)

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.space, self.coeffs * float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        sp = self.space
        out = np.zeros(len(sp.mindex))
        np.add.at(out, sp._kk, self.coeffs[sp._ii] * other.coeffs[sp._jj])
        return Jet(sp, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.reciprocal()

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("jet exponents must be integers")
        n = int(n)
        if n < 0:
            return self.reciprocal() ** (-n)
        result = self.space.constant(1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- analytic functions ----------------------------------------------
    def compose(self, derivs) -> "Jet":
        """Sum_k derivs[k]/k! * (self - value)^k; derivs[k] = f^(k)(value)."""
        sp = self.space
        bar = Jet(sp, self.coeffs.copy())
        bar.coeffs[0] = 0.0
        out = sp.constant(derivs[0])
        power = sp.constant(1.0)
        fact = 1.0
        for k in range(1, min(len(derivs), sp.order + 1)):
            power = power * bar
            fact *= k
            out = out + power * (derivs[k] / fact)
        return out

    def reciprocal(self) -> "Jet":
        c = self.value
        if c == 0.0:
            raise JetDomainError("division by a jet with zero constant term")
        derivs = []
        s = 1.0 / c
        fact = 1.0
        for k in range(self.space.order + 1):
            derivs.append(fact * s)
            s *= -1.0 / c
            fact *= k + 1
        return self.compose(derivs)

    def exp(self) -> "Jet":
        e = math.exp(self.value)
        return self.compose([e] * (self.space.order + 1))

    def log(self) -> "Jet":
        c = self.value
        if c <= 0.0:
            raise JetDomainError("log of a jet with nonpositive constant term")
        derivs = [math.log(c)]
        s = 1.0 / c
        fact = 1.0
        for k in range(1, self.space.order + 1):
            derivs.append(fact * s)
            s *= -1.0 / c
            fact *= k
        return self.compose(derivs)

    def sqrt(self) -> "Jet":
        c = self.value
        if c <= 0.0:
            raise JetDomainError("sqrt of a jet with nonpositive constant term")
        derivs = [math.sqrt(c)]
        coef = 0.5
        s = math.sqrt(c) / c
        for k in range(1, self.space.order + 1):
            derivs.append(coef * s)
            coef *= 0.5 - k
            s /= c
        return self.compose(derivs)

    def sin(self) -> "Jet":
        c = self.value
        cycle = [math.sin(c), math.cos(c), -math.sin(c), -math.cos(c)]
        return self.compose([cycle[k % 4] for k in range(self.space.order + 1)])

    def cos(self) -> "Jet":
        c = self.value
        cycle = [math.cos(c), -math.sin(c), -math.cos(c), math.sin(c)]
        return self.compose([cycle[k % 4] for k in range(self.space.order + 1)])

    def __repr__(self):
        return f"Jet({self.space.vars}, order={self.space.order}, value={self.value})"
