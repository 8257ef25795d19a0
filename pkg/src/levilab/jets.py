"""Truncated multivariate Taylor polynomials, batched over evaluation points.

A :class:`Jet` of order ``K`` in ``nvar`` real variables stores the Taylor
coefficients ``c[alpha, p]`` of a function around each of ``P`` base points::

    f(x_p + h) = sum_{|alpha| <= K} c[alpha, p] * h**alpha + O(|h|**(K+1))

so that ``d^alpha f(x_p) = alpha! * c[alpha, p]``.  Coefficients may be complex,
which is how Wirtinger derivatives and complex vector fields are carried.
Monomials are ordered by total degree, so the order-``k`` basis is a prefix of
the order-``K`` basis for every ``k <= K``.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


class _Basis:
    def __init__(self, nvar: int, order: int):
        monos = []
        for deg in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvar), deg):
                a = [0] * nvar
                for i in combo:
                    a[i] += 1
                monos.append(tuple(a))
        self.nvar = nvar
        self.order = order
        self.monos = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.size = len(monos)
        self.factorial = np.array(
            [math.prod(math.factorial(k) for k in m) for m in monos], dtype=float
        )
        degree = [sum(m) for m in monos]

        ia, ib, io = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if degree[i] + degree[j] <= order:
                    ia.append(i)
                    ib.append(j)
                    io.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.ia = np.array(ia, dtype=np.intp)
        self.ib = np.array(ib, dtype=np.intp)
        npairs = len(io)
        self.prod = sp.csr_matrix(
            (np.ones(npairs), (np.array(io), np.arange(npairs))), shape=(self.size, npairs)
        )

        # d/dx_v maps the order-K basis onto the order-(K-1) prefix
        lower = sum(1 for d in degree if d <= order - 1)
        self.diff_src = []
        self.diff_fac = []
        for v in range(nvar):
            src = np.empty(lower, dtype=np.intp)
            fac = np.empty(lower)
            for i in range(lower):
                b = list(monos[i])
                fac[i] = b[v] + 1
                b[v] += 1
                src[i] = self.index[tuple(b)]
            self.diff_src.append(src)
            self.diff_fac.append(fac)


@lru_cache(maxsize=None)
def basis(nvar: int, order: int) -> _Basis:
    return _Basis(nvar, order)


def basis_size(nvar: int, order: int) -> int:
    return math.comb(nvar + order, order)


class Jet:
    """Batch of truncated Taylor expansions; see module docstring."""

    __slots__ = ("c", "nvar", "order")
    __array_priority__ = 100

    def __init__(self, coeffs: np.ndarray, nvar: int, order: int):
        self.c = coeffs
        self.nvar = nvar
        self.order = order

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, nvar: int, order: int, npts: int) -> "Jet":
        value = np.broadcast_to(np.asarray(value), (npts,))
        c = np.zeros((basis_size(nvar, order), npts), dtype=np.result_type(value, float))
        c[0] = value
        return cls(c, nvar, order)

    @classmethod
    def variable(cls, x0: np.ndarray, i: int, nvar: int, order: int) -> "Jet":
        x0 = np.asarray(x0, dtype=float)
        c = np.zeros((basis_size(nvar, order), x0.shape[0]))
        c[0] = x0
        if order >= 1:
            c[1 + i] = 1.0
        return cls(c, nvar, order)

    # accessors --------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def npts(self) -> int:
        return self.c.shape[1]

    def partial(self, alpha) -> np.ndarray:
        b = basis(self.nvar, self.order)
        i = b.index[tuple(alpha)]
        return b.factorial[i] * self.c[i]

    def gradient(self) -> np.ndarray:
        """Real gradient, shape (P, nvar)."""
        return self.c[1 : 1 + self.nvar].T.copy()

    def hessian(self) -> np.ndarray:
        """Real Hessian, shape (P, nvar, nvar)."""
        b = basis(self.nvar, self.order)
        n = self.nvar
        out = np.empty((self.npts, n, n), dtype=self.c.dtype)
        for a in range(n):
            for bb in range(a, n):
                e = [0] * n
                e[a] += 1
                e[bb] += 1
                i = b.index[tuple(e)]
                v = b.factorial[i] * self.c[i]
                out[:, a, bb] = v
                out[:, bb, a] = v
        return out

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise jet order")
        return Jet(self.c[: basis_size(self.nvar, order)], self.nvar, order)

    # algebra ----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return self, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is None:
            c = a.c.astype(np.result_type(a.c, np.asarray(other)), copy=True)
            c[0] = c[0] + other
            return Jet(c, a.nvar, a.order)
        return Jet(a.c + b.c, a.nvar, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.nvar, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is None:
            return Jet(a.c * other, a.nvar, a.order)
        bs = basis(a.nvar, a.order)
        if a.order == 0:
            return Jet(a.c * b.c, a.nvar, 0)
        prod = a.c[bs.ia] * b.c[bs.ib]
        return Jet(np.asarray(bs.prod @ prod), a.nvar, a.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.c / other, self.nvar, self.order)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(1.0, self.nvar, self.order, self.npts)
            base = self
            k = int(p)
            while k:
                if k & 1:
                    out = out * base
                k >>= 1
                if k:
                    base = base * base
            return out
        return self.compose(power_derivs(self.value, float(p), self.order))

    def conj(self) -> "Jet":
        return Jet(np.conj(self.c), self.nvar, self.order)

    @property
    def real(self) -> "Jet":
        return Jet(np.real(self.c).copy(), self.nvar, self.order)

    @property
    def imag(self) -> "Jet":
        return Jet(np.imag(self.c).copy(), self.nvar, self.order)

    def reciprocal(self) -> "Jet":
        return self.compose(power_derivs(self.value, -1.0, self.order))

    def exp(self) -> "Jet":
        return self.compose(exp_derivs(self.value, self.order))

    def log(self) -> "Jet":
        return self.compose(log_derivs(self.value, self.order))

    def compose(self, derivs: np.ndarray) -> "Jet":
        """Jet of ``phi(self)`` given ``derivs[k] = phi^(k)(self.value)``, k = 0..order."""
        derivs = np.asarray(derivs)
        if derivs.shape[0] < self.order + 1:
            raise ValueError("not enough derivatives for composition")
        delta = Jet(self.c.copy(), self.nvar, self.order)
        delta.c[0] = 0.0
        out = Jet.constant(derivs[self.order] / math.factorial(self.order), self.nvar, self.order, self.npts)
        for k in range(self.order - 1, -1, -1):
            out = out * delta + derivs[k] / math.factorial(k)
        return out

    # differentiation --------------------------------------------------
    def diff(self, v: int) -> "Jet":
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        b = basis(self.nvar, self.order)
        c = self.c[b.diff_src[v]] * b.diff_fac[v][:, None]
        return Jet(c, self.nvar, self.order - 1)

    def dz(self, j: int) -> "Jet":
        """Wirtinger derivative d/dz_j, with z_j = x[2j] + i x[2j+1]."""
        return Jet(0.5 * (self.diff(2 * j).c - 1j * self.diff(2 * j + 1).c), self.nvar, self.order - 1)

    def dzbar(self, j: int) -> "Jet":
        return Jet(0.5 * (self.diff(2 * j).c + 1j * self.diff(2 * j + 1).c), self.nvar, self.order - 1)


# univariate derivative tables -------------------------------------------------


def exp_derivs(u0, order: int) -> np.ndarray:
    e = np.exp(u0)
    return np.stack([e] * (order + 1))


def log_derivs(u0, order: int) -> np.ndarray:
    u0 = np.asarray(u0)
    out = [np.log(u0)]
    for k in range(1, order + 1):
        out.append((-1) ** (k - 1) * math.factorial(k - 1) / u0**k)
    return np.stack(out)


def power_derivs(u0, p: float, order: int) -> np.ndarray:
    u0 = np.asarray(u0)
    out = []
    coef = 1.0
    for k in range(order + 1):
        out.append(coef * u0 ** (p - k))
        coef *= p - k
    return np.stack(out)
