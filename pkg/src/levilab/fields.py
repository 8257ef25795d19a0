"""Smooth real scalar fields on C^n = R^{2n} with exact jets.

Coordinates are interleaved: ``z_j = x[2j] + i*x[2j+1]``.  A field is a
function ``(X, order) -> Jet`` plus a descriptor; fields combine under
``+ - * /``, powers, ``exp``/``log`` and composition with smooth univariate
maps, which is all the constructions downstream need.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .jets import Jet, exp_derivs, log_derivs, power_derivs


class EvaluationError(ArithmeticError):
    """A field produced a non-finite value or derivative."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[None, :] if X.ndim == 1 else X


class Univariate:
    """Smooth map R -> R given by its derivative table ``derivs(x, order)``."""

    def __init__(self, name: str, derivs: Callable[[np.ndarray, int], np.ndarray], max_order: int = 8):
        self.name = name
        self._derivs = derivs
        self.max_order = max_order

    def derivs(self, x, order: int) -> np.ndarray:
        if order > self.max_order:
            raise ValueError(f"{self.name}: derivatives above order {self.max_order} unavailable")
        return self._derivs(np.asarray(x, dtype=float), order)

    def __call__(self, x):
        return self.derivs(np.atleast_1d(x), 0)[0]


class ScalarField:
    def __init__(self, nvar: int, jetfn: Callable[[np.ndarray, int], Jet], descriptor: str = "field"):
        self.nvar = nvar
        self._jetfn = jetfn
        self.descriptor = descriptor
        self._last = None

    def __repr__(self):
        return f"ScalarField({self.descriptor!r}, nvar={self.nvar})"

    @property
    def n(self) -> int:
        return self.nvar // 2

    def jet(self, X, order: int) -> Jet:
        X = as_points(X)
        last = self._last
        if last is not None and last[0] is X and last[1] >= order:
            return last[2].truncate(order)
        J = self._jetfn(X, order)
        self._last = (X, order, J)
        return J

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        v = np.real(self.jet(as_points(X), 0).value)
        return float(v[0]) if X.ndim == 1 else v

    def derivative(self, X, alpha) -> np.ndarray:
        J = self.jet(as_points(X), sum(alpha))
        return np.real(J.partial(alpha))

    # algebra ----------------------------------------------------------
    def _lift(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            if other.nvar != self.nvar:
                raise ValueError("dimension mismatch between fields")
            return other
        return constant(self.nvar, float(other))

    def __add__(self, other):
        o = self._lift(other)
        return ScalarField(self.nvar, lambda X, K: self.jet(X, K) + o.jet(X, K), f"({self.descriptor} + {o.descriptor})")

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return ScalarField(self.nvar, lambda X, K: self.jet(X, K) - o.jet(X, K), f"({self.descriptor} - {o.descriptor})")

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return ScalarField(self.nvar, lambda X, K: -self.jet(X, K), f"-{self.descriptor}")

    def __mul__(self, other):
        if not isinstance(other, ScalarField):
            c = float(other)
            return ScalarField(self.nvar, lambda X, K: self.jet(X, K) * c, f"{c!r}*{self.descriptor}")
        return ScalarField(self.nvar, lambda X, K: self.jet(X, K) * other.jet(X, K), f"{self.descriptor}*{other.descriptor}")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, ScalarField):
            return self * (1.0 / float(other))
        return ScalarField(self.nvar, lambda X, K: self.jet(X, K) / other.jet(X, K), f"{self.descriptor}/{other.descriptor}")

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            return ScalarField(self.nvar, lambda X, K: self.jet(X, K) ** int(p), f"{self.descriptor}^{p}")
        p = float(p)
        return ScalarField(
            self.nvar, lambda X, K: self.jet(X, K).compose(power_derivs(self.jet(X, K).value, p, K)), f"{self.descriptor}^{p!r}"
        )

    def exp(self) -> "ScalarField":
        return ScalarField(self.nvar, lambda X, K: self.jet(X, K).exp(), f"exp({self.descriptor})")

    def log(self) -> "ScalarField":
        return ScalarField(self.nvar, lambda X, K: self.jet(X, K).log(), f"log({self.descriptor})")

    def apply(self, phi: Univariate) -> "ScalarField":
        def jetfn(X, K):
            J = self.jet(X, K)
            return J.compose(phi.derivs(np.real(J.value), K))

        return ScalarField(self.nvar, jetfn, f"{phi.name}({self.descriptor})")


# primitives -------------------------------------------------------------------


def constant(nvar: int, c: float) -> ScalarField:
    return ScalarField(nvar, lambda X, K: Jet.constant(c, nvar, K, X.shape[0]), repr(c))


def coordinate(nvar: int, i: int) -> ScalarField:
    return ScalarField(nvar, lambda X, K: Jet.variable(X[:, i], i, nvar, K), f"x{i}")


def re_z(n: int, j: int) -> ScalarField:
    return ScalarField(2 * n, lambda X, K: Jet.variable(X[:, 2 * j], 2 * j, 2 * n, K), f"re(z{j + 1})")


def im_z(n: int, j: int) -> ScalarField:
    return ScalarField(2 * n, lambda X, K: Jet.variable(X[:, 2 * j + 1], 2 * j + 1, 2 * n, K), f"im(z{j + 1})")


def abs2(n: int, j: int) -> ScalarField:
    def jetfn(X, K):
        x = Jet.variable(X[:, 2 * j], 2 * j, 2 * n, K)
        y = Jet.variable(X[:, 2 * j + 1], 2 * j + 1, 2 * n, K)
        return x * x + y * y

    return ScalarField(2 * n, jetfn, f"|z{j + 1}|^2")


def norm2(n: int) -> ScalarField:
    def jetfn(X, K):
        out = Jet.constant(0.0, 2 * n, K, X.shape[0])
        for v in range(2 * n):
            x = Jet.variable(X[:, v], v, 2 * n, K)
            out = out + x * x
        return out

    return ScalarField(2 * n, jetfn, "|z|^2")


def complex_coordinate_jets(X: np.ndarray, n: int, order: int) -> list[Jet]:
    """Complex jets of z_1..z_n at the points X."""
    out = []
    for j in range(n):
        x = Jet.variable(X[:, 2 * j], 2 * j, 2 * n, order)
        y = Jet.variable(X[:, 2 * j + 1], 2 * j + 1, 2 * n, order)
        out.append(x + y * 1j)
    return out


def to_real(z) -> np.ndarray:
    """Complex coordinates (..., n) -> interleaved reals (..., 2n)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def to_complex(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[..., 0::2] + 1j * X[..., 1::2]


# smooth step built from exp(-1/t) --------------------------------------------

_FLAT = 2e-3  # exp(-1/t) < 1e-200 below this


def _psi_jet(t: Jet) -> Jet:
    return (-t.reciprocal()).exp()


def smoothstep_derivs(t, order: int) -> np.ndarray:
    """S(t) = psi(t)/(psi(t)+psi(1-t)), psi(t) = exp(-1/t); S = 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros((order + 1,) + t.shape)
    out[0] = (t >= 0.5).astype(float)
    mid = (t > _FLAT) & (t < 1 - _FLAT)
    out[0][t >= 1 - _FLAT] = 1.0
    out[0][t <= _FLAT] = 0.0
    if np.any(mid):
        tm = t[mid]
        u = Jet.variable(tm, 0, 1, order)
        a = _psi_jet(u)
        b = _psi_jet(1.0 - u)
        S = a / (a + b)
        fac = np.array([math.factorial(k) for k in range(order + 1)], dtype=float)
        out[:, mid] = S.c[: order + 1] * fac[:, None]
    return out


smoothstep = Univariate("smoothstep", smoothstep_derivs)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def smoothstep_integral(t) -> np.ndarray:
    """I(t) = int_0^t S; I(1) = 1/2 by the symmetry S(t) + S(1-t) = 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    nodes = 0.5 * t[..., None] * (_GL_X + 1.0)
    vals = smoothstep_derivs(nodes, 0)[0]
    return 0.5 * t * np.sum(vals * _GL_W, axis=-1)
