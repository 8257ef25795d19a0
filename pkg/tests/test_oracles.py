"""Symbolic re-derivation of frozen reference values."""

import numpy as np
import pytest

sp = pytest.importorskip("sympy")

from levilab.cxcalc import complex_hessian, third_form  # noqa: E402
from levilab.domain import get_domain  # noqa: E402

x1, y1, x2, y2 = sp.symbols("x1 y1 x2 y2", real=True)
XY = [(x1, y1), (x2, y2)]


def dz(f, j):
    return (sp.diff(f, XY[j][0]) - sp.I * sp.diff(f, XY[j][1])) / 2


def dzbar(f, j):
    return (sp.diff(f, XY[j][0]) + sp.I * sp.diff(f, XY[j][1])) / 2


def skewed_rho():
    a1, a2 = x1**2 + y1**2, x2**2 + y2**2
    return (a1 + a2**2 - 1) * (1 + a2 / 4)


def test_frozen_obstruction_value():
    rho = skewed_rho()
    pt = {x1: 1, y1: 0, x2: 0, y2: 0}
    grad = [dz(rho, j).subs(pt) for j in range(2)]
    norm = sp.sqrt(sum(sp.Abs(g) ** 2 for g in grad))
    H22 = dzbar(dz(rho, 1), 1)
    val = sp.re(sum(sp.conjugate(grad[l]) / norm * dz(H22, l).subs(pt) for l in range(2)))
    assert sp.nsimplify(sp.simplify(val)) == sp.Rational(1, 4)


def test_symbolic_hessian_and_third_form_at_random_point():
    rho = skewed_rho()
    rng = np.random.default_rng(5)
    p = rng.uniform(-0.8, 0.8, 4)
    subs = dict(zip((x1, y1, x2, y2), p))
    H = np.array([[complex(dzbar(dz(rho, j), k).subs(subs).evalf()) for k in range(2)] for j in range(2)])
    spec = get_domain("skewed-egg2")
    assert np.allclose(complex_hessian(spec.rho, p).entries, H, atol=1e-12)
    T = complex(dz(dzbar(dz(rho, 0), 1), 1).subs(subs).evalf())
    e1, e2 = np.eye(2)
    assert third_form(spec.rho, p, e1, e2, e2) == pytest.approx(T, abs=1e-12)
