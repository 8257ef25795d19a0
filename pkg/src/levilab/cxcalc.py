"""Wirtinger calculus on scalar fields: gradients, complex Hessians, third-order forms.

Conventions: ``H[j, k] = d^2 f / dz_j dzbar_k`` and
``H(X, Y) = sum_jk H[j, k] X_j conj(Y_k)``.  The matrix ``G = H.conj()`` is the
one whose standard quadratic form ``X^* G X`` equals ``H(X, X)``; eigenvectors of
``G`` are therefore directions in C^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import EvaluationError, ScalarField, as_points
from .jets import Jet


@dataclass(frozen=True)
class HermitianForm:
    entries: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.entries, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("HermitianForm needs a square matrix")
        if not np.allclose(H, H.conj().T, rtol=1e-9, atol=1e-9 * max(1.0, float(np.abs(H).max(initial=0.0)))):
            raise ValueError("HermitianForm entries are not Hermitian")
        object.__setattr__(self, "entries", H)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Matrix G with X^* G X = H(X, X)."""
        return self.entries.conj()

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def __call__(self, X, Y=None) -> complex:
        return hessian_apply(self, X, X if Y is None else Y)


def _check_finite(arr, what):
    bad = ~np.isfinite(arr)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise EvaluationError(f"non-finite {what} at index {idx}", index=idx)
    return arr


# jet-level helpers -----------------------------------------------------------


def gradient_jets(J: Jet, n: int) -> list[Jet]:
    return [J.dz(j) for j in range(n)]


def hessian_jets(J: Jet, n: int, grads: list[Jet] | None = None) -> list[list[Jet]]:
    g = grads if grads is not None else gradient_jets(J, n)
    return [[g[j].dzbar(k) for k in range(n)] for j in range(n)]


def wirtinger_gradient_batch(f: ScalarField, X) -> np.ndarray:
    """(P, n) array of d f / dz_j."""
    X = as_points(X)
    D = f.jet(X, 1).gradient()
    g = 0.5 * (D[:, 0::2] - 1j * D[:, 1::2])
    return _check_finite(g, "gradient")


def complex_hessian_of_jet(J: Jet) -> np.ndarray:
    """(P, n, n) complex Hessian read off a real jet of order >= 2."""
    D = np.real(J.hessian())
    xx = D[:, 0::2, 0::2]
    yy = D[:, 1::2, 1::2]
    xy = D[:, 0::2, 1::2]
    yx = D[:, 1::2, 0::2]
    return 0.25 * ((xx + yy) + 1j * (xy - yx))


def complex_hessian_batch(f: ScalarField, X) -> np.ndarray:
    """(P, n, n) array of d^2 f / dz_j dzbar_k."""
    return _check_finite(complex_hessian_of_jet(f.jet(as_points(X), 2)), "Hessian")


def third_tensor_batch(f: ScalarField, X) -> np.ndarray:
    """(P, n, n, n) array T[j, k, l] = d^3 f / dz_j dzbar_k dz_l."""
    X = as_points(X)
    n = f.nvar // 2
    J = f.jet(X, 3)
    H = hessian_jets(J, n)
    T = np.empty((X.shape[0], n, n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            for l in range(n):
                T[:, j, k, l] = H[j][k].dz(l).value
    return _check_finite(T, "third derivative")


# public operations ------------------------------------------------------------


def wirtinger_gradient(f: ScalarField, z) -> np.ndarray:
    return wirtinger_gradient_batch(f, z)[0]


def complex_hessian(f: ScalarField, z) -> HermitianForm:
    return HermitianForm(complex_hessian_batch(f, z)[0])


def hessian_apply(H, X, Y) -> complex:
    M = H.entries if isinstance(H, HermitianForm) else np.asarray(H)
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.shape[-1] != M.shape[0] or Y.shape[-1] != M.shape[1]:
        raise ValueError(f"dimension mismatch: form {M.shape}, vectors {X.shape[-1]}, {Y.shape[-1]}")
    return complex(X @ M @ Y.conj())


def third_form(f: ScalarField, z, X, Y, Z) -> complex:
    """(Z H_f)(X, Y)(z) = sum d^3 f / dz_j dzbar_k dz_l X_j conj(Y_k) Z_l."""
    T = third_tensor_batch(f, z)[0]
    return complex(np.einsum("jkl,j,k,l->", T, np.asarray(X), np.conj(Y), np.asarray(Z)))


def fd_hessian_oracle(f: ScalarField, z, h: float = 1e-4) -> HermitianForm:
    """Central-difference complex Hessian with one Richardson step (test oracle)."""
    if not h > 1e-12:
        raise ValueError(f"finite-difference step {h} underflows")
    x0 = np.asarray(z, dtype=float)
    m = x0.size

    def real_hessian(step):
        D = np.empty((m, m))
        E = np.eye(m) * step
        for a in range(m):
            for b in range(a, m):
                pts = np.array([x0 + E[a] + E[b], x0 + E[a] - E[b], x0 - E[a] + E[b], x0 - E[a] - E[b]])
                v = f(pts)
                D[a, b] = D[b, a] = (v[0] - v[1] - v[2] + v[3]) / (4 * step * step)
        return D

    D = (4 * real_hessian(h / 2) - real_hessian(h)) / 3
    H = 0.25 * ((D[0::2, 0::2] + D[1::2, 1::2]) + 1j * (D[0::2, 1::2] - D[1::2, 0::2]))
    return HermitianForm(H)
