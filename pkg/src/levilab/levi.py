"""Levi form on the complex tangent space: ranks, frames, sigma, obstruction, compare constant."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cxcalc import HermitianForm, complex_hessian_batch, complex_hessian_of_jet, third_tensor_batch
from .domain import BoundarySample, BoundarySet, DomainSpec, normal_data
from .fields import ScalarField, as_points
from .jets import Jet

DEFAULT_LAM_TOL = 1e-8


class FrameError(RuntimeError):
    """Frame construction or continuation failed; the patch must shrink."""


class PreconditionError(ValueError):
    pass


@dataclass
class TangentFrame:
    point: np.ndarray
    weak: np.ndarray  # (n-1-i, n)
    strong: np.ndarray  # (i, n)
    rank: int
    kappa: float = 1.0
    eigenvalues: np.ndarray | None = None

    @property
    def n_weak(self) -> int:
        return self.weak.shape[0]


@dataclass
class Stratification:
    ranks: np.ndarray
    lam_tol: float
    eigenvalues: np.ndarray
    n: int

    def stratum(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.ranks == i)

    def counts(self) -> dict:
        return {i: int(np.sum(self.ranks == i)) for i in range(self.n)}


@dataclass
class FrameConstants:
    kappa: float
    K1: float
    K2: float
    n_weak: int
    c1: float = float("nan")

    @property
    def K(self) -> float:
        return 8.0 * self.K1 * self.K2 * self.n_weak


# tangential Levi form ---------------------------------------------------------


def tangent_bases(N: np.ndarray) -> np.ndarray:
    """(M, n, n-1) orthonormal bases of the Hermitian complements of the unit normals N."""
    N = np.atleast_2d(N)
    M, n = N.shape
    A = np.concatenate([N[:, :, None], np.broadcast_to(np.eye(n), (M, n, n))], axis=2)
    Q, _ = np.linalg.qr(A)
    return Q[:, :, 1:n]


def levi_matrices(spec: DomainSpec, P):
    """Compressed Levi matrices G_T (X^* G_T X = H(TX, TX)), tangent bases, normals, |d rho|."""
    P = as_points(P)
    N, gn, _ = normal_data(spec, P)
    T = tangent_bases(N)
    G = complex_hessian_batch(spec.rho, P).conj()
    L = np.einsum("mja,mjk,mkb->mab", T.conj(), G, T)
    return 0.5 * (L + np.conj(np.swapaxes(L, 1, 2))), T, N, gn


def levi_eigen(spec: DomainSpec, P):
    """Ascending Levi eigenvalues (M, n-1), eigen-directions in C^n (M, n, n-1), |d rho|."""
    L, T, N, gn = levi_matrices(spec, P)
    w, V = np.linalg.eigh(L)
    return w, np.einsum("mja,mab->mjb", T, V), gn


def tangential_levi(spec: DomainSpec, p) -> HermitianForm:
    point = p.point if isinstance(p, BoundarySample) else p
    L = levi_matrices(spec, point)[0][0]
    return HermitianForm(L.conj())


def levi_rank(spec: DomainSpec, p, lam_tol: float = DEFAULT_LAM_TOL) -> int:
    point = p.point if isinstance(p, BoundarySample) else p
    w, _, gn = levi_eigen(spec, point)
    return int(np.sum(w[0] > lam_tol * gn[0]))


def stratify(spec: DomainSpec, B: BoundarySet, lam_tol: float = DEFAULT_LAM_TOL) -> Stratification:
    w, _, gn = levi_eigen(spec, B.points)
    ranks = np.sum(w > lam_tol * gn[:, None], axis=1)
    return Stratification(ranks, lam_tol, w, spec.n)


# frames -----------------------------------------------------------------------


def _principal_kappa(Wm: np.ndarray, Sm: np.ndarray) -> float:
    """Smallest kappa with |S|^2 + |W|^2 <= kappa |S + W|^2 over the two spans."""
    if Wm.shape[0] == 0 or Sm.shape[0] == 0:
        return 1.0
    qw, _ = np.linalg.qr(Wm.T)
    qs, _ = np.linalg.qr(Sm.T)
    c = float(np.max(np.linalg.svd(qw.conj().T @ qs, compute_uv=False)))
    if c >= 1.0 - 1e-14:
        raise FrameError("weak and strong spans intersect")
    return 1.0 / (1.0 - c)


def build_frame(spec: DomainSpec, p, i: int, lam_tol: float = DEFAULT_LAM_TOL, reference: TangentFrame | None = None) -> TangentFrame:
    """Weak span = eigen-directions of the n-1-i smallest Levi eigenvalues; strong span = the rest.

    With ``reference`` the weak basis is rotated inside its span to best match the
    reference weak vectors (continuation from a patch center).
    """
    point = p.point if isinstance(p, BoundarySample) else np.asarray(p, dtype=float)
    w, V, gn = levi_eigen(spec, point)
    w, V, gn = w[0], V[0], gn[0]
    k = spec.n - 1 - i
    if not 0 <= k <= spec.n - 1:
        raise ValueError(f"stratum index {i} out of range for n={spec.n}")
    if 0 < k < spec.n - 1 and w[k] - w[k - 1] < 10 * lam_tol * gn:
        raise FrameError(f"eigenvalue gap {w[k] - w[k - 1]:.3e} at the weak/strong split is below 10*lam_tol")
    weak = V[:, :k].T.copy()
    strong = V[:, k:].T.copy()
    if reference is not None and k > 0:
        O = weak.conj() @ reference.weak.T  # (k, k) overlaps
        U, s, Vh = np.linalg.svd(O)
        if np.min(s) < 0.9:
            raise FrameError(f"frame continuation overlap {np.min(s):.3f} below 0.9")
        weak = (U @ Vh).T @ weak
    return TangentFrame(point, weak, strong, i, _principal_kappa(weak, strong), w)


# weak fields and sigma --------------------------------------------------------


def _project_tangential(g: list[Jet], W0) -> list[Jet]:
    """W_j = W0_j - <d rho, W0> conj(g_j) / |g|^2 as jets; W0 is (n,) or (P, n)."""
    n = len(g)
    W0 = np.asarray(W0, dtype=complex)
    col = (lambda j: W0[..., j]) if W0.ndim == 1 else (lambda j: W0[:, j])
    pair = g[0] * col(0)
    gg = g[0] * g[0].conj()
    for l in range(1, n):
        pair = pair + g[l] * col(l)
        gg = gg + g[l] * g[l].conj()
    ratio = pair / gg
    return [ratio * (-1.0) * g[j].conj() + col(j) for j in range(n)]


def weak_sigma_jet(rho: ScalarField, X, W0, order: int) -> Jet:
    """Jet of sigma = sum_alpha H_rho(W^alpha, W^alpha) with W^alpha the tangential projections of W0.

    ``W0`` has shape (k, n) (fixed vectors) or (P, k, n) (one set per point).
    """
    X = as_points(X)
    n = rho.nvar // 2
    R = rho.jet(X, order + 2)
    g = [R.dz(j) for j in range(n)]
    H = [[g[j].dzbar(l) for l in range(n)] for j in range(n)]
    gK = [gj.truncate(order) for gj in g]
    W0 = np.asarray(W0, dtype=complex)
    nw = W0.shape[-2]
    out = Jet.constant(0.0, rho.nvar, order, X.shape[0])
    for a in range(nw):
        Wa = W0[..., a, :]
        W = _project_tangential(gK, Wa)
        Wc = [w.conj() for w in W]
        for j in range(n):
            for l in range(n):
                out = out + H[j][l] * W[j] * Wc[l]
    return out.real


def sigma_field(spec: DomainSpec, weak_vectors) -> ScalarField:
    W0 = np.asarray(weak_vectors, dtype=complex).reshape(-1, spec.n)
    if W0.shape[0] == 0:
        f = ScalarField(spec.rho.nvar, lambda X, K: Jet.constant(0.0, spec.rho.nvar, K, X.shape[0]), "0")
        return f
    return ScalarField(spec.rho.nvar, lambda X, K: weak_sigma_jet(spec.rho, X, W0, K), f"sigma[{W0.shape[0]} weak]")


# obstruction and compare constant ---------------------------------------------


def normal_third_forms(spec: DomainSpec, P, N, Wdirs) -> np.ndarray:
    """(NH_rho)(W, W) at each point for each direction: Wdirs (M, D, n) -> (M, D) complex."""
    T = third_tensor_batch(spec.rho, P)
    return np.einsum("mjkl,mdj,mdk,ml->md", T, Wdirs, Wdirs.conj(), N)


def obstruction(spec: DomainSpec, p, W, lam_tol: float = DEFAULT_LAM_TOL) -> float:
    point = p.point if isinstance(p, BoundarySample) else np.asarray(p, dtype=float)
    W = np.asarray(W, dtype=complex)
    N, gn, _ = normal_data(spec, point)
    H = complex_hessian_batch(spec.rho, point)[0]
    hww = float(np.real(W @ H @ W.conj()))
    if abs(np.vdot(N[0], W)) > 1e-8 * np.linalg.norm(W) or hww > lam_tol * gn[0] * max(1.0, float(np.vdot(W, W).real)):
        raise PreconditionError(f"W is not a weak tangential direction (H(W,W) = {hww:.3e})")
    return float(np.real(normal_third_forms(spec, point, N, W[None, None, :])[0, 0]))


def random_weak_directions(weak: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Frame vectors followed by ``count`` random unit vectors in their span; weak is (M, k, n)."""
    M, k, n = weak.shape
    c = rng.standard_normal((M, count, k)) + 1j * rng.standard_normal((M, count, k))
    R = np.einsum("mdk,mkn->mdn", c, weak)
    R /= np.linalg.norm(R, axis=2, keepdims=True)
    return np.concatenate([weak, R], axis=1)


@dataclass
class CompareReport:
    K_hat: float
    constants: FrameConstants
    ratios: np.ndarray
    trivial: int
    violations: list = field(default_factory=list)

    @property
    def within_assembled(self) -> bool:
        return bool(np.all(self.ratios <= self.constants.K * (1 + 1e-9)))


def estimate_compare_K(spec: DomainSpec, samples: BoundarySet, weak: np.ndarray, n_random: int = 8, seed: int = 0) -> CompareReport:
    """Sample |(NH_rho)(W,W)|^2 / (|W|^2 H_sigma(W,W)) over stratum points and weak W.

    ``weak`` is (M, k, n): the weak frame at each sample; sigma at each sample is
    built from its own frame.
    """
    M = len(samples)
    k = weak.shape[1]
    if M == 0 or k == 0:
        return CompareReport(0.0, FrameConstants(1.0, 1.0, 0.0, k), np.zeros(0), M)
    rng = np.random.default_rng(seed)
    P = samples.points
    N = samples.normals
    Wd = random_weak_directions(weak, n_random, rng)
    lhs = np.abs(normal_third_forms(spec, P, N, Wd)) ** 2
    Hs = complex_hessian_of_jet(weak_sigma_jet(spec.rho, P, weak, 2)).conj()
    hsig = np.real(np.einsum("mdj,mjk,mdk->md", Wd.conj(), Hs, Wd))
    ww = np.sum(np.abs(Wd) ** 2, axis=2)
    trivial = (lhs <= 1e-20) & (np.abs(hsig) <= 1e-12)
    violations = [(int(m), float(hsig[m, d])) for m, d in zip(*np.nonzero(hsig < -1e-8))]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(trivial, 0.0, lhs / (ww * np.maximum(hsig, 0.0)))
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    # K1: weak frames are orthonormal at the base point; K2: max H_rho(N, N)
    Hr = complex_hessian_batch(spec.rho, P)
    K2 = float(np.max(np.real(np.einsum("mj,mjk,mk->m", N, Hr, N.conj()))))
    gram = np.einsum("man,mbn->mab", weak, weak.conj())
    K1 = float(np.max(1.0 / np.linalg.eigvalsh(gram)[:, 0]))
    consts = FrameConstants(1.0, K1, max(K2, 0.0), k)
    per_sample = np.max(ratio, axis=1)
    return CompareReport(float(np.max(per_sample)), consts, per_sample, int(np.sum(np.all(trivial, axis=1))), violations)


# McNeal-type gradient bound ---------------------------------------------------


@dataclass
class McNealReport:
    c_hat: float
    violations: list
    count: int


def mcneal_check(f: ScalarField, X, normals=None, zero_tol: float = 1e-14, grad_tol: float = 1e-6) -> McNealReport:
    """c = max |grad f|^2 / f over points with f > 0; tangential gradient when normals are given.

    For a field on C^n the gradient is the Wirtinger gradient, projected onto the
    complex tangent space when unit normals are supplied.  A point with f ~ 0 and
    a large gradient is a violation.
    """
    X = as_points(X)
    J = f.jet(X, 1)
    vals = np.real(J.value)
    D = np.real(J.gradient())
    if normals is None and f.nvar % 2 == 1:
        g2 = np.sum(D * D, axis=1)
    else:
        g = 0.5 * (D[:, 0::2] - 1j * D[:, 1::2])
        g2 = np.sum(np.abs(g) ** 2, axis=1)
        if normals is not None:
            g2 = g2 - np.abs(np.sum(g * np.asarray(normals), axis=1)) ** 2
        g2 = np.maximum(g2, 0.0)
    small = vals < zero_tol
    bad = small & (np.sqrt(g2) > grad_tol)
    ok = ~small
    c = float(np.max(g2[ok] / vals[ok])) if np.any(ok) else 0.0
    return McNealReport(c, [int(i) for i in np.flatnonzero(bad)], int(X.shape[0]))
