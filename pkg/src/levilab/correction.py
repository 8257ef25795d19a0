"""Rank-induction correction: patches, bumps, s-fields, constants C_k, and r_1 / r_2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutoff import CutoffParams, choose_m_tau, g_univariate
from .cxcalc import complex_hessian_batch, wirtinger_gradient_batch
from .domain import NORMAL_TAYLOR_FACTOR, BoundarySet, DomainSpec, collar_points, estimate_c1
from .fields import ScalarField, as_points, constant, smoothstep
from .jets import Jet
from .levi import (
    DEFAULT_LAM_TOL,
    FrameError,
    Stratification,
    TangentFrame,
    _principal_kappa,
    build_frame,
    estimate_compare_K,
    levi_eigen,
    mcneal_check,
    normal_third_forms,
    random_weak_directions,
    sigma_field,
    stratify,
    weak_sigma_jet,
)

BLEND_WIDTH = 0.5


class StageError(RuntimeError):
    pass


# bumps ------------------------------------------------------------------------


def _ball_jet(X, center, radius, order):
    nvar = X.shape[1]
    u = Jet.constant(0.0, nvar, order, X.shape[0])
    for v in range(nvar):
        x = Jet.variable(X[:, v], v, nvar, order) - center[v]
        u = u + x * x
    return u / (radius * radius)


def flat_top_bump(center, radius) -> ScalarField:
    """1 on the ball of radius/2, 0 outside the ball of radius, smooth radial profile between."""
    center = np.asarray(center, dtype=float)

    def jetfn(X, K):
        u = _ball_jet(X, center, radius, K)
        t = (u - 0.25) / 0.75
        return 1.0 - t.compose(smoothstep.derivs(np.real(t.value), K))

    return ScalarField(center.size, jetfn, f"bump(r={radius:.4g})")


@dataclass
class BumpCover:
    centers: np.ndarray
    radii: np.ndarray
    bumps: list
    zetas: list
    total: ScalarField

    def inner_contains(self, X) -> np.ndarray:
        return _in_balls(as_points(X), self.centers, 0.5 * self.radii)

    def outer_contains(self, X) -> np.ndarray:
        return _in_balls(as_points(X), self.centers, self.radii)


def _in_balls(X, centers, radii):
    if len(centers) == 0:
        return np.zeros(X.shape[0], dtype=bool)
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.any(d2 < radii[None, :] ** 2, axis=1)


def bump_cover(centers, radii, blend: float = BLEND_WIDTH) -> BumpCover:
    """zeta_j = b_j / Phi(sum b): equals b_j where sum b <= 1 - blend, sums to 1 where sum b >= 1."""
    centers = np.asarray(centers, dtype=float).reshape(len(radii), -1)
    radii = np.asarray(radii, dtype=float)
    nvar = centers.shape[1]
    bumps = [flat_top_bump(c, R) for c, R in zip(centers, radii)]

    def total_jet(X, K):
        S = Jet.constant(0.0, nvar, K, X.shape[0])
        for j, b in enumerate(bumps):
            near = np.sum((X - centers[j]) ** 2, axis=1) < radii[j] ** 2
            if np.any(near):
                S.c[:, near] += b.jet(X[near], K).c
        return S

    total = ScalarField(nvar, total_jet, "sum of bumps")

    def phi_jet(X, K):
        S = total.jet(X, K)
        t = (S - 1.0 + blend) / blend
        return S + (1.0 - S) * (1.0 - t.compose(smoothstep.derivs(np.real(t.value), K)))

    phi = ScalarField(nvar, phi_jet, "Phi(sum of bumps)")
    zetas = [b / phi for b in bumps]
    return BumpCover(centers, radii, bumps, zetas, total)


# s-fields ---------------------------------------------------------------------


def s_field(zeta: ScalarField, sigma: ScalarField, params: CutoffParams, center=None, radius=None) -> ScalarField:
    """s = zeta * sigma * g_{m,tau}(sigma); zero outside the ball (center, radius) when given."""
    g = g_univariate(params.m, params.log_tau)
    inner = zeta * sigma * sigma.apply(g)
    if center is None:
        return inner
    center = np.asarray(center, dtype=float)

    def jetfn(X, K):
        out = Jet.constant(0.0, zeta.nvar, K, X.shape[0])
        near = np.sum((X - center) ** 2, axis=1) < radius**2
        if np.any(near):
            out.c[:, near] = np.real(inner.jet(X[near], K).c)
        return out

    return ScalarField(zeta.nvar, jetfn, f"s[m={params.m:.4g}]")


def sum_fields(fields: list, nvar: int) -> ScalarField:
    if not fields:
        return constant(nvar, 0.0)
    out = fields[0]
    for f in fields[1:]:
        out = out + f
    return out


# C_k --------------------------------------------------------------------------


def choose_C_terms(spec: DomainSpec, eps: float, samples: BoundarySet, weak: np.ndarray, c1: float, K: float,
                   normal_factor: float = 1.0, n_random: int = 64, seed: int = 0) -> np.ndarray:
    """Per-sample max over weak directions T of (nf c1 Re NH(T,T) - eps/2) K / |NH(T,T)|^2."""
    if len(samples) == 0 or weak.shape[1] == 0:
        return np.zeros(len(samples))
    rng = np.random.default_rng(seed)
    Td = random_weak_directions(weak, n_random, rng)
    Td = Td / np.linalg.norm(Td, axis=2, keepdims=True)
    nh = normal_third_forms(spec, samples.points, samples.normals, Td)
    a2 = np.abs(nh) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        term = (normal_factor * c1 * np.real(nh) - eps / 2) * K / a2
    term = np.where(np.abs(nh) < 1e-10, 0.0, term)
    return np.max(term, axis=1)


def choose_C(spec: DomainSpec, eps: float, samples: BoundarySet, weak: np.ndarray, c1: float, K: float,
             normal_factor: float = 1.0, n_random: int = 64, seed: int = 0) -> float:
    """Sampled lower bound for C: max(0, sup of the per-direction expression)."""
    terms = choose_C_terms(spec, eps, samples, weak, c1, K, normal_factor, n_random, seed)
    return float(max(0.0, np.max(terms))) if terms.size else 0.0


# ledger -----------------------------------------------------------------------


@dataclass
class PatchRecord:
    index: int
    center: np.ndarray
    radius: float
    weak: np.ndarray
    kappa: float
    params: CutoffParams | None = None
    n_boundary: int = 0
    cutoff_pass: bool | None = None
    cutoff_slacks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "index": self.index,
            "center": self.center.tolist(),
            "radius": self.radius,
            "inner_radius": 0.5 * self.radius,
            "weak": [[[w.real, w.imag] for w in row] for row in self.weak],
            "kappa": self.kappa,
            "boundary_samples": self.n_boundary,
            "cutoff_pass": self.cutoff_pass,
            "cutoff_slacks": self.cutoff_slacks,
        }
        d["params"] = self.params.to_dict() if self.params is not None else None
        return d


@dataclass
class StageRecord:
    k: int
    n_weak: int
    n_stratum: int
    n_proxies: int
    C: float = 0.0
    C_provisional: float = 0.0
    delta: float = math.inf
    kappa: float = 1.0
    K_hat: float = 0.0
    K_used: float = 0.0
    K_assembled: float = 0.0
    c1_distance: float = 0.0
    patches: list = field(default_factory=list)
    s: ScalarField | None = None
    s_fields: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "weak_dimension": self.n_weak,
            "stratum_samples": self.n_stratum,
            "proxy_samples": self.n_proxies,
            "C": self.C,
            "C_provisional": self.C_provisional,
            "delta": self.delta,
            "kappa": self.kappa,
            "K_hat": self.K_hat,
            "K_used": self.K_used,
            "K_assembled": self.K_assembled,
            "c1_distance": self.c1_distance,
            "patch_count": len(self.patches),
            "patches": [p.to_dict() for p in self.patches],
            "notes": list(self.notes),
        }


@dataclass
class CorrectionConfig:
    eps: float
    samples: int = 2000
    seed: int = 0
    lam_tol: float = DEFAULT_LAM_TOL
    cover_tol: float = 0.05
    radius: float = 0.8
    min_radius: float = 0.05
    K_mode: str = "measured"  # or "assembled"
    K_safety: float = 2.0
    normal_factor: float = NORMAL_TAYLOR_FACTOR
    n_random: int = 64
    tau_safety: float = 0.5
    check_cutoff: bool = True


@dataclass
class CorrectionLedger:
    spec: DomainSpec
    config: CorrectionConfig
    boundary: BoundarySet
    strat: Stratification
    stages: list = field(default_factory=list)
    theta: ScalarField | None = None
    theta_history: list = field(default_factory=list)
    r: ScalarField | None = None
    covered_centers: list = field(default_factory=list)
    covered_radii: list = field(default_factory=list)

    def in_U(self, X) -> np.ndarray:
        if not self.covered_centers:
            return np.zeros(as_points(X).shape[0], dtype=bool)
        return _in_balls(as_points(X), np.array(self.covered_centers), 0.5 * np.array(self.covered_radii))

    def to_dict(self) -> dict:
        return {
            "domain": self.spec.name,
            "eps": self.config.eps,
            "samples": len(self.boundary),
            "seed": self.config.seed,
            "lam_tol": self.config.lam_tol,
            "cover_tol": self.config.cover_tol,
            "K_mode": self.config.K_mode,
            "K_safety": self.config.K_safety,
            "normal_factor": self.config.normal_factor,
            "strata_counts": {str(k): v for k, v in self.strat.counts().items()},
            "stages": [s.to_dict() for s in self.stages],
            "trivial": all(s.C == 0.0 for s in self.stages),
        }


# patches ----------------------------------------------------------------------


def _frames_for(spec, B: BoundarySet, idx, k, lam_tol):
    frames, ok = {}, []
    for i in idx:
        try:
            frames[int(i)] = build_frame(spec, B[int(i)], k, lam_tol)
            ok.append(int(i))
        except FrameError:
            pass
    return frames, np.array(ok, dtype=int)


def _try_patch(spec, B, center_idx, proxies, radius, k, lam_tol):
    """Frame continuation from the center over proxies in the ball; returns (weak, kappa) or None."""
    center = B.points[center_idx]
    ref = build_frame(spec, B[center_idx], k, lam_tol)
    near = proxies[np.sum((B.points[proxies] - center) ** 2, axis=1) < radius**2]
    kappa = 1.0
    W0 = ref.weak
    for i in near:
        try:
            fr = build_frame(spec, B[int(i)], k, lam_tol, reference=ref)
        except FrameError:
            return None
        # tangential projection of the center vectors at this point vs the Levi-strong span there
        N = B.normals[int(i)]
        Wp = W0 - np.outer(W0 @ np.conj(N), N)
        if np.min(np.linalg.svd(Wp, compute_uv=False)) < 0.1:
            return None
        try:
            kappa = max(kappa, _principal_kappa(Wp, fr.strong))
        except FrameError:
            return None
    return W0, kappa


def _build_patches(spec, B, proxies, stratum, k, cfg: CorrectionConfig):
    """Greedy farthest-point centers; each patch radius shrinks until frame continuation succeeds."""
    remaining = np.array(proxies, dtype=int)
    centers, radii, weaks, kappas = [], [], [], []
    first = stratum[0] if len(stratum) else remaining[0]
    next_idx = int(first)
    while remaining.size:
        R = cfg.radius
        res = None
        while R >= cfg.min_radius:
            res = _try_patch(spec, B, next_idx, proxies, R, k, cfg.lam_tol)
            if res is not None:
                break
            R *= 0.7
        if res is None:
            raise StageError(f"stage {k}: patch at sample {next_idx} ({B.z[next_idx].tolist()}) failed frame continuation down to radius {cfg.min_radius}")
        centers.append(B.points[next_idx])
        radii.append(R)
        weaks.append(res[0])
        kappas.append(res[1])
        inner = _in_balls(B.points[remaining], np.array(centers), 0.5 * np.array(radii))
        remaining = remaining[~inner]
        if remaining.size:
            d2 = np.min(np.sum((B.points[remaining][:, None, :] - np.array(centers)[None]) ** 2, axis=2), axis=1)
            next_idx = int(remaining[int(np.argmax(d2))])
    return centers, radii, weaks, kappas


# stage ------------------------------------------------------------------------


def _patch_constants(spec, B: BoundarySet, zeta, sigma, W0, delta):
    """c1 (McNeal), c2 = max|d zeta|, c3 = max(-min eig H_zeta), nu1, nu2 over boundary samples."""
    X = B.points
    sig = sigma(X)
    mc = mcneal_check(sigma, X, B.normals)
    c1 = max(mc.c_hat, 1e-12)
    gz = wirtinger_gradient_batch(zeta, X)
    c2 = max(float(np.max(np.sqrt(np.sum(np.abs(gz) ** 2, axis=1)))), 1e-12)
    Hz = complex_hessian_batch(zeta, X).conj()
    c3 = max(float(-np.min(np.linalg.eigvalsh(Hz)[:, 0])), 1e-12)
    # weak-span minimum of H_sigma at each sample
    Hs = complex_hessian_batch(sigma, X).conj()
    N = B.normals
    Wp = W0[None, :, :] - np.einsum("mk,mj->mkj", np.einsum("kj,mj->mk", W0, np.conj(N)), N)
    Q, _ = np.linalg.qr(np.swapaxes(Wp, 1, 2))
    lam = np.linalg.eigvalsh(np.einsum("mja,mjk,mkb->mab", Q.conj(), Hs, Q))[:, 0]
    bad = lam < -delta / 2
    nu2 = float(np.min(sig[bad])) if np.any(bad) else 1e300
    good = sig < nu2
    nu1 = float(np.max(sig[good])) if np.any(good & (sig > 0)) else max(float(np.max(sig)), 1e-300)
    return c1, c2, c3, max(nu1, 1e-300), max(nu2, 1e-300)


def stage(spec: DomainSpec, k: int, ledger: CorrectionLedger, eps: float) -> StageRecord:
    cfg = ledger.config
    B, strat = ledger.boundary, ledger.strat
    n_weak = spec.n - 1 - k
    outside = ~ledger.in_U(B.points)
    w = strat.eigenvalues
    gn = B.grad_norms
    proxies = np.flatnonzero(outside & (np.sum(w <= cfg.cover_tol * gn[:, None], axis=1) >= n_weak))
    stratum = np.flatnonzero(outside & (strat.ranks == k))
    rec = StageRecord(k, n_weak, int(stratum.size), int(proxies.size))
    if proxies.size == 0 or n_weak == 0:
        rec.notes.append("no uncovered samples near this stratum")
        return rec

    base = stratum if stratum.size else proxies
    frames, ok = _frames_for(spec, B, base, k, cfg.lam_tol)
    if ok.size == 0:
        raise StageError(f"stage {k}: no stratum sample admits a weak frame")
    Bs = B.subset(ok)
    weak = np.array([frames[i].weak for i in ok])
    cmp = estimate_compare_K(spec, Bs, weak, seed=cfg.seed)
    rec.K_hat = cmp.K_hat
    rec.K_assembled = cmp.constants.K
    rec.K_used = cfg.K_safety * cmp.K_hat if cfg.K_mode == "measured" else cmp.constants.K
    collar = collar_points(spec, B.subset(np.union1d(ok, proxies)))
    rec.c1_distance = estimate_c1(spec, collar)
    Cargs = dict(normal_factor=cfg.normal_factor, n_random=cfg.n_random, seed=cfg.seed)
    rec.C_provisional = choose_C(spec, eps, Bs, weak, rec.c1_distance, rec.K_used, **Cargs)

    centers, radii, weaks, kappas = _build_patches(spec, B, proxies, stratum, k, cfg)
    ledger.covered_centers.extend(centers)
    ledger.covered_radii.extend(radii)
    rec.kappa = float(max(kappas))
    rec.C = choose_C(spec, eps / rec.kappa, Bs, weak, rec.c1_distance, rec.K_used, **Cargs)
    rec.patches = [PatchRecord(j, c, R, W, kap) for j, (c, R, W, kap) in enumerate(zip(centers, radii, weaks, kappas))]
    if rec.C == 0.0:
        rec.notes.append("C_k = 0: obstruction below the eps threshold, no correction needed")
        return rec

    rec.delta = eps / (rec.C * len(centers) * rec.kappa)
    cover = bump_cover(np.array(centers), np.array(radii))
    s_fields = []
    for j, pr in enumerate(rec.patches):
        sub = np.flatnonzero(np.sum((B.points - pr.center) ** 2, axis=1) < pr.radius**2)
        Bj = B.subset(sub)
        sigma = sigma_field(spec, pr.weak)
        c1, c2, c3, nu1, nu2 = _patch_constants(spec, Bj, cover.zetas[j], sigma, pr.weak, rec.delta)
        pr.params = choose_m_tau(rec.delta, c1, c2, c3, nu1, nu2, safety=cfg.tau_safety)
        pr.n_boundary = int(sub.size)
        s_fields.append(s_field(cover.zetas[j], sigma, pr.params, pr.center, pr.radius))
    rec.s_fields = s_fields
    rec.s = sum_fields(s_fields, spec.rho.nvar)
    if cfg.check_cutoff:
        from .verify import check_cutoff_properties

        for j, pr in enumerate(rec.patches):
            sub = np.flatnonzero(np.sum((B.points - pr.center) ** 2, axis=1) < pr.radius**2)
            rep = check_cutoff_properties(spec, s_fields[j], rec.delta, pr.weak, B.subset(sub),
                                          zeta=cover.zetas[j], sigma=sigma_field(spec, pr.weak), tau=pr.params.tau)
            pr.cutoff_pass = rep.passed
            pr.cutoff_slacks = rep.family_minima
    return rec


def _theta_field(stages: list, nvar: int) -> ScalarField:
    terms = [st.s * st.C for st in stages if st.s is not None and st.C > 0]
    return sum_fields(terms, nvar)


def build_interior(spec: DomainSpec, eps: float, config: CorrectionConfig | None = None, boundary: BoundarySet | None = None):
    """Run stages k = 0..n-2 and return (r_1, ledger) with r_1 = rho exp(-theta)."""
    from .domain import sample_boundary

    cfg = config or CorrectionConfig(eps=eps)
    cfg.eps = eps
    B = boundary if boundary is not None else sample_boundary(spec, cfg.samples, cfg.seed)
    strat = stratify(spec, B, cfg.lam_tol)
    ledger = CorrectionLedger(spec, cfg, B, strat)
    for k in range(spec.n - 1):
        try:
            rec = stage(spec, k, ledger, eps)
        except StageError:
            raise
        except Exception as exc:  # add stage context
            raise StageError(f"stage {k} failed: {exc}") from exc
        ledger.stages.append(rec)
        ledger.theta_history.append(_theta_field(ledger.stages, spec.rho.nvar))
    ledger.theta = ledger.theta_history[-1] if ledger.theta_history else constant(spec.rho.nvar, 0.0)
    ledger.r = spec.rho * (-ledger.theta).exp()
    ledger.r.descriptor = "rho*exp(-theta)"
    return ledger.r, ledger


def build_exterior(ledger: CorrectionLedger) -> ScalarField:
    r2 = ledger.spec.rho * ledger.theta.exp()
    r2.descriptor = "rho*exp(+theta)"
    return r2
