"""Numerical checks of the inequalities: boundary psh, Main1/Main2, cutoff properties, DF exponents."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cxcalc import complex_hessian_of_jet
from .domain import BoundarySet, CollarSet, DomainSpec, normal_data
from .fields import ScalarField, as_points, norm2, to_complex
from .levi import mcneal_check, normal_third_forms, tangent_bases  # noqa: F401  (mcneal_check re-exported)
from .report import chunked_map

ABS_TOL = 1e-9


class ProbeUndefinedError(ValueError):
    pass


@dataclass
class InequalityReport:
    name: str
    slacks: np.ndarray
    abs_tol: float = ABS_TOL
    witness_point: np.ndarray | None = None
    witness_direction: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    family_minima: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    strict: bool = False
    points: np.ndarray | None = None
    directions: np.ndarray | None = None
    labels: np.ndarray | None = None

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slacks)) if self.slacks.size else float("inf")

    @property
    def witness_index(self) -> int | None:
        return int(np.argmin(self.slacks)) if self.slacks.size else None

    @property
    def passed(self) -> bool:
        fam = all(v >= -self.abs_tol for v in self.family_minima.values())
        if self.strict:
            return self.min_slack > 0 and fam
        return self.min_slack >= -self.abs_tol and fam

    def to_dict(self) -> dict:
        d = {
            "check": self.name,
            "passed": self.passed,
            "min_slack": self.min_slack,
            "abs_tol": self.abs_tol,
            "count": int(self.slacks.size),
            "metadata": self.metadata,
            "families": self.family_minima,
            "groups": self.groups,
        }
        if self.witness_point is not None:
            z = to_complex(self.witness_point)
            d["witness"] = {
                "index": self.witness_index,
                "point": [[v.real, v.imag] for v in z],
                "direction": None if self.witness_direction is None else [[v.real, v.imag] for v in self.witness_direction],
            }
        return d


def _min_eig(G):
    w, V = np.linalg.eigh(G)
    return w[:, 0], V[:, :, 0]


def _random_unit(rng, count, n):
    xi = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return xi / np.linalg.norm(xi, axis=1, keepdims=True)


# boundary psh -----------------------------------------------------------------


def check_psh_on_boundary(spec: DomainSpec, B: BoundarySet, abs_tol: float = ABS_TOL) -> InequalityReport:
    G = complex_hessian_of_jet(spec.rho.jet(B.points, 2)).conj()
    lam, vec = _min_eig(G)
    rep = InequalityReport("psh_on_boundary", lam, abs_tol, metadata={"domain": spec.name, "samples": len(B)})
    i = rep.witness_index
    rep.witness_point, rep.witness_direction = B.points[i], vec[i]
    rep.points, rep.directions = B.points, vec
    return rep


# Main1 / Main2 ----------------------------------------------------------------


def main_forms(r: ScalarField, Q, eps: float):
    """Matrices F with xi^* F xi = H_r(xi,xi) + eps(|r||xi|^2 + |<dr,xi>|^2/|r|), plus r values."""
    Q = as_points(Q)
    J = r.jet(Q, 2)
    val = np.real(J.value)
    D = np.real(J.gradient())
    g = 0.5 * (D[:, 0::2] - 1j * D[:, 1::2])
    G = complex_hessian_of_jet(J).conj()
    a = np.abs(val)
    n = g.shape[1]
    F = G + eps * (a[:, None, None] * np.eye(n) + np.einsum("mj,mk->mjk", np.conj(g), g) / a[:, None, None])
    return F, val


def _check_main(name, spec, r, eps, collar: CollarSet, n_dirs, seed, labels, abs_tol, sign):
    Q = collar.points
    parts = chunked_map(lambda Qc: main_forms(r, Qc, eps), Q)
    F = np.concatenate([p[0] for p in parts])
    val = np.concatenate([p[1] for p in parts])
    bad = (np.sign(val) != sign) | (np.abs(val) < 1e-14)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"{name}: r has the wrong sign or |r| < 1e-14 at collar point {i} ({Q[i].tolist()})")
    lam, vec = _min_eig(F)
    # sampled directions: quasi-random units plus the foot normal and tangent frame directions
    rng = np.random.default_rng(seed)
    n = spec.n
    dirs = _random_unit(rng, n_dirs, n)
    feet = collar.feet
    N = feet.normals[collar.foot_index]
    T = tangent_bases(N)
    sampled = np.real(np.einsum("dj,mjk,dk->md", dirs.conj(), F, dirs)).min(axis=1)
    sampled = np.minimum(sampled, np.real(np.einsum("mj,mjk,mk->m", N.conj(), F, N)))
    for a in range(T.shape[2]):
        t = T[:, :, a]
        sampled = np.minimum(sampled, np.real(np.einsum("mj,mjk,mk->m", t.conj(), F, t)))
    slack = np.minimum(lam, sampled)
    rep = InequalityReport(name, slack, abs_tol, metadata={
        "domain": spec.name, "eps": eps, "collar_width": float(collar.depths.max()), "points": int(Q.shape[0]),
        "directions": n_dirs, "seed": seed, "side": collar.side,
        "eigen_min": float(lam.min()), "sampled_min": float(sampled.min())})
    i = rep.witness_index
    rep.witness_point, rep.witness_direction = Q[i], vec[i]
    rep.points, rep.directions = Q, vec
    if labels is not None:
        lab = np.asarray(labels)[collar.foot_index]
        rep.labels = lab
        rep.groups = {f"stratum_{int(k)}": float(slack[lab == k].min()) for k in np.unique(lab)}
    return rep


def check_main1(spec: DomainSpec, r: ScalarField, eps: float, collar: CollarSet, n_dirs: int = 64, seed: int = 0,
                labels=None, abs_tol: float = ABS_TOL) -> InequalityReport:
    """Interior inequality H_r(xi,xi) >= -eps(|r||xi|^2 + |<dr,xi>|^2/|r|) on the collar."""
    return _check_main("main1", spec, r, eps, collar, n_dirs, seed, labels, abs_tol, -1.0)


def check_main2(spec: DomainSpec, r: ScalarField, eps: float, collar: CollarSet, n_dirs: int = 64, seed: int = 0,
                labels=None, abs_tol: float = ABS_TOL) -> InequalityReport:
    """Exterior inequality H_r(xi,xi) >= -eps(r|xi|^2 + |<dr,xi>|^2/r) on the exterior collar."""
    return _check_main("main2", spec, r, eps, collar, n_dirs, seed, labels, abs_tol, 1.0)


# cutoff properties ------------------------------------------------------------


def _weak_span_bases(W0, N):
    W0 = np.atleast_2d(np.asarray(W0, dtype=complex))
    Wp = W0[None, :, :] - np.einsum("mk,mj->mkj", np.einsum("kj,mj->mk", W0, np.conj(N)), N)
    Q, R = np.linalg.qr(np.swapaxes(Wp, 1, 2))
    keep = np.abs(np.diagonal(R, axis1=1, axis2=2)) > 1e-12
    return Q, keep


def check_cutoff_properties(spec: DomainSpec, s: ScalarField, delta: float, weak, B: BoundarySet,
                            zeta: ScalarField | None = None, sigma: ScalarField | None = None, tau: float | None = None,
                            abs_tol: float = ABS_TOL) -> InequalityReport:
    """Slack families: (i) s = zeta sigma where sigma <= tau; (ii) 0 <= s <= delta; (iii) |P_tan ds| <= delta;
    (iv) H_s >= -delta on the weak span."""
    X = B.points
    J = s.jet(X, 2)
    val = np.real(J.value)
    D = np.real(J.gradient())
    g = 0.5 * (D[:, 0::2] - 1j * D[:, 1::2])
    N = B.normals
    gt = np.sqrt(np.maximum(np.sum(np.abs(g) ** 2, axis=1) - np.abs(np.sum(g * N, axis=1)) ** 2, 0.0))
    G = complex_hessian_of_jet(J).conj()
    Qb, keep = _weak_span_bases(weak, N)
    L = np.einsum("mja,mjk,mkb->mab", Qb.conj(), G, Qb)
    lam = np.linalg.eigvalsh(L)
    # directions the projection killed carry no constraint
    lam = np.where(keep, lam, np.inf).min(axis=1) if lam.shape[1] else np.full(len(B), np.inf)
    fam = {
        "ii_nonnegative": float(val.min()),
        "ii_below_delta": float(delta - val.max()),
        "iii_tangential_gradient": float(delta - gt.max()),
        "iv_weak_hessian": float(delta + lam.min()) if np.isfinite(lam.min()) else float("inf"),
    }
    if zeta is not None and sigma is not None and tau is not None:
        sig = sigma(X)
        low = (sig >= 0) & (sig <= tau)
        dev = np.abs(val - zeta(X) * sig)[low]
        fam["i_equals_zeta_sigma"] = float(-dev.max()) if dev.size else 0.0
    slack = np.minimum.reduce([val, delta - val, delta - gt, delta + lam])
    rep = InequalityReport("cutoff_properties", slack, abs_tol, metadata={"delta": delta, "samples": len(B)}, family_minima=fam)
    if slack.size:
        rep.witness_point = X[rep.witness_index]
    return rep


# Taylor factor ----------------------------------------------------------------


@dataclass
class FactorFit:
    a: float
    ci: tuple
    obstruction: float
    depths: list
    values: list
    side: str


def taylor_factor_probe(spec: DomainSpec, p, W, depths=(1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3), side: str = "interior") -> FactorFit:
    """Least-squares a in H_rho(W,W)(q) - H_rho(W,W)(p) = a d Re(NH_rho)(W,W)(p) + b d^2, q = p -/+ d nu."""
    point = p.point if hasattr(p, "point") else np.asarray(p, dtype=float)
    W = np.asarray(W, dtype=complex)
    N, _, nu = normal_data(spec, point)
    obs = float(np.real(normal_third_forms(spec, point, N, W[None, None, :])[0, 0]))
    if abs(obs) < 1e-10:
        raise ProbeUndefinedError("obstruction below 1e-10: the normal-derivative factor is undefined")
    d = np.asarray(depths, dtype=float)
    sgn = -1.0 if side == "interior" else 1.0
    Q = point[None, :] + sgn * d[:, None] * nu[0][None, :]
    P = np.vstack([point[None, :], Q])
    G = complex_hessian_of_jet(spec.rho.jet(P, 2))
    h = np.real(np.einsum("j,mjk,k->m", W, G, W.conj()))
    y = h[1:] - h[0]
    A = np.column_stack([d * obs, d * d])
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = max(len(d) - 2, 1)
    resid = y - A @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    half = 2.0 * float(np.sqrt(max(cov[0, 0], 0.0))) + 1e-12
    return FactorFit(float(coef[0]), (float(coef[0] - half), float(coef[0] + half)), obs, d.tolist(), y.tolist(), side)


# Diederich-Fornaess exponents -------------------------------------------------


def df_delta(eta: float, D: float) -> float:
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if not D > 0:
        raise ValueError("D must be positive")
    return (1 - eta) / (2 * eta * (1 + eta) * D)


def df_eps(eta: float, D: float) -> float:
    """Main1 tolerance that feeds the DF construction: min{(1-eta)/4, (1-eta)/(8 eta (1+eta) D)}."""
    return min((1 - eta) / 4, (1 - eta) / (8 * eta * (1 + eta) * D))


def exterior_df_delta(eta: float, D: float) -> float:
    """Mirror of df_delta for eta > 1: (eta-1)/(2 eta (1+eta) D)."""
    if not eta > 1:
        raise ValueError(f"exterior exponent must exceed 1, got {eta}")
    if not D > 0:
        raise ValueError("D must be positive")
    return (eta - 1) / (2 * eta * (1 + eta) * D)


def df_candidate(spec: DomainSpec, r: ScalarField, eta: float, D: float, delta: float | None = None) -> ScalarField:
    """h = -(-r exp(-delta |z|^2))^eta."""
    delta = df_delta(eta, D) if delta is None else delta
    phi = norm2(spec.n) * delta
    h = -((-r) * (-phi).exp()) ** float(eta)
    h.descriptor = f"-(-r e^(-{delta:.6g}|z|^2))^{eta}"
    return h


def exterior_candidate(spec: DomainSpec, r: ScalarField, eta: float, D: float, delta: float | None = None) -> ScalarField:
    delta = exterior_df_delta(eta, D) if delta is None else delta
    h = (r * (norm2(spec.n) * delta).exp()) ** float(eta)
    h.descriptor = f"(r e^({delta:.6g}|z|^2))^{eta}"
    return h


@dataclass
class DFSearchResult:
    etas: list
    verdicts: list
    deltas: list
    min_eigs: list
    bracket_ok: list
    D: float
    largest_passing: float | None = None
    monotone: bool = True
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "etas": self.etas,
            "verdicts": self.verdicts,
            "deltas": self.deltas,
            "min_eigenvalues": self.min_eigs,
            "bracket_bound_ok": self.bracket_ok,
            "D": self.D,
            "largest_passing_eta": self.largest_passing,
            "monotone": self.monotone,
            "witnesses": self.witnesses,
            "scope": "strict plurisubharmonicity checked on the sampled collar only",
        }


def _bracket_gap(spec, r, h, Q, eta, delta):
    """min eig of H_h - eta(-r)^(eta-2) e^(-eta phi)[(1-eta)/2 dr dr^* - r H_r + delta/2 r^2 I], and its scale."""
    Jr = r.jet(Q, 2)
    val = np.real(Jr.value)
    D = np.real(Jr.gradient())
    g = 0.5 * (D[:, 0::2] - 1j * D[:, 1::2])
    Gr = complex_hessian_of_jet(Jr).conj()
    Gh = complex_hessian_of_jet(h.jet(Q, 2)).conj()
    phi = delta * np.sum(Q * Q, axis=1)
    n = spec.n
    pref = eta * (-val) ** (eta - 2) * np.exp(-eta * phi)
    br = (1 - eta) / 2 * np.einsum("mj,mk->mjk", np.conj(g), g) - val[:, None, None] * Gr + (delta / 2) * (val**2)[:, None, None] * np.eye(n)
    LB = pref[:, None, None] * br
    scale = max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(Gh)))))
    return float(np.linalg.eigvalsh(Gh - LB)[:, 0].min()), scale


def df_search(spec: DomainSpec, r: ScalarField, etas, collar: CollarSet, D: float, abs_tol: float = ABS_TOL) -> DFSearchResult:
    """Strict plurisubharmonicity of -(-r e^{-delta|z|^2})^eta on the interior collar for each eta."""
    etas = [float(e) for e in etas]
    if not etas:
        raise ValueError("empty eta grid")
    Q = collar.points
    res = DFSearchResult(etas, [], [], [], [], D)
    for eta in etas:
        delta = df_delta(eta, D)
        h = df_candidate(spec, r, eta, D, delta)
        G = complex_hessian_of_jet(h.jet(Q, 2)).conj()
        lam, vec = _min_eig(G)
        gap, scale = _bracket_gap(spec, r, h, Q, eta, delta)
        i = int(np.argmin(lam))
        res.deltas.append(delta)
        res.min_eigs.append(float(lam.min()))
        res.verdicts.append(bool(lam.min() > 0))
        res.bracket_ok.append(bool(gap >= -1e-8 * scale))
        res.witnesses.append([[v.real, v.imag] for v in to_complex(Q[i])])
    passing = [e for e, v in zip(etas, res.verdicts) if v]
    res.largest_passing = max(passing) if passing else None
    order = np.argsort(etas)
    v = [res.verdicts[i] for i in order]
    res.monotone = all(not (v[j + 1] and not v[j]) for j in range(len(v) - 1))
    return res


def exterior_df_check(spec: DomainSpec, r: ScalarField, eta: float, collar: CollarSet, D: float, abs_tol: float = ABS_TOL) -> InequalityReport:
    """Minimum Hessian eigenvalue of (r e^{delta|z|^2})^eta, delta mirrored from the interior formula."""
    delta = exterior_df_delta(eta, D)
    h = exterior_candidate(spec, r, eta, D, delta)
    Q = collar.points
    if np.any(r(Q) <= 0):
        raise ValueError("r must be positive on the exterior collar")
    lam, vec = _min_eig(complex_hessian_of_jet(h.jet(Q, 2)).conj())
    rep = InequalityReport("exterior_df", lam, abs_tol, strict=True, metadata={
        "domain": spec.name, "eta": eta, "delta": delta, "D": D, "delta_rule": "(eta-1)/(2 eta (1+eta) D), D = max |z|^2 over the exterior collar"})
    i = rep.witness_index
    rep.witness_point, rep.witness_direction = Q[i], vec[i]
    return rep
