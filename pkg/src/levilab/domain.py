"""Smoothly bounded domains {rho < 0}: catalog, normals, projection, sampling, collars."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .cxcalc import wirtinger_gradient_batch
from .fields import ScalarField, abs2, as_points, to_complex, to_real

# With N the unit (1,0) normal and nu the unit real normal, d/dt f(p + t nu) = 2 Re(N f)(p).
NORMAL_TAYLOR_FACTOR = 2.0


class DegenerateBoundaryError(ValueError):
    pass


class ProjectionError(RuntimeError):
    def __init__(self, message, kind="collar-too-wide"):
        super().__init__(message)
        self.kind = kind


class PartialSampleError(RuntimeError):
    def __init__(self, message, deficit):
        super().__init__(message)
        self.deficit = deficit


@dataclass(frozen=True)
class DomainSpec:
    name: str
    rho: ScalarField
    n: int
    box: float
    anchor: tuple = ()
    landmarks: tuple = ()
    collar: float = 0.05

    def __post_init__(self):
        if self.rho.nvar != 2 * self.n:
            raise ValueError("defining function dimension does not match n")
        anchor = self.anchor or (0j,) * self.n
        object.__setattr__(self, "anchor", tuple(complex(a) for a in anchor))
        if not self.rho(to_real(np.array(self.anchor))) < 0:
            raise ValueError(f"{self.name}: rho is not negative at the interior anchor")


@dataclass(frozen=True)
class BoundarySample:
    point: np.ndarray
    normal: np.ndarray
    grad_norm: float

    @property
    def z(self) -> np.ndarray:
        return to_complex(self.point)


@dataclass
class BoundarySet:
    points: np.ndarray
    normals: np.ndarray
    grad_norms: np.ndarray

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, i) -> BoundarySample:
        return BoundarySample(self.points[i], self.normals[i], float(self.grad_norms[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def z(self) -> np.ndarray:
        return to_complex(self.points)

    @property
    def real_normals(self) -> np.ndarray:
        return to_real(self.normals)

    def subset(self, idx) -> "BoundarySet":
        idx = np.asarray(idx)
        return BoundarySet(self.points[idx], self.normals[idx], self.grad_norms[idx])


@dataclass(frozen=True)
class CollarPoint:
    q: np.ndarray
    foot: BoundarySample
    distance: float
    side: str


@dataclass
class CollarSet:
    points: np.ndarray
    feet: BoundarySet
    foot_index: np.ndarray
    depths: np.ndarray
    side: str

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, i) -> CollarPoint:
        return CollarPoint(self.points[i], self.feet[int(self.foot_index[i])], float(self.depths[i]), self.side)


# catalog ----------------------------------------------------------------------


def _egg2(n=2):
    return abs2(n, 0) + abs2(n, 1) ** 2 - 1.0


def _circle(n, count=8, radius=1.0):
    """Points (radius e^{i theta}, 0, ..., 0) on the z1 circle."""
    th = 2 * np.pi * np.arange(count) / count
    return tuple((complex(radius * np.cos(t), radius * np.sin(t)),) + (0j,) * (n - 1) for t in th)


def _catalog_entry(name: str) -> DomainSpec:
    if name in ("ball2", "ball3"):
        n = int(name[-1])
        rho = abs2(n, 0)
        for j in range(1, n):
            rho = rho + abs2(n, j)
        rho = rho - 1.0
        rho.descriptor = "|z|^2 - 1"
        marks = tuple(tuple(1.0 if k == j else 0.0 for k in range(n)) for j in range(n))
        return DomainSpec(name, rho, n, 1.2, landmarks=marks)
    if name == "egg2":
        rho = _egg2()
        rho.descriptor = "|z1|^2 + |z2|^4 - 1"
        return DomainSpec(name, rho, 2, 1.2, landmarks=_circle(2) + ((0, 1),))
    if name == "egg3":
        rho = abs2(3, 0) + abs2(3, 1) ** 2 + abs2(3, 2) ** 3 - 1.0
        rho.descriptor = "|z1|^2 + |z2|^4 + |z3|^6 - 1"
        return DomainSpec(name, rho, 3, 1.2, landmarks=_circle(3) + ((0, 1, 0), (0, 0, 1)))
    if name == "skewed-egg2":
        rho = _egg2() * (1.0 + 0.25 * abs2(2, 1))
        rho.descriptor = "(|z1|^2 + |z2|^4 - 1)(1 + |z2|^2/4)"
        return DomainSpec(name, rho, 2, 1.2, landmarks=_circle(2) + ((0, 1),))
    if name == "egg2-broken":
        rho = _egg2() - 0.5 * abs2(2, 1)
        rho.descriptor = "|z1|^2 + |z2|^4 - |z2|^2/2 - 1"
        return DomainSpec(name, rho, 2, 1.3, landmarks=_circle(2) + ((0, math.sqrt((0.5 + math.sqrt(4.25)) / 2)),))
    raise KeyError(f"unknown domain id {name!r}; choose from {sorted(CATALOG_IDS)}")


CATALOG_IDS = ("ball2", "ball3", "egg2", "egg3", "skewed-egg2", "egg2-broken")


def get_domain(name: str, collar: float | None = None) -> DomainSpec:
    spec = _catalog_entry(name)
    if collar is not None:
        spec = DomainSpec(spec.name, spec.rho, spec.n, spec.box, spec.anchor, spec.landmarks, collar)
    return spec


# normals ----------------------------------------------------------------------


def normal_data(spec: DomainSpec, P):
    """Unit (1,0) normals, |d rho|, and unit real normals at the points P."""
    P = as_points(P)
    g = wirtinger_gradient_batch(spec.rho, P)
    gn = np.sqrt(np.sum(np.abs(g) ** 2, axis=1))
    if np.any(gn <= 1e-10):
        i = int(np.argmin(gn))
        raise DegenerateBoundaryError(f"{spec.name}: |d rho| = {gn[i]:.3e} at {P[i].tolist()}")
    N = g.conj() / gn[:, None]
    return N, gn, to_real(N)


def unit_normal(spec: DomainSpec, p) -> np.ndarray:
    return normal_data(spec, p)[0][0]


def boundary_set(spec: DomainSpec, P) -> BoundarySet:
    P = as_points(P).copy()
    N, gn, _ = normal_data(spec, P)
    return BoundarySet(P, N, gn)


# projection -------------------------------------------------------------------


def _flow_to_level(spec: DomainSpec, X, max_iter=100, tol=1e-13, max_step=None):
    """Newton steps along grad rho onto {rho = 0}; returns points and convergence mask."""
    X = np.array(as_points(X), dtype=float)
    ok = np.zeros(X.shape[0], dtype=bool)
    max_step = spec.box / 4 if max_step is None else max_step
    active = np.arange(X.shape[0])
    for _ in range(max_iter):
        if active.size == 0:
            break
        Xa = X[active]
        J = spec.rho.jet(Xa, 1)
        r = np.real(J.value)
        g = np.real(J.gradient())
        gg = np.sum(g * g, axis=1)
        done = np.abs(r) <= tol
        ok[active[done]] = True
        bad = gg < 1e-20
        step = np.zeros_like(Xa)
        mv = ~done & ~bad
        step[mv] = -(r[mv] / gg[mv])[:, None] * g[mv]
        sn = np.linalg.norm(step, axis=1)
        big = sn > max_step
        step[big] *= (max_step / sn[big])[:, None]
        X[active] = Xa + step
        active = active[mv]
    if active.size:
        r = spec.rho(X[active])
        ok[active[np.abs(r) <= tol]] = True
    return X, ok


def _orthogonal_feet(spec: DomainSpec, Q, P0, max_iter=100):
    """Newton on the Lagrange system p - q + lam grad rho(p) = 0, rho(p) = 0."""
    Q = as_points(Q)
    P = np.array(P0, dtype=float)
    m = Q.shape[1]
    J = spec.rho.jet(P, 1)
    g = np.real(J.gradient())
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = -np.sum((P - Q) * g, axis=1) / np.sum(g * g, axis=1)
    lam = np.nan_to_num(lam)
    conv = np.zeros(Q.shape[0], dtype=bool)
    for _ in range(max_iter):
        J = spec.rho.jet(P, 2)
        r = np.real(J.value)
        g = np.real(J.gradient())
        Hs = np.real(J.hessian())
        F = np.concatenate([P - Q + lam[:, None] * g, r[:, None]], axis=1)
        gnorm = np.maximum(np.linalg.norm(g, axis=1), 1e-300)
        nu = g / gnorm[:, None]
        v = Q - P
        par = v - np.sum(v * nu, axis=1)[:, None] * nu
        conv = (np.abs(r) <= 1e-12) & (np.linalg.norm(par, axis=1) <= 1e-10)
        if np.all(conv):
            break
        A = np.zeros((Q.shape[0], m + 1, m + 1))
        A[:, :m, :m] = np.eye(m) + lam[:, None, None] * Hs
        A[:, :m, m] = g
        A[:, m, :m] = g
        try:
            step = np.linalg.solve(A, -F[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(A[0], -F[0], rcond=None)[0][None] if A.shape[0] == 1 else np.zeros_like(F)
            if A.shape[0] > 1:
                for i in range(A.shape[0]):
                    step[i] = np.linalg.lstsq(A[i], -F[i], rcond=None)[0]
        P = P + step[:, :m]
        lam = lam + step[:, m]
    return P, conv


def project_batch(spec: DomainSpec, Q):
    """Normal projection of many points; returns (feet, distances, side signs, converged)."""
    Q = as_points(Q)
    P0, ok0 = _flow_to_level(spec, Q)
    P, conv = _orthogonal_feet(spec, Q, P0)
    conv &= ok0
    d = np.linalg.norm(Q - P, axis=1)
    side = np.sign(spec.rho(Q))
    return P, d, side, conv


def project_to_boundary(spec: DomainSpec, q) -> CollarPoint:
    q = np.asarray(q, dtype=float)
    P, d, side, conv = project_batch(spec, q)
    if not conv[0]:
        raise ProjectionError(f"{spec.name}: projection of {q.tolist()} did not converge in 100 iterations")
    if d[0] > 1e-8:
        # a second start, nudged tangentially, must land on the same foot
        nu = normal_data(spec, P)[2][0]
        t = np.roll(nu, 1) - np.dot(np.roll(nu, 1), nu) * nu
        if np.linalg.norm(t) > 1e-12:
            t /= np.linalg.norm(t)
            P2, conv2 = _orthogonal_feet(spec, q[None], P + 1e-3 * d[0] * t)
            d2 = np.linalg.norm(q - P2[0])
            if conv2[0] and abs(d2 - d[0]) <= 1e-8 and np.linalg.norm(P2[0] - P[0]) > 1e-6:
                raise ProjectionError(f"{spec.name}: ambiguous projection of {q.tolist()}", kind="ambiguous")
    foot = boundary_set(spec, P)[0]
    s = "interior" if side[0] < 0 else ("exterior" if side[0] > 0 else "boundary")
    return CollarPoint(q, foot, float(d[0]), s)


# sampling ---------------------------------------------------------------------


def sample_boundary(spec: DomainSpec, M: int, seed: int = 0) -> BoundarySet:
    """M boundary points: catalog landmarks first, then flowed quasi-random box points."""
    if M < 1:
        raise ValueError("sample count must be >= 1")
    marks = [to_real(np.array(l, dtype=complex)) for l in spec.landmarks][:M]
    pts = []
    if marks:
        X, ok = _flow_to_level(spec, np.array(marks), tol=1e-14)
        pts.extend(X[ok])
    need = M - len(pts)
    if need > 0:
        gen = qmc.Halton(d=2 * spec.n, scramble=True, seed=seed)
        for _ in range(20):
            B = (2 * gen.random(max(2 * need, 64)) - 1) * spec.box
            X, ok = _flow_to_level(spec, B)
            pts.extend(X[ok][:need])
            need = M - len(pts)
            if need <= 0:
                break
    if need > 0:
        raise PartialSampleError(f"{spec.name}: {need} of {M} boundary samples failed to converge", need)
    return boundary_set(spec, np.array(pts[:M]))


def collar_points(spec: DomainSpec, feet: BoundarySet, depth_fracs=(1.0, 0.5, 0.2, 0.05), side="interior", width=None) -> CollarSet:
    """Points q = p -/+ d nu(p) along the real normal lines through the feet."""
    width = spec.collar if width is None else width
    fr = np.asarray(depth_fracs, dtype=float)
    nu = feet.real_normals
    sgn = -1.0 if side == "interior" else 1.0
    idx = np.repeat(np.arange(len(feet)), fr.size)
    d = np.tile(fr * width, len(feet))
    Q = feet.points[idx] + sgn * d[:, None] * nu[idx]
    return CollarSet(Q, feet, idx, d, side)


def estimate_c1(spec: DomainSpec, collar: CollarSet) -> float:
    """Sampled constant with d(q) <= c1 |rho(q)| on the collar."""
    r = np.abs(spec.rho(collar.points))
    return float(np.max(collar.depths / r))


@dataclass
class TaylorFit:
    slope: float
    exact: bool
    residuals: list = field(default_factory=list)


def taylor_normal_check(spec: DomainSpec, f: ScalarField, p: BoundarySample, depths) -> TaylorFit:
    """Fit log|f(q) - f(p) + d (Re N)(f)(p)| against log d along q = p - d nu.

    ``(Re N)`` acts as the unit real normal derivative.
    """
    depths = np.asarray(depths, dtype=float)
    nu = to_real(p.normal)
    Q = p.point[None, :] - depths[:, None] * nu[None, :]
    J = f.jet(p.point, 1)
    fp = float(np.real(J.value[0]))
    dn = float(np.real(J.gradient()[0]) @ nu)
    res = np.abs(f(Q) - fp + depths * dn)
    if np.all(res < 1e-14):
        return TaylorFit(float("inf"), True, res.tolist())
    keep = res >= 1e-14
    slope = np.polyfit(np.log(depths[keep]), np.log(res[keep]), 1)[0]
    return TaylorFit(float(slope), False, res.tolist())
