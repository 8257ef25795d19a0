"""Cutoff profiles chi_m, g_{m,tau} = 1 - ln(chi_m(x/tau))/m, and the (m, tau) parameter search.

chi_m is the integral of a clamped slope profile on [1, e^m]: the slope rises
smoothly from 0 to a plateau value A over [1, 1 + w1], stays at A, then falls
to 0 over the last stretch of length w2 before e^m.  A is fixed by requiring
chi_m(e^m) = e^m.

Since m can be in the thousands, g is evaluated from ln(x) - ln(tau) and u = y/e^m
so nothing overflows.  Parameters store ln(tau) rather than tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import Univariate, smoothstep_derivs, smoothstep_integral

W1 = 3.0
_LOG_FLOOR = math.log(1e-300)


class ConstructionError(RuntimeError):
    pass


class InfeasibleError(RuntimeError):
    pass


@dataclass(frozen=True)
class _Profile:
    m: float
    A: float
    b: float  # plateau chi(y) = A y + b
    w2E: float  # w2 / e^m
    einv: float  # e^-m

    @property
    def plateau_end_u(self) -> float:
        return 1.0 - self.w2E


@lru_cache(maxsize=256)
def _profile(m: float) -> _Profile:
    if not m > 2:
        raise ValueError(f"chi_m needs m > 2, got {m}")
    einv = math.exp(-m)
    w2E = 0.5 * (1.0 - (1.0 + W1) * einv)
    A = (1.0 - einv) / (1.0 - (1.0 + 0.5 * W1) * einv - 0.5 * w2E)
    b = 1.0 - A - 0.5 * A * W1
    return _Profile(m, A, b, w2E, einv)


def _chi_dimensionless(logy: np.ndarray, m: float):
    """ln chi(y), a1 = y chi'/chi and a2 = y^2 chi''/chi for y = exp(logy) in [1, e^m]."""
    pr = _profile(m)
    logy = np.asarray(logy, dtype=float)
    lnchi = np.zeros_like(logy)
    a1 = np.zeros_like(logy)
    a2 = np.zeros_like(logy)
    u = np.exp(np.minimum(logy - m, 0.0))
    r1 = (logy > 0) & (logy < math.log1p(W1))
    r3 = (u > pr.plateau_end_u) & (logy < m)
    r2 = (logy >= math.log1p(W1)) & ~r3 & (logy < m)
    top = logy >= m
    if np.any(r1):
        y = np.exp(logy[r1])
        t = (y - 1.0) / W1
        S = smoothstep_derivs(t, 1)
        chi = 1.0 + pr.A * W1 * smoothstep_integral(t)
        lnchi[r1] = np.log(chi)
        a1[r1] = y * pr.A * S[0] / chi
        a2[r1] = y * y * pr.A * S[1] / (W1 * chi)
    if np.any(r2):
        ly = logy[r2]
        binv = pr.b * np.exp(-ly)
        lnchi[r2] = ly + np.log(pr.A + binv)
        a1[r2] = pr.A / (pr.A + binv)
    if np.any(r3):
        uu = u[r3]
        t = (1.0 - uu) / pr.w2E
        S = smoothstep_derivs(t, 1)
        chiE = 1.0 - pr.A * pr.w2E * smoothstep_integral(t)
        lnchi[r3] = m + np.log(chiE)
        a1[r3] = uu * pr.A * S[0] / chiE
        a2[r3] = -uu * uu * pr.A * S[1] / (pr.w2E * chiE)
    lnchi[top] = m
    return lnchi, a1, a2


def chi_m(x, m: float):
    """chi_m(x): 1 for x <= 1, e^m for x >= e^m, increasing in between."""
    x = np.asarray(x, dtype=float)
    lx = np.log(np.maximum(x, 1e-300))
    out = np.exp(_chi_dimensionless(np.maximum(lx, 0.0), m)[0])
    return float(out) if out.ndim == 0 else out


def chi_m_derivs(x, m: float):
    """(chi, chi', chi'') at x; direct evaluation, intended for moderate m."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lx = np.log(np.maximum(x, 1e-300))
    lnchi, a1, a2 = _chi_dimensionless(np.maximum(lx, 0.0), m)
    chi = np.exp(lnchi)
    inside = x > 1.0
    d1 = np.where(inside, a1 * chi / np.where(inside, x, 1.0), 0.0)
    d2 = np.where(inside, a2 * chi / np.where(inside, x, 1.0) ** 2, 0.0)
    return chi, d1, d2


@lru_cache(maxsize=256)
def verify_chi(m: float, npts: int = 10_000) -> dict:
    """Grid check of x/chi <= 2, chi' <= 2, x chi'' <= 4 and chi' >= 0 on [1, e^m]."""
    pr = _profile(m)
    lg = np.concatenate([np.log1p(np.linspace(0.0, W1 + 1.0, npts // 2)), np.linspace(math.log1p(W1), m, npts - npts // 2)])
    lnchi, a1, a2 = _chi_dimensionless(lg, m)
    ratio = np.exp(lg - lnchi)  # x / chi
    slope = a1 / ratio  # chi' = a1 chi / x
    curv = a2 / ratio  # x chi'' = a2 chi / x
    out = {"max_x_over_chi": float(ratio.max()), "max_slope": float(slope.max()), "min_slope": float(slope.min()), "max_x_chi2": float(curv.max()), "A": pr.A}
    if out["max_x_over_chi"] > 2 + 1e-12 or out["max_slope"] > 2 + 1e-12 or out["max_x_chi2"] > 4 + 1e-12 or out["min_slope"] < -1e-14:
        raise ConstructionError(f"chi_m profile violates its bounds at m={m}: {out}")
    return out


def g_m_tau_log(x, m: float, log_tau: float):
    """(g, g', g'') of g(x) = 1 - ln(chi_m(x/tau))/m, with tau = exp(log_tau)."""
    verify_chi(float(m))
    x = np.asarray(x, dtype=float)
    pos = x > 0
    lx = np.log(np.where(pos, x, 1.0))
    logy = np.where(pos, lx - log_tau, -np.inf)
    inside = (logy > 0) & (logy < m)
    lnchi, a1, a2 = _chi_dimensionless(np.clip(logy, 0.0, m), m)
    g = 1.0 - lnchi / m
    g = np.where(logy <= 0, 1.0, np.where(logy >= m, 0.0, g))
    xs = np.where(inside, x, 1.0)
    d1 = np.where(inside, -a1 / (m * xs), 0.0)
    d2 = np.where(inside, -(a2 - a1 * a1) / (m * xs * xs), 0.0)
    return g, d1, d2


def g_m_tau(x, m: float, tau: float):
    return g_m_tau_log(x, m, math.log(tau))


def g_univariate(m: float, log_tau: float) -> Univariate:
    def derivs(x, order):
        g, d1, d2 = g_m_tau_log(x, m, log_tau)
        return np.stack([g, d1, d2][: order + 1])

    return Univariate(f"g[m={m:.6g}]", derivs, max_order=2)


# parameters -------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffParams:
    m: float
    log_tau: float
    delta: float
    c1: float
    c2: float
    c3: float
    nu1: float
    nu2: float

    @property
    def tau(self) -> float:
        return math.exp(self.log_tau)

    @property
    def log_top(self) -> float:
        """ln(tau e^m)."""
        return self.log_tau + self.m

    def invariants(self) -> dict:
        T = math.exp(self.log_top)
        t = self.tau
        d = self.delta
        return {
            "top_le_delta": self.log_top <= math.log(d),
            "S1_gradient": self.c2 * t + math.sqrt(self.c1 * t) <= d,
            "S2_gradient": self.c2 * T + 2 * math.sqrt(self.c1 * T) <= d,
            "hessian_zeta": T * self.c3 <= d / 4,
            "cross_term": 4 * self.c2 * math.sqrt(self.c1 * T) <= d / 4,
            "m_large": 16 * self.c1 / self.m <= d / 4,
            "tau_below_nu": self.log_tau <= math.log(min(self.nu1, self.nu2 / 2)),
        }

    def check(self) -> bool:
        return all(self.invariants().values())

    def to_dict(self) -> dict:
        return {"m": self.m, "log_tau": self.log_tau, "tau": self.tau, "delta": self.delta, "c1": self.c1, "c2": self.c2, "c3": self.c3, "nu1": self.nu1, "nu2": self.nu2}


def choose_m_tau(delta: float, c1: float, c2: float, c3: float, nu1: float, nu2: float, safety: float = 0.5) -> CutoffParams:
    """m = max(3, 64 c1/delta); largest tau on a halving ladder meeting every invariant, times ``safety``."""
    for name, v in (("delta", delta), ("c1", c1), ("c2", c2), ("c3", c3), ("nu1", nu1), ("nu2", nu2)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    # relative nudge so that 16 c1/m <= delta/4 survives rounding
    m = max(3.0, 64.0 * c1 / delta * (1 + 1e-12))
    verify_chi(m)
    log_tau = min(math.log(nu1), math.log(nu2 / 2), math.log(delta) - m)
    ln2 = math.log(2.0)
    while True:
        p = CutoffParams(m, log_tau, delta, c1, c2, c3, nu1, nu2)
        if p.check():
            break
        if not p.invariants()["m_large"]:
            raise InfeasibleError(f"m={m:.6g} too small for c1={c1:.3g}, delta={delta:.3g}")
        log_tau -= ln2
        if log_tau + m < _LOG_FLOOR:
            raise InfeasibleError(f"no feasible tau: tau*e^m fell below 1e-300 (m={m:.4g}, delta={delta:.3g})")
    p = CutoffParams(m, log_tau + math.log(safety), delta, c1, c2, c3, nu1, nu2)
    if not p.check():
        raise InfeasibleError("safety-scaled parameters lost feasibility")
    return p
