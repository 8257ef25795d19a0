"""Acceptance criteria 1-10, one PASS/FAIL line each (see the 'acceptance criteria' summary section)."""

import time

import numpy as np
from conftest import record_criterion

from levilab.cli import main
from levilab.correction import CorrectionConfig, build_exterior, build_interior, bump_cover, s_field
from levilab.cutoff import CutoffParams
from levilab.cxcalc import complex_hessian, fd_hessian_oracle
from levilab.domain import CATALOG_IDS, collar_points, get_domain, sample_boundary, taylor_normal_check
from levilab.fields import coordinate, to_complex, to_real
from levilab.levi import build_frame, estimate_compare_K, mcneal_check, obstruction, sigma_field, stratify
from levilab.verify import (
    check_cutoff_properties,
    check_main1,
    check_main2,
    check_psh_on_boundary,
    df_delta,
    df_search,
    exterior_df_check,
    taylor_factor_probe,
)

# Re[(N H_rho)(W, W)] for (|z1|^2 + |z2|^4 - 1)(1 + |z2|^2/4) at (1, 0), W = (0, 1),
# from symbolic Wirtinger differentiation (re-derived in test_oracles.py)
FROZEN_OBSTRUCTION = 0.25
E2 = np.array([0, 1], dtype=complex)


def test_criterion_01_derivative_engine():
    t0 = time.perf_counter()
    worst = {}
    for name in CATALOG_IDS:
        spec = get_domain(name)
        B = sample_boundary(spec, 25, seed=11)
        Q = collar_points(spec, B, side="interior").points
        assert Q.shape[0] == 100
        err = 0.0
        for x in Q:
            exact = complex_hessian(spec.rho, x).entries
            fd = fd_hessian_oracle(spec.rho, x).entries
            err = max(err, np.linalg.norm(exact - fd) / max(1.0, np.linalg.norm(exact)))
        worst[name] = err
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and dt < 10
    record_criterion(1, ok, f"max relative Hessian error {max(worst.values()):.2e} (<= 1e-6), {dt:.2f}s (< 10s)")
    assert ok, worst


def test_criterion_02_stratification():
    t0 = time.perf_counter()
    egg = get_domain("egg2")
    B = sample_boundary(egg, 2000)
    strat = stratify(egg, B)
    small = np.abs(B.z[:, 1]) <= 1e-5
    egg_ok = np.array_equal(strat.ranks, np.where(small, 0, 1))
    ball = get_domain("ball3")
    Bb = sample_boundary(ball, 2000)
    ball_ok = bool(np.all(stratify(ball, Bb).ranks == 2))
    psh_ok = check_psh_on_boundary(egg, B).passed and check_psh_on_boundary(ball, Bb).passed
    dt = time.perf_counter() - t0
    ok = egg_ok and ball_ok and psh_ok and dt < 30
    record_criterion(2, ok, f"egg2 {strat.counts()} matches |z2|<=1e-5: {egg_ok}; ball3 all rank 2: {ball_ok}; "
                     f"boundary psh: {psh_ok}; {dt:.2f}s (< 30s)")
    assert ok


def test_criterion_03_obstruction_oracle():
    val = obstruction(get_domain("skewed-egg2"), to_real(np.array([1, 0])), E2)
    ok = abs(val - FROZEN_OBSTRUCTION) <= 1e-6
    record_criterion(3, ok, f"obstruction {val:.12f} vs oracle {FROZEN_OBSTRUCTION} (+- 1e-6)")
    assert ok


def test_criterion_04_end_to_end():
    t0 = time.perf_counter()
    spec = get_domain("skewed-egg2")
    B = sample_boundary(spec, 2000)
    r1, ledger = build_interior(spec, 0.05, CorrectionConfig(eps=0.05), boundary=B)
    r2 = build_exterior(ledger)
    inner = collar_points(spec, B, side="interior", width=0.02)
    outer = collar_points(spec, B, side="exterior", width=0.02)
    raw = check_main1(spec, spec.rho, 0.05, inner)
    dist = float(np.linalg.norm(to_complex(raw.witness_point) - np.array([1, 0])))
    fixed = check_main1(spec, r1, 0.05, inner)
    ext = check_main2(spec, r2, 0.05, outer)
    dt = time.perf_counter() - t0
    ok = (not raw.passed) and dist <= 0.1 and fixed.passed and ext.passed and dt < 300
    record_criterion(4, ok, f"raw main1 min slack {raw.min_slack:.3e} (FAIL expected), witness {dist:.3f} from (1,0); "
                     f"r1 main1 {fixed.min_slack:.3e}; r2 main2 {ext.min_slack:.3e}; {dt:.1f}s (< 300s)")
    assert ok


def test_criterion_05_cutoff_suite(skewed_build):
    spec, B, r1, r2, ledger = skewed_build
    results = []
    for st in ledger.stages:
        if not st.s_fields:
            continue
        cover = bump_cover(np.array([p.center for p in st.patches]), np.array([p.radius for p in st.patches]))
        for j, pr in enumerate(st.patches):
            sub = np.flatnonzero(np.sum((B.points - pr.center) ** 2, axis=1) < pr.radius**2)
            rep = check_cutoff_properties(spec, st.s_fields[j], st.delta, pr.weak, B.subset(sub),
                                          zeta=cover.zetas[j], sigma=sigma_field(spec, pr.weak), tau=pr.params.tau)
            results.append(rep.passed)
    # negative control: tau far too large, so s = zeta sigma exceeds delta
    pr = ledger.stages[0].patches[0]
    delta = ledger.stages[0].delta
    sub = np.flatnonzero(np.sum((B.points - pr.center) ** 2, axis=1) < pr.radius**2)
    bad = CutoffParams(3.0, np.log(10.0), delta, 1.0, 1.0, 1.0, 1.0, 1.0)
    cover = bump_cover(pr.center[None], np.array([pr.radius]))
    s_bad = s_field(cover.zetas[0], sigma_field(spec, pr.weak), bad, pr.center, pr.radius)
    neg = check_cutoff_properties(spec, s_bad, delta, pr.weak, B.subset(sub))
    neg_fails = neg.family_minima["ii_below_delta"] < 0
    ok = bool(results) and all(results) and neg_fails
    record_criterion(5, ok, f"{sum(results)}/{len(results)} s-fields pass (i)-(iv) on {len(B)} samples; "
                     f"negative control breaks (ii): {neg_fails}")
    assert ok


def test_criterion_06_mcneal():
    sq = mcneal_check(coordinate(1, 0) * coordinate(1, 0), np.linspace(-1, 1, 201)[:, None])
    egg = get_domain("egg2")
    B = sample_boundary(egg, 2000)
    sig = mcneal_check(sigma_field(egg, E2[None]), B.points, B.normals)
    ok = abs(sq.c_hat - 4) <= 1e-9 and np.isfinite(sig.c_hat) and not sig.violations
    record_criterion(6, ok, f"x^2: c = {sq.c_hat:.12f} (4 +- 1e-9); egg2 sigma: c = {sig.c_hat:.4f}, "
                     f"{len(sig.violations)} violations")
    assert ok


def test_criterion_07_compare_constant():
    parts = []
    ok = True
    for name in ("egg2", "skewed-egg2"):
        spec = get_domain(name)
        B = sample_boundary(spec, 2000)
        strat = stratify(spec, B)
        for k in range(spec.n - 1):
            idx = strat.stratum(k)
            if idx.size == 0:
                continue
            weak = np.array([build_frame(spec, B.points[i], k).weak for i in idx])
            rep = estimate_compare_K(spec, B.subset(idx), weak)
            ok &= rep.within_assembled
            parts.append(f"{name} stratum {k}: max ratio {rep.ratios.max():.4g} <= K {rep.constants.K:.4g} ({idx.size} samples)")
    record_criterion(7, bool(ok), "; ".join(parts))
    assert ok


def test_criterion_08_taylor():
    slopes = {}
    for name in CATALOG_IDS:
        spec = get_domain(name)
        B = sample_boundary(spec, 20, seed=4)
        fits = [taylor_normal_check(spec, spec.rho, B[i], [1e-3, 2e-3, 4e-3, 8e-3]) for i in range(len(B))]
        slopes[name] = min(f.slope for f in fits)
    slope_ok = min(slopes.values()) >= 1.9
    spec = get_domain("skewed-egg2")
    p = to_real(np.array([1, 0]))
    inner = taylor_factor_probe(spec, p, E2, side="interior")
    outer = taylor_factor_probe(spec, p, E2, side="exterior")
    a_ok = abs(inner.a - (-1.0)) <= 0.1
    ok = slope_ok and a_ok
    record_criterion(8, ok, f"min residual slope {min(slopes.values()):.3f} (>= 1.9); interior factor a = {inner.a:.4f} "
                     f"(target -1 +- 0.1); exterior factor a = {outer.a:+.4f}")
    assert slope_ok
    assert a_ok, f"interior normal-derivative factor measured {inner.a:.6f}, CI {inner.ci}"


def test_criterion_09_df_exponents():
    lines, ok = [], True
    for name, eta in (("ball2", 0.99), ("egg2", 0.9)):
        t0 = time.perf_counter()
        spec = get_domain(name)
        B = sample_boundary(spec, 2000)
        D = float(np.max(np.sum(B.points**2, axis=1)))
        res = df_search(spec, spec.rho, [eta], collar_points(spec, B), D)
        dt = time.perf_counter() - t0
        good = res.verdicts[0] and res.bracket_ok[0] and dt < 120
        ok &= good
        lines.append(f"{name} eta={eta} delta={df_delta(eta, D):.4g}: min eig {res.min_eigs[0]:.3e}, bracket {res.bracket_ok[0]}, {dt:.1f}s")
    ball = get_domain("ball2")
    B = sample_boundary(ball, 2000)
    col = collar_points(ball, B, side="exterior")
    D_ext = float(np.max(np.sum(col.points**2, axis=1)))
    for eta in (1.1, 2.0):
        t0 = time.perf_counter()
        rep = exterior_df_check(ball, ball.rho, eta, col, D_ext)
        dt = time.perf_counter() - t0
        ok &= rep.passed and dt < 120
        lines.append(f"exterior ball eta={eta}: min eig {rep.min_slack:.3e}, {dt:.1f}s")
    record_criterion(9, bool(ok), "; ".join(lines))
    assert ok


def test_criterion_10_determinism(tmp_path):
    commands = [
        ["analyze", "--domain", "skewed-egg2", "--samples", "500"],
        ["correct", "--domain", "skewed-egg2", "--eps", "0.05", "--samples", "500"],
        ["verify", "--domain", "skewed-egg2", "--use", "corrected", "--samples", "500"],
        ["dfsearch", "--domain", "ball2", "--etas", "0.5,0.9,1.5", "--samples", "500"],
    ]
    same = []
    for args in commands:
        out = tmp_path / args[0]
        blobs = []
        for _ in range(2):
            main([*args, "--out", str(out), "--format", "both"])
            blobs.append(((out / f"{args[0]}.json").read_bytes(), (out / f"{args[0]}.csv").read_bytes()))
        same.append(blobs[0] == blobs[1])
    ok = all(same)
    record_criterion(10, ok, f"byte-identical JSON/CSV on re-run for {sum(same)}/{len(same)} commands")
    assert ok
