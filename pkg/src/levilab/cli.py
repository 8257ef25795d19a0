"""Command-line front end: analyze, correct, verify, dfsearch."""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .correction import CorrectionConfig, build_exterior, build_interior
from .domain import CATALOG_IDS, DomainSpec, collar_points, get_domain, sample_boundary
from .expr import parse_field_expression
from .fields import to_complex
from .levi import FrameError, build_frame, normal_third_forms, random_weak_directions, stratify
from .report import atomic_write, dumps, slack_rows
from .verify import (
    InequalityReport,
    check_main1,
    check_main2,
    check_psh_on_boundary,
    df_eps,
    df_search,
    exterior_df_check,
)

COMMANDS = ("analyze", "correct", "verify", "dfsearch")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "analyze"
    domain: str | None = None
    expr: str | None = None
    n: int | None = None
    box: float = 1.5
    collar: float = 0.05
    samples: int = 2000
    dirs: int = 64
    seed: int = 0
    eps: float | None = None
    etas: tuple = ()
    lam_tol: float = 1e-8
    use: str = "raw"
    out: str = "."
    format: str = "json"

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if (self.domain is None) == (self.expr is None):
            raise UsageError("give exactly one of --domain or --expr")
        for name in ("samples", "dirs"):
            if getattr(self, name) < 1:
                raise UsageError(f"--{name} must be >= 1")
        if not self.collar > 0:
            raise UsageError("--collar must be positive")
        if self.eps is not None and not self.eps > 0:
            raise UsageError("--eps must be positive")
        if any(not e > 0 or e == 1 for e in self.etas):
            raise UsageError("eta values must lie in (0,1) (interior) or above 1 (exterior)")
        if self.command == "dfsearch" and not self.etas:
            raise UsageError("dfsearch needs --etas")
        if self.command == "correct" and self.eps is None:
            raise UsageError("correct needs --eps")
        if self.use not in ("raw", "corrected", "exterior"):
            raise UsageError("--use must be raw, corrected or exterior")
        if self.format not in ("json", "csv", "both"):
            raise UsageError("--format must be json, csv or both")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["etas"] = list(self.etas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in known}
        if "etas" in kw:
            kw["etas"] = tuple(float(e) for e in kw["etas"])
        return cls(**kw)


_CASTS = {"n": int, "box": float, "collar": float, "samples": int, "dirs": int, "seed": int, "eps": float, "lam_tol": float}


def _parse_etas(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(e) for e in text)
    try:
        return tuple(float(e) for e in str(text).split(",") if e.strip())
    except ValueError:
        raise UsageError(f"cannot parse eta list {text!r}") from None


def load_config_file(path: str) -> dict:
    """INI file with a [run] section, or a JSON bundle whose "config" echo is reused."""
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return dict(data.get("config", data))
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise UsageError(f"cannot read config file {path!r}")
    if "run" not in cp:
        raise UsageError(f"config file {path!r} has no [run] section")
    out = {}
    for key, raw in cp["run"].items():
        key = key.replace("-", "_")
        if key == "etas":
            out[key] = _parse_etas(raw)
        elif key in _CASTS:
            out[key] = _CASTS[key](raw)
        else:
            out[key] = raw
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="levilab", description="Levi-form analysis and corrected defining functions.")
    p.add_argument("--version", action="version", version=f"levilab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="INI file with a [run] section, or a previous JSON bundle")
        s.add_argument("--domain", choices=CATALOG_IDS)
        s.add_argument("--expr", help="defining function over z1..zn, e.g. 'abs2(z1)+abs2(z2)^2-1'")
        s.add_argument("--n", type=int, help="dimension for --expr (default: largest z index)")
        s.add_argument("--box", type=float, help="half-width of the sampling box for --expr")
        s.add_argument("--eps", type=float)
        s.add_argument("--etas", type=_parse_etas)
        s.add_argument("--collar", type=float)
        s.add_argument("--samples", type=int)
        s.add_argument("--dirs", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--lam-tol", dest="lam_tol", type=float)
        s.add_argument("--use", choices=("raw", "corrected", "exterior"))
        s.add_argument("--out", help="output directory")
        s.add_argument("--format", choices=("json", "csv", "both"))
    return p


def resolve_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    merged = RunConfig(command=ns.command).to_dict()
    if ns.config:
        merged.update(load_config_file(ns.config))
        merged["command"] = ns.command
    for key, val in vars(ns).items():
        if key in ("config", "command") or val is None:
            continue
        merged[key] = val
    if ns.domain is not None:
        merged["expr"] = None
    if ns.expr is not None:
        merged["domain"] = None
    return RunConfig.from_dict(merged).validate()


def make_domain(cfg: RunConfig) -> DomainSpec:
    if cfg.domain is not None:
        return get_domain(cfg.domain, collar=cfg.collar)
    rho = parse_field_expression(cfg.expr, cfg.n)
    return DomainSpec("expr", rho, rho.nvar // 2, cfg.box, collar=cfg.collar)


# commands ---------------------------------------------------------------------


class _Clock:
    def __init__(self):
        self.t = {}

    def __call__(self, name):
        clock = self

        class _C:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                clock.t[name] = time.perf_counter() - self.t0

        return _C()


def _point(x):
    return [[v.real, v.imag] for v in to_complex(x)]


def _obstruction_scan(spec, B, strat, seed):
    out = {}
    rng = np.random.default_rng(seed)
    for k in range(spec.n - 1):
        idx = strat.stratum(k)
        entry = {"count": int(idx.size), "max_obstruction": 0.0, "max_abs_obstruction": 0.0, "at": None}
        weak, ok = [], []
        for i in idx:
            try:
                weak.append(build_frame(spec, B[int(i)], k, strat.lam_tol).weak)
                ok.append(int(i))
            except FrameError:
                pass
        if ok:
            Bs = B.subset(ok)
            Td = random_weak_directions(np.array(weak), 16, rng)
            Td /= np.linalg.norm(Td, axis=2, keepdims=True)
            vals = np.real(normal_third_forms(spec, Bs.points, Bs.normals, Td))
            j, d = np.unravel_index(int(np.argmax(vals)), vals.shape)
            entry.update(max_obstruction=float(vals.max()), max_abs_obstruction=float(np.abs(vals).max()),
                         at=_point(Bs.points[j]), direction=[[c.real, c.imag] for c in Td[j, d]],
                         frame_failures=int(idx.size - len(ok)))
        out[str(k)] = entry
    return out


def _boundary_and_strata(spec, cfg, clock):
    with clock("sampling"):
        B = sample_boundary(spec, cfg.samples, cfg.seed)
    with clock("stratify"):
        strat = stratify(spec, B, cfg.lam_tol)
    summary = {"samples": len(B), "lam_tol": cfg.lam_tol, "counts": {str(k): v for k, v in strat.counts().items()}}
    return B, strat, summary


def _correction(spec, cfg, eps, B, clock):
    cc = CorrectionConfig(eps=eps, samples=cfg.samples, seed=cfg.seed, lam_tol=cfg.lam_tol, n_random=cfg.dirs)
    with clock("correction"):
        r1, ledger = build_interior(spec, eps, cc, boundary=B)
        r2 = build_exterior(ledger)
    return r1, r2, ledger


def cmd_analyze(cfg, spec, clock):
    B, strat, summary = _boundary_and_strata(spec, cfg, clock)
    with clock("checks"):
        psh = check_psh_on_boundary(spec, B)
        scan = _obstruction_scan(spec, B, strat, cfg.seed)
    return {"stratification": summary, "obstruction": scan}, [psh]


def cmd_correct(cfg, spec, clock):
    B, strat, summary = _boundary_and_strata(spec, cfg, clock)
    psh = check_psh_on_boundary(spec, B)
    results = {"stratification": summary}
    if not psh.passed:
        results["skipped"] = "defining function is not plurisubharmonic on the boundary"
        return results, [psh]
    r1, r2, ledger = _correction(spec, cfg, cfg.eps, B, clock)
    results["ledger"] = ledger.to_dict()
    return results, [psh, cutoff_summary(ledger)]


def cutoff_summary(ledger) -> InequalityReport:
    """One slack per patch (its worst cutoff family), with family minima over all patches."""
    slacks, fam = [], {}
    for st in ledger.stages:
        for pr in st.patches:
            if not pr.cutoff_slacks:
                continue
            slacks.append(min(pr.cutoff_slacks.values()))
            for key, v in pr.cutoff_slacks.items():
                fam[key] = min(fam.get(key, np.inf), v)
    rep = InequalityReport("cutoff_properties", np.array(slacks, dtype=float), family_minima=fam,
                           metadata={"patches": len(slacks)})
    return rep


def cmd_verify(cfg, spec, clock):
    eps = 0.05 if cfg.eps is None else cfg.eps
    B, strat, summary = _boundary_and_strata(spec, cfg, clock)
    results = {"stratification": summary, "eps": eps, "use": cfg.use}
    with clock("checks"):
        reports = [check_psh_on_boundary(spec, B)]
    if cfg.use != "raw" and not reports[0].passed:
        results["skipped"] = "correction requires a defining function plurisubharmonic on the boundary"
        return results, reports
    if cfg.use == "raw":
        r_in, r_out = spec.rho, spec.rho
    else:
        r1, r2, ledger = _correction(spec, cfg, eps, B, clock)
        results["ledger"] = ledger.to_dict()
        r_in, r_out = (r1, None) if cfg.use == "corrected" else (None, r2)
    with clock("checks"):
        if r_in is not None:
            col = collar_points(spec, B, side="interior")
            reports.append(check_main1(spec, r_in, eps, col, cfg.dirs, cfg.seed, labels=strat.ranks))
        if r_out is not None:
            col = collar_points(spec, B, side="exterior")
            reports.append(check_main2(spec, r_out, eps, col, cfg.dirs, cfg.seed, labels=strat.ranks))
    return results, reports


def cmd_dfsearch(cfg, spec, clock):
    B, strat, summary = _boundary_and_strata(spec, cfg, clock)
    inner = sorted(e for e in cfg.etas if e < 1)
    outer = sorted(e for e in cfg.etas if e > 1)
    D = float(np.max(np.sum(B.points**2, axis=1)))
    results = {"stratification": summary, "use": cfg.use, "D": D}
    reports = []
    ok = True
    if inner:
        r = spec.rho
        if cfg.use != "raw":
            eps = df_eps(max(inner), D)
            r, _, ledger = _correction(spec, cfg, eps, B, clock)
            results["interior_eps"] = eps
            results["ledger"] = ledger.to_dict()
        col = collar_points(spec, B, side="interior")
        with clock("df_search"):
            res = df_search(spec, r, inner, col, D)
        results["interior"] = res.to_dict()
        ok = all(res.verdicts) and all(res.bracket_ok)
    if outer:
        r = spec.rho
        if cfg.use != "raw":
            eps = 0.05 if cfg.eps is None else cfg.eps
            _, r, _ = _correction(spec, cfg, eps, B, clock)
        col = collar_points(spec, B, side="exterior")
        D_ext = float(np.max(np.sum(col.points**2, axis=1)))
        with clock("exterior_df"):
            for eta in outer:
                rep = exterior_df_check(spec, r, eta, col, D_ext)
                rep.name = f"exterior_df_eta{eta:g}"
                reports.append(rep)
    return results, reports, ok


def run(cfg: RunConfig) -> tuple[dict, list, int, dict]:
    clock = _Clock()
    spec = make_domain(cfg)
    extra_ok = True
    if cfg.command == "analyze":
        results, reports = cmd_analyze(cfg, spec, clock)
    elif cfg.command == "correct":
        results, reports = cmd_correct(cfg, spec, clock)
    elif cfg.command == "verify":
        results, reports = cmd_verify(cfg, spec, clock)
    else:
        results, reports, extra_ok = cmd_dfsearch(cfg, spec, clock)
    passed = extra_ok and all(r.passed for r in reports)
    bundle = {
        "tool": "levilab",
        "version": __version__,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "domain": {"name": spec.name, "n": spec.n, "rho": spec.rho.descriptor, "collar": spec.collar},
        "results": results,
        "reports": [r.to_dict() for r in reports],
        "passed": passed,
    }
    return bundle, reports, (0 if passed else 2), clock.t


def write_outputs(cfg: RunConfig, bundle: dict, reports: list, timings: dict) -> list[str]:
    written = []
    stem = os.path.join(cfg.out, cfg.command)
    if cfg.format in ("json", "both"):
        atomic_write(stem + ".json", dumps(bundle) + "\n")
        written.append(stem + ".json")
    if cfg.format in ("csv", "both"):
        atomic_write(stem + ".csv", slack_rows(reports))
        written.append(stem + ".csv")
    atomic_write(stem + ".timings.json", dumps({"seconds": timings}) + "\n")
    return written


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
    except UsageError as exc:
        print(f"levilab: usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        bundle, reports, code, timings = run(cfg)
        paths = write_outputs(cfg, bundle, reports, timings)
    except Exception as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc), "command": cfg.command}), file=sys.stderr)
        return 1
    for r in reports:
        print(f"{r.name}: {'pass' if r.passed else 'FAIL'} (min slack {r.min_slack:.6g})")
    interior = bundle["results"].get("interior")
    if interior:
        for eta, ok, lam in zip(interior["etas"], interior["verdicts"], interior["min_eigenvalues"]):
            print(f"interior_df_eta{eta:g}: {'pass' if ok else 'FAIL'} (min eigenvalue {lam:.6g})")
    print(f"{cfg.command}: {'PASS' if code == 0 else 'FAIL'}; wrote {', '.join(paths)}")
    return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
