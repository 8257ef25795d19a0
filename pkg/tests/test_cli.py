import json
import subprocess
import sys

import pytest

from levilab.cli import RunConfig, UsageError, main, resolve_config


def _run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def _load(tmp_path, command):
    return json.loads((tmp_path / f"{command}.json").read_text())


def test_analyze_egg2(tmp_path):
    assert _run(tmp_path, "analyze", "--domain", "egg2", "--samples", "400") == 0
    out = _load(tmp_path, "analyze")
    counts = out["results"]["stratification"]["counts"]
    assert counts["0"] == 8 and counts["1"] == 392
    assert out["results"]["obstruction"]["0"]["max_abs_obstruction"] < 1e-9
    assert (tmp_path / "analyze.timings.json").exists()


def test_analyze_ball3_has_no_weak_samples(tmp_path):
    assert _run(tmp_path, "analyze", "--domain", "ball3", "--samples", "200") == 0
    res = _load(tmp_path, "analyze")["results"]
    assert res["stratification"]["counts"] == {"0": 0, "1": 0, "2": 200}
    assert res["obstruction"]["0"]["max_obstruction"] == 0.0


def test_analyze_skewed_finds_obstruction(tmp_path):
    assert _run(tmp_path, "analyze", "--domain", "skewed-egg2", "--samples", "300") == 0
    scan = _load(tmp_path, "analyze")["results"]["obstruction"]["0"]
    assert abs(scan["max_obstruction"] - 0.25) < 1e-9
    assert scan["at"] == [[1.0, 0.0], [0.0, 0.0]]


def test_corrected_dfsearch_passes(tmp_path):
    assert _run(tmp_path, "dfsearch", "--domain", "skewed-egg2", "--use", "corrected", "--etas", "0.9", "--samples", "1000") == 0


def test_analyze_broken_egg_fails(tmp_path):
    assert _run(tmp_path, "analyze", "--domain", "egg2-broken", "--samples", "200") == 2


def test_verify_raw_skewed_fails_near_landmark(tmp_path):
    code = _run(tmp_path, "verify", "--domain", "skewed-egg2", "--use", "raw", "--eps", "0.01", "--samples", "400")
    assert code == 2
    main1 = next(r for r in _load(tmp_path, "verify")["reports"] if r["check"] == "main1")
    assert not main1["passed"]


def test_correct_writes_ledger_and_csv(tmp_path):
    code = _run(tmp_path, "correct", "--domain", "skewed-egg2", "--eps", "0.05", "--samples", "500", "--format", "both")
    assert code == 0
    led = _load(tmp_path, "correct")["results"]["ledger"]
    assert led["stages"][0]["C"] > 0
    header = (tmp_path / "correct.csv").read_text().splitlines()[0]
    assert header == "check,sample,point,direction,slack,stratum"


def test_dfsearch_mixed_etas(tmp_path):
    assert _run(tmp_path, "dfsearch", "--domain", "ball2", "--etas", "0.5,0.9,2", "--samples", "300") == 0
    out = _load(tmp_path, "dfsearch")
    assert out["results"]["interior"]["verdicts"] == [True, True]
    assert [r["check"] for r in out["reports"]] == ["exterior_df_eta2"]


def test_expr_domain(tmp_path):
    assert _run(tmp_path, "analyze", "--expr", "abs2(z1) + abs2(z2)^2 - 1", "--samples", "200") == 0
    assert _load(tmp_path, "analyze")["domain"]["n"] == 2


@pytest.mark.parametrize(
    "args",
    [
        ["correct", "--domain", "egg2"],
        ["analyze"],
        ["analyze", "--domain", "egg2", "--expr", "re(z1)"],
        ["analyze", "--domain", "ball9"],
        ["dfsearch", "--domain", "ball2", "--etas", "1.0"],
        ["analyze", "--domain", "egg2", "--samples", "0"],
    ],
)
def test_usage_errors_exit_1(tmp_path, args):
    assert _run(tmp_path, *args) == 1


def test_parse_error_exits_1(tmp_path, capsys):
    assert _run(tmp_path, "analyze", "--expr", "abs2(z1) +") == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ParseError"


def test_config_file_and_flag_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\ndomain = egg2\nsamples = 300\neps = 0.1\netas = 0.5, 0.9\n")
    cfg = resolve_config(["verify", "--config", str(ini), "--samples", "200"])
    assert (cfg.domain, cfg.samples, cfg.eps, cfg.etas) == ("egg2", 200, 0.1, (0.5, 0.9))


def test_bundle_echo_replays(tmp_path):
    assert _run(tmp_path, "analyze", "--domain", "egg2", "--samples", "100", "--seed", "5") == 0
    cfg = resolve_config(["analyze", "--config", str(tmp_path / "analyze.json")])
    assert (cfg.samples, cfg.seed, cfg.domain) == (100, 5, "egg2")


def test_runconfig_roundtrip_and_validation():
    cfg = RunConfig(command="dfsearch", domain="ball2", etas=(0.5, 2.0))
    assert RunConfig.from_dict(cfg.to_dict()) == cfg.validate()
    with pytest.raises(UsageError):
        RunConfig(command="analyze", domain="ball2", eps=-1.0).validate()


def test_rerun_is_byte_identical(tmp_path):
    args = ["verify", "--domain", "egg2", "--samples", "300"]
    assert _run(tmp_path, *args) == 0
    first = (tmp_path / "verify.json").read_bytes()
    assert _run(tmp_path, *args) == 0
    assert (tmp_path / "verify.json").read_bytes() == first


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "levilab", "analyze", "--domain", "ball2", "--samples", "50", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "analyze: PASS" in proc.stdout
