"""
End-to-end tests: the bundled fixtures pass, and the command-line verbs honour
their exit codes (0 pass, 1 expectation failed, 2 malformed input).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import pandas as pd
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from oqecdyn.check import run_scenario  # noqa: E402
from oqecdyn.cli import main  # noqa: E402
from oqecdyn.utils import load_json  # noqa: E402

SCENARIOS = ROOT / "scenarios"
FIXTURES = sorted(SCENARIOS.glob("*.json"))


def _fixture(name):
    return json.loads((SCENARIOS / f"{name}.json").read_text())


@pytest.mark.harness
@pytest.mark.parametrize("path", FIXTURES, ids=lambda p: p.stem)
def test_bundled_fixture_passes(path):
    report, series = run_scenario(path, {})
    failures = {k: v.get("failures") or v.get("error") for k, v in report["checks"].items() if not v["passed"]}
    assert report["passed"], failures
    assert report["tool"] == "oqecdyn"
    assert report["conventions"]["lindblad"] == "GKLS"


@pytest.mark.harness
def test_report_details_for_known_fixtures():
    report, series = run_scenario(SCENARIOS / "gauge_expansion.json", {})
    events = report["checks"]["thm3"]["gauge_events"]
    assert len(events) == 1
    assert events[0]["time"] == pytest.approx(0.5)
    assert events[0]["d_B"] == 2
    assert report["checks"]["thm3"]["fidelity_min"] >= 1 - 1e-6
    assert "gauge_expansion__thm3" in series

    report, _ = run_scenario(SCENARIOS / "controlled_flip.json", {})
    assert report["checks"]["thm8"]["certificate"]["d_Bprime"] == 2

    report, _ = run_scenario(SCENARIOS / "channel_dephasing.json", {})
    assert report["checks"]["thm1"]["classification"] == "NOISELESS"


@pytest.mark.harness
def test_environment_subspace_recovery_fails_outside_the_subspace():
    report, _ = run_scenario(SCENARIOS / "env_subspace.json", {})
    checks = report["checks"]
    assert checks["thm8"]["verdict"] == "NOT_CORRECTABLE"
    assert checks["thm8#1"]["verdict"] == "CORRECTABLE"
    for name in ("thm6", "thm7"):
        assert checks[name]["verdict"] == "RECOVERABLE"
        assert checks[name]["fidelity_min"] >= 1 - 1e-6
        # with the environment in |1> the qubit is flipped at t = 1
        assert checks[name]["fidelity_outside_min"] < 1 - 1e-6
        assert checks[name]["fidelity_outside_min"] == pytest.approx(0.0, abs=1e-8)


@pytest.mark.harness
def test_check_verb_writes_report(tmp_path):
    out = tmp_path / "report.json"
    code = main(["check", "--scenario", str(SCENARIOS / "drift_tracking.json"),
                 "--out", str(out), "--csv", str(tmp_path / "csv")])
    assert code == 0
    report = load_json(out)
    assert report["passed"] is True
    assert set(report) >= {"tool", "version", "scenario", "seed", "tol", "checks", "passed"}
    assert list((tmp_path / "csv").glob("drift_tracking__thm2.csv"))


@pytest.mark.harness
def test_check_verb_exit_codes(tmp_path):
    wrong = _fixture("drift_tracking")
    wrong["checks"][0]["expect"] = "NOT_CORRECTABLE"
    p = tmp_path / "wrong.json"
    p.write_text(json.dumps(wrong))
    assert main(["check", "--scenario", str(p), "--out", str(tmp_path / "r1.json")]) == 1

    broken = _fixture("drift_tracking")
    broken["model"]["segments"][0]["H"] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(broken))
    assert main(["check", "--scenario", str(p), "--out", str(tmp_path / "r2.json")]) == 2
    assert not (tmp_path / "r2.json").exists()

    unknown = _fixture("drift_tracking")
    unknown["checks"] = ["thm99"]
    p = tmp_path / "unknown.json"
    p.write_text(json.dumps(unknown))
    assert main(["check", "--scenario", str(p), "--out", str(tmp_path / "r3.json")]) == 2


@pytest.mark.harness
def test_loose_tol_is_caught_by_the_oracle(tmp_path):
    raw = _fixture("dephasing_a")
    raw["checks"] = [{"name": "thm2", "expect": "CORRECTABLE"}]
    p = tmp_path / "loose.json"
    p.write_text(json.dumps(raw))
    out = tmp_path / "loose_report.json"
    # the residual is below a tolerance of 10, but logical dephasing is real
    assert main(["check", "--scenario", str(p), "--out", str(out), "--tol", "10"]) == 1
    report = load_json(out)
    assert report["tol"] == 10.0
    entry = report["checks"]["thm2"]
    assert entry["verdict"] == "CORRECTABLE"
    assert any("oracle fidelity" in f for f in entry["failures"])


@pytest.mark.harness
def test_directory_of_scenarios(tmp_path):
    for name in ("drift_tracking", "channel_dephasing"):
        (tmp_path / f"{name}.json").write_text(json.dumps(_fixture(name)))
    out = tmp_path / "reports"
    assert main(["check", "--scenario", str(tmp_path), "--out", str(out)]) == 0
    summary = load_json(out / "summary.json")
    assert summary["passed"] is True
    assert {r["scenario"] for r in summary["scenarios"]} == {"drift_tracking", "channel_dephasing"}


@pytest.mark.harness
def test_gen_then_check(tmp_path):
    p = tmp_path / "gen.json"
    assert main(["gen", "--kind", "b", "--d_A", "2", "--d_B", "1", "--d_S", "3", "--seed", "7",
                 "--out", str(p)]) == 0
    assert load_json(p)["kind"] == "markovian"
    assert main(["check", "--scenario", str(p), "--out", str(tmp_path / "r.json")]) == 0


@pytest.mark.harness
def test_evolve_and_report_verbs(tmp_path, capsys):
    assert main(["evolve", "--scenario", str(SCENARIOS / "dephasing_a.json"), "--csv", str(tmp_path)]) == 0
    df = pd.read_csv(tmp_path / "dephasing_a.csv")
    assert list(df.columns) == ["t", "trace", "purity", "min_eig", "leakage", "fidelity"]
    assert df["trace"].sub(1.0).abs().max() < 1e-9
    assert df["fidelity"].iloc[0] == pytest.approx(1.0)
    assert df["fidelity"].iloc[-1] < 1.0

    out = tmp_path / "report.json"
    main(["check", "--scenario", str(SCENARIOS / "channel_dephasing.json"), "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out), "--plain"]) == 0
    text = capsys.readouterr().out
    assert "channel_dephasing" in text and "PASSED" in text
    assert main(["report", str(tmp_path / "nope.json")]) == 2


@pytest.mark.harness
def test_list_and_unknown_verb(capsys):
    assert main(["list"]) == 0
    names = capsys.readouterr().out.split()
    assert {"thm1", "thm2", "thm3", "thm4", "thm5", "thm6", "thm7", "thm8", "dfs", "propagate"} <= set(names)
    assert main(["teleport"]) == 2
    assert main([]) == 2


@pytest.mark.harness
def test_package_level_exports():
    import oqecdyn

    assert oqecdyn.run_scenario is run_scenario
    dec = oqecdyn.SubsystemDecomposition.canonical(2, 2, 4)
    assert dec.d_S == 4
    with pytest.raises(AttributeError):
        oqecdyn.not_a_name
