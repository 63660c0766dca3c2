"""
Scenario schema tests: every bundled fixture parses, and malformed input is
rejected with the JSON path of the offending field.
"""

from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from oqecdyn.ingest import (  # noqa: E402
    ScenarioError,
    load_scenario,
    parse_operator,
    parse_scenario,
    parse_state,
)
from oqecdyn.linalg import pauli_string  # noqa: E402

FIXTURES = sorted((ROOT / "scenarios").glob("*.json"))

MARKOV = {
    "schema_version": 1,
    "name": "tiny",
    "kind": "markovian",
    "decomposition": {"d_A": 2, "d_B": 1, "d_S": 2},
    "model": {"segments": [{"duration": 1.0, "H": {"pauli": "Z"}, "L": []}]},
    "checks": ["thm2"],
}


def _raises_at(raw, path):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(raw)
    assert info.value.path == path, str(info.value)
    return info.value


@pytest.mark.harness
@pytest.mark.parametrize("path", FIXTURES, ids=lambda p: p.stem)
def test_bundled_fixtures_parse(path):
    sc = load_scenario(path)
    assert sc.name == path.stem
    assert sc.checks
    if sc.kind != "channel":
        assert sc.grid[0] == 0.0 and sc.grid[-1] <= sc.model.t_max + 1e-12


@pytest.mark.harness
def test_minimal_scenario_defaults():
    sc = parse_scenario(copy.deepcopy(MARKOV))
    assert sc.kind == "markovian"
    assert len(sc.grid) == 101
    assert sc.integrator == {"method": "expm", "step": 1e-3}
    assert sc.checks[0].name == "thm2" and sc.checks[0].expect is None
    assert sc.d_E is None


@pytest.mark.harness
def test_operator_shorthands():
    op = parse_operator({"terms": [{"pauli": "XI", "coeff": [0, 1]}, {"pauli": "IZ"}]}, "op", 4)
    assert np.allclose(op, 1j * pauli_string("XI") + pauli_string("IZ"))
    assert np.allclose(parse_operator({"matrix": [[1, 0], [0, [0, 2]]]}, "op", 2), np.diag([1, 2j]))
    rho = parse_state({"vector": [1, 1]}, "s", 2)
    assert np.allclose(rho, np.full((2, 2), 0.5))
    with pytest.raises(ScenarioError):
        parse_state([[1, 0], [0, 1]], "s", 2)


@pytest.mark.harness
def test_bad_lindblad_operator_shape_names_the_field():
    raw = copy.deepcopy(MARKOV)
    raw["model"]["segments"][0]["L"] = [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]]
    _raises_at(raw, "model.segments[0].L[0]")


@pytest.mark.harness
def test_non_hermitian_hamiltonian_names_the_segment():
    raw = copy.deepcopy(MARKOV)
    raw["model"]["segments"][0]["H"] = {"pauli": "-"}
    _raises_at(raw, "model.segments[0]")


@pytest.mark.harness
def test_structural_errors():
    raw = copy.deepcopy(MARKOV)
    raw["decomposition"]["d_B"] = 2
    _raises_at(raw, "decomposition")

    raw = copy.deepcopy(MARKOV)
    raw["checks"] = [{"name": "thm2", "expect": "MAYBE"}]
    _raises_at(raw, "checks[0].expect")

    raw = copy.deepcopy(MARKOV)
    raw["grid"] = {"t_max": 2.0, "dt": 0.1}
    _raises_at(raw, "grid.t_max")

    raw = copy.deepcopy(MARKOV)
    raw["kind"] = "quantum"
    _raises_at(raw, "kind")

    raw = copy.deepcopy(MARKOV)
    del raw["model"]
    _raises_at(raw, "model")

    raw = copy.deepcopy(MARKOV)
    raw["schema_version"] = 2
    _raises_at(raw, "schema_version")


@pytest.mark.harness
def test_ambient_must_extend_the_code():
    raw = copy.deepcopy(MARKOV)
    raw["decomposition"] = {
        "d_A": 2, "d_B": 1, "d_S": 4,
        "ambient": [[0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0], [0, 0, 0, 1]],
    }
    raw["model"]["segments"][0]["H"] = {"pauli": "ZZ"}
    _raises_at(raw, "decomposition.ambient")

    raw["decomposition"]["ambient"] = [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]
    sc = parse_scenario(raw)
    assert sc.ambient.d_B == 2


@pytest.mark.harness
def test_environment_subspace_validation():
    raw = json.loads((ROOT / "scenarios" / "env_subspace.json").read_text())
    raw["checks"][1]["env"]["basis"] = {"vector": [1, 0, 0]}
    _raises_at(raw, "checks[1].env.basis.vector")

    raw = copy.deepcopy(MARKOV)
    raw["env"] = {"kind": "subspace", "basis": [[1], [0]]}
    _raises_at(raw, "env")


@pytest.mark.harness
def test_invalid_json_reports_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "markovian",\n  "model": }')
    with pytest.raises(ScenarioError) as info:
        load_scenario(bad)
    assert "line 2" in str(info.value)
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.json")
