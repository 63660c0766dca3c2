"""
Random instance generators: constructed instances are correctable, perturbed
ones are not, and every generated dict is a valid scenario.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from oqecdyn.check import run_scenario  # noqa: E402
from oqecdyn.code_space import CapacityError  # noqa: E402
from oqecdyn.instances import (  # noqa: E402
    random_correctable_instance,
    random_hermitian,
    random_isometry,
    random_unitary,
    raw_instance,
)
from oqecdyn.linalg import is_hermitian, is_unitary  # noqa: E402


@pytest.mark.harness
def test_random_building_blocks():
    rng = np.random.default_rng(0)
    assert is_unitary(random_unitary(3, rng))
    assert random_unitary(1, rng).shape == (1, 1)
    assert is_hermitian(random_hermitian(4, rng))
    j = random_isometry(5, 2, rng)
    assert np.allclose(j.conj().T @ j, np.eye(2))


@pytest.mark.harness
def test_raw_instance_is_deterministic_per_seed():
    a = raw_instance("dfs", seed=3)
    b = raw_instance("dfs", seed=3)
    c = raw_instance("dfs", seed=4)
    assert a == b
    assert a["model"] != c["model"]
    assert raw_instance("a", seed=3)["name"] == a["name"]


@pytest.mark.harness
def test_invalid_requests():
    with pytest.raises(ValueError):
        raw_instance("teleport")
    with pytest.raises(CapacityError):
        raw_instance("dfs", d_A=2, d_B=3, d_S=4)


@pytest.mark.harness
@pytest.mark.parametrize("kind,dims", [
    ("channel", {"d_A": 2, "d_B": 1, "d_S": 4}),
    ("channel", {"d_A": 2, "d_B": 2, "d_S": 4}),
    ("dfs", {"d_A": 2, "d_B": 2, "d_S": 4}),
    ("drift", {"d_A": 2, "d_B": 1, "d_S": 3}),
    ("hamiltonian", {"d_A": 2, "d_B": 1, "d_S": 2}),
])
def test_constructed_instances_pass_their_checks(kind, dims):
    sc = random_correctable_instance(kind, dims, seed=1, t_max=0.5, dt=0.05)
    report, _ = run_scenario(sc)
    assert report["passed"], report["checks"]
    for entry in report["checks"].values():
        assert entry["verdict"] in ("CORRECTABLE", "RECOVERABLE")


@pytest.mark.harness
@pytest.mark.parametrize("kind", ["dfs", "drift", "hamiltonian"])
def test_perturbed_instances_are_rejected(kind):
    sc = random_correctable_instance(kind, {"d_A": 2, "d_B": 1, "d_S": 3}, seed=2,
                                     perturb=0.1, t_max=0.5, dt=0.05)
    report, _ = run_scenario(sc)
    assert report["passed"], report["checks"]
    assert all(e["verdict"] == "NOT_CORRECTABLE" for e in report["checks"].values())


@pytest.mark.harness
def test_generic_channel_is_flagged():
    sc = random_correctable_instance("generic", {"d_A": 2, "d_B": 1, "d_S": 4}, seed=5)
    report, _ = run_scenario(sc)
    assert report["checks"]["thm1"]["verdict"] == "NOT_CORRECTABLE"


@pytest.mark.harness
@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_sweep_of_markov_instances(seed):
    for kind in ("dfs", "drift"):
        sc = random_correctable_instance(kind, {"d_A": 2, "d_B": 2, "d_S": 5, "n_ops": 3}, seed=seed)
        report, _ = run_scenario(sc)
        assert report["passed"], (kind, seed, report["checks"])
