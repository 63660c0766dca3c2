"""
Lindblad-level tests: generator conventions, the two integrators, the
noiseless-subsystem (fixed frame) test, recovery-unitary tracking and gauge
expansion.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
SCENARIOS = ROOT / "scenarios"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from oqecdyn.checks import CheckContext  # noqa: E402
from oqecdyn.checks import markov_checks  # noqa: E402
from oqecdyn.code_space import SubsystemDecomposition, gauge_level_vectors, projector_AB  # noqa: E402
from oqecdyn.ingest import load_scenario  # noqa: E402
from oqecdyn.instances import random_hermitian, random_operator, random_unitary  # noqa: E402
from oqecdyn.linalg import pauli_string, trace_distance, unvec, vec  # noqa: E402
from oqecdyn.markovian import (  # noqa: E402
    LindbladModel,
    LindbladSegment,
    ScheduleError,
    evolve_operator,
    generator_split,
    liouvillian_apply,
    liouvillian_matrix,
    markov_residuals,
    propagate,
    superop_propagators,
    track_fixed_frame,
    track_recovery_unitary,
)


def _random_state(d, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def _dfs_model():
    # every operator acts on the second qubit, the gauge factor of canonical(2, 2, 4)
    h = 0.5 * pauli_string("IX")
    ls = [np.sqrt(0.3) * pauli_string("I-"), 0.2 * pauli_string("IZ")]
    return LindbladModel.constant(h, ls)


@pytest.mark.markovian
def test_liouvillian_matrix_matches_direct_application():
    model = _dfs_model()
    rho = _random_state(4, 0)
    seg = model.segments[0]
    direct = liouvillian_apply(model, 0.3, rho)
    via_matrix = unvec(liouvillian_matrix(seg.h, seg.l_ops) @ vec(rho), 4)
    assert np.allclose(direct, via_matrix)
    assert abs(np.trace(direct)) < 1e-12


@pytest.mark.markovian
def test_generator_split_reproduces_generator_on_code_states():
    model = _dfs_model()
    dec = SubsystemDecomposition.canonical(2, 1, 4)
    p = projector_AB(dec)
    rho = p @ _random_state(4, 1) @ p
    rho /= np.trace(rho)
    split = generator_split(model, 0.0, p)
    assert np.allclose(split.apply(rho), liouvillian_apply(model, 0.0, rho))
    with pytest.raises(ValueError):
        generator_split(model, 0.0, 0.5 * np.eye(4))


@pytest.mark.markovian
def test_integrators_agree_and_preserve_trace():
    model = _dfs_model()
    rho = _random_state(4, 2)
    grid = np.linspace(0.0, 1.0, 5)
    a = evolve_operator(model, rho, grid, "expm")
    b = evolve_operator(model, rho, grid, "rk4", step=1e-3)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-9)
        assert np.isclose(np.trace(x), 1.0)
    states = propagate(model, rho, grid)
    assert len(states) == 5
    assert states[-1].min_eigenvalue > -1e-10
    with pytest.raises(ValueError):
        evolve_operator(model, rho, grid, "euler")


@pytest.mark.markovian
def test_superop_propagators_are_cumulative():
    seg1 = LindbladSegment(0.4, 0.3 * pauli_string("X"), (0.5 * pauli_string("Z"),))
    seg2 = LindbladSegment(0.6, 0.7 * pauli_string("Y"))
    model = LindbladModel(2, (seg1, seg2))
    phis = superop_propagators(model, [0.0, 0.4, 1.0])
    assert np.allclose(phis[0], np.eye(4))
    assert np.allclose(phis[1], expm(seg1.superop * 0.4))
    assert np.allclose(phis[2], expm(seg2.superop * 0.6) @ expm(seg1.superop * 0.4))


@pytest.mark.markovian
def test_schedule_boundaries():
    seg = LindbladSegment(0.5, np.zeros((2, 2)))
    model = LindbladModel(2, (seg, LindbladSegment(0.5, np.zeros((2, 2)))))
    assert model.t_max == 1.0
    assert model.segment_index(0.0) == 0
    assert model.segment_index(0.5) == 1
    assert model.segment_index(1.0) == 1
    assert model.pieces(0.25, 0.75) == [(0, 0.25), (1, 0.25)]
    with pytest.raises(ScheduleError):
        model.segment_index(1.5)
    with pytest.raises(ValueError):
        LindbladSegment(0.0, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        LindbladSegment(1.0, pauli_string("-"))


@pytest.mark.markovian
def test_noiseless_subsystem_passes_fixed_frame():
    model = _dfs_model()
    grid = np.linspace(0.0, 1.0, 11)
    assert track_fixed_frame(model, SubsystemDecomposition.canonical(2, 2, 4), grid).verdict == "CORRECTABLE"
    # with the qubits exchanged the same operators act on A
    swapped = SubsystemDecomposition(2, 2, np.eye(4)[:, [0, 2, 1, 3]])
    assert track_fixed_frame(model, swapped, grid).verdict == "NOT_CORRECTABLE"


@pytest.mark.markovian
def test_r1_grows_linearly_with_logical_perturbation():
    dec = SubsystemDecomposition.canonical(2, 2, 4)
    base = _dfs_model().segments[0]
    grid = np.linspace(0.0, 1.0, 11)
    r1 = []
    for eps in (1e-4, 1e-3, 1e-2):
        ls = list(base.l_ops) + [eps * pauli_string("ZI")]
        traj = track_fixed_frame(LindbladModel.constant(base.h, ls), dec, grid)
        assert traj.verdict == "NOT_CORRECTABLE"
        r1.append(float(np.max(traj.residuals["r1"])))
    assert r1[0] < r1[1] < r1[2]
    slopes = np.array(r1) / np.array([1e-4, 1e-3, 1e-2])
    assert slopes.max() / slopes.min() < 3.0
    # ||Z (x) I||_F, nothing else contributes
    assert np.allclose(slopes, 2.0)


@pytest.mark.markovian
def test_logical_drift_is_tracked_by_recovery_unitary():
    h = pauli_string("Z")
    model = LindbladModel.constant(h, ())
    dec = SubsystemDecomposition.canonical(2, 1, 2)
    grid = np.linspace(0.0, 1.0, 11)
    assert track_fixed_frame(model, dec, grid).verdict == "NOT_CORRECTABLE"
    traj = track_recovery_unitary(model, dec, grid, step=1e-3)
    assert traj.verdict == "CORRECTABLE"
    assert traj.max_residual < 1e-9
    assert np.allclose(traj.unitaries[-1], expm(1j * h), atol=1e-8)
    df = traj.to_frame()
    assert list(df.columns) == ["t", "r1", "r2", "r3", "d_B"]
    assert len(df) == 11


@pytest.mark.markovian
def test_logical_dephasing_is_not_correctable():
    model = LindbladModel.constant(np.zeros((2, 2)), (np.sqrt(0.1) * pauli_string("Z"),))
    dec = SubsystemDecomposition.canonical(2, 1, 2)
    grid = np.linspace(0.0, 1.0, 6)
    traj = track_recovery_unitary(model, dec, grid)
    assert traj.verdict == "NOT_CORRECTABLE"
    assert "nontrivial action on A" in traj.reason
    assert not traj.gauge_events
    assert np.isclose(traj.residuals["r1"][0], np.sqrt(0.1) * np.sqrt(2))


@pytest.mark.markovian
def test_gauge_leakage_triggers_one_expansion():
    h = 0.5 * pauli_string("IZ")
    model = LindbladModel(4, (
        LindbladSegment(0.5, h),
        LindbladSegment(0.5, h, (0.7 * pauli_string("+I"),)),
    ))
    dec = SubsystemDecomposition.canonical(2, 1, 4)
    grid = np.linspace(0.0, 1.0, 11)

    without = track_recovery_unitary(model, dec, grid, allow_gauge_expansion=False)
    assert without.verdict == "NOT_CORRECTABLE"

    traj = track_recovery_unitary(model, dec, grid)
    assert traj.verdict == "CORRECTABLE"
    assert len(traj.gauge_events) == 1
    assert traj.gauge_events[0].time == pytest.approx(0.5)
    assert traj.d_B[0] == 1 and traj.d_B[-1] == 2
    assert np.allclose(gauge_level_vectors(traj.decompositions[-1], [0]), dec.iso)


def _two_segment_model():
    seg1 = LindbladSegment(0.4, 0.3 * pauli_string("X"), (0.5 * pauli_string("Z"),))
    seg2 = LindbladSegment(0.6, 0.7 * pauli_string("Y"))
    return LindbladModel(2, (seg1, seg2))


@pytest.mark.markovian
def test_superop_propagators_follow_the_integrator():
    model = _two_segment_model()
    grid = [0.0, 0.4, 1.0]
    exact = superop_propagators(model, grid)
    stepped = superop_propagators(model, grid, "rk4", step=1e-3)
    for a, b in zip(exact, stepped):
        assert np.allclose(a, b, atol=1e-9)
    with pytest.raises(ValueError):
        superop_propagators(model, grid, "euler")


@pytest.mark.markovian
def test_dfs_check_oracle_uses_the_configured_integrator():
    sc = load_scenario(SCENARIOS / "dfs_markov.json")
    spec = next(s for s in sc.checks if s.name == "dfs")
    ctx = CheckContext(integrator="rk4", step=1e-2)
    result = markov_checks.dfs(sc, spec, ctx)
    assert result.verdict == "CORRECTABLE"
    assert result.fidelity_min >= 1 - 1e-6


@pytest.mark.markovian
@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_integrators_agree_on_random_models(seed):
    rng = np.random.default_rng(300 + seed)
    d = 2 + seed % 5
    h = random_hermitian(d, rng)
    ls = [random_operator(d, rng, 0.5) for _ in range(1 + seed % 3)]
    model = LindbladModel.constant(h, ls)
    rho = _random_state(d, seed)
    a = evolve_operator(model, rho, [0.0, 1.0], "expm")[-1]
    b = evolve_operator(model, rho, [0.0, 1.0], "rk4", step=1e-3)[-1]
    assert trace_distance(a, b) <= 1e-6

    states = propagate(model, rho, np.linspace(0.0, 1.0, 11), "rk4", step=1e-3)
    for s in states:
        assert np.isclose(np.trace(s.mat).real, 1.0, atol=1e-9)
        assert s.min_eigenvalue >= -1e-10


@pytest.mark.markovian
@pytest.mark.parametrize("seed", range(5))
def test_residuals_invariant_under_mixing_of_lindblad_operators(seed):
    rng = np.random.default_rng(seed)
    dec = SubsystemDecomposition.canonical(2, 1, 4)
    h = random_hermitian(4, rng)
    ls = [random_operator(4, rng, 0.5) for _ in range(3)]
    mix = random_unitary(3, rng)
    mixed = [sum(mix[j, k] * ls[k] for k in range(3)) for j in range(3)]
    u = random_unitary(4, rng)
    hprime = random_hermitian(4, rng)

    a = markov_residuals(LindbladModel.constant(h, ls), 0.3, dec, u, hprime)
    b = markov_residuals(LindbladModel.constant(h, mixed), 0.3, dec, u, hprime)
    assert np.isclose(a.r1, b.r1)
    assert np.isclose(a.r2, b.r2)
    assert np.isclose(a.r3, b.r3)
