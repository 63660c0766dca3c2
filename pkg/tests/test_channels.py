"""
Kraus-level correctability: classification, constructive recovery and the
Kraus read-off from a joint system-environment unitary.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import unitary_group

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from oqecdyn.channels import (  # noqa: E402
    EnvironmentState,
    KrausChannel,
    NotCorrectable,
    RecoveryCertificate,
    apply_channel,
    build_recovery,
    classify_channel,
    gram_blocks,
    kraus_from_unitary,
    recovery_residual,
)
from oqecdyn.code_space import SubsystemDecomposition, encode, reduce_to_A  # noqa: E402
from oqecdyn.evaluate import channel_dynamics, entanglement_fidelity  # noqa: E402
from oqecdyn.instances import correctable_kraus, generic_kraus, random_unitary  # noqa: E402
from oqecdyn.linalg import DimensionError, dagger, kron, pauli_string  # noqa: E402


@pytest.mark.channels
def test_gauge_dephasing_is_noiseless():
    dec = SubsystemDecomposition.canonical(2, 2, 4)
    ch = KrausChannel((np.sqrt(0.75) * pauli_string("II"), 0.5 * pauli_string("IZ")))
    assert ch.completeness_residual() < 1e-12
    label, cert = classify_channel(ch, dec)
    assert label == "NOISELESS"
    assert isinstance(cert, RecoveryCertificate)
    assert cert.d_Bprime == 2


@pytest.mark.channels
def test_bit_flip_on_bare_qubit_is_not_correctable():
    dec = SubsystemDecomposition.canonical(2, 1, 2)
    ch = KrausChannel((np.sqrt(0.9) * pauli_string("I"), np.sqrt(0.1) * pauli_string("X")))
    out = build_recovery(ch, dec)
    assert isinstance(out, NotCorrectable)
    assert np.isclose(out.residual, 0.3 * np.sqrt(2))
    assert classify_channel(ch, dec)[0] == "NOT_CORRECTABLE"


@pytest.mark.channels
def test_single_unitary_is_unitarily_correctable():
    u_noise = unitary_group.rvs(2, random_state=2)
    dec = SubsystemDecomposition.canonical(2, 1, 2)
    ch = KrausChannel((u_noise,))
    label, cert = classify_channel(ch, dec)
    assert label == "UNITARILY_CORRECTABLE"
    assert np.isclose(abs(np.trace(cert.u @ u_noise)), 2.0)


@pytest.mark.channels
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_constructed_channel_is_recovered(seed):
    rng = np.random.default_rng(seed)
    j, ops = correctable_kraus(2, 1, 4, 2, rng, d_Bprime=2)
    dec = SubsystemDecomposition(2, 1, j)
    ch = KrausChannel(tuple(ops))
    assert ch.completeness_residual() < 1e-9
    cert = build_recovery(ch, dec)
    assert isinstance(cert, RecoveryCertificate)
    assert cert.d_Bprime <= 2
    assert cert.residual < 1e-8
    assert recovery_residual(ch, dec, cert.recovered, cert.u) < 1e-8

    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    out = apply_channel(ch.then(cert.u), encode(dec, rho, np.eye(1)))
    assert np.allclose(reduce_to_A(cert.recovered, out), rho, atol=1e-8)


@pytest.mark.channels
def test_generic_channel_is_not_correctable():
    rng = np.random.default_rng(7)
    ch = KrausChannel(tuple(generic_kraus(4, 2, rng)))
    dec = SubsystemDecomposition.canonical(2, 1, 4)
    assert gram_blocks(ch, dec).triviality_residual > 1e-3
    assert isinstance(build_recovery(ch, dec), NotCorrectable)


@pytest.mark.channels
def test_kraus_from_product_unitary():
    u_s = unitary_group.rvs(2, random_state=4)
    v = kron(u_s, np.eye(2))
    ch = kraus_from_unitary(v, EnvironmentState.pure([1, 0]))
    assert len(ch.ops) == 1
    assert np.allclose(ch.ops[0], u_s)

    ch = kraus_from_unitary(kron(np.eye(2), pauli_string("X")), EnvironmentState.maximally_mixed(2))
    assert len(ch.ops) == 2
    assert ch.labels == ("0,1", "1,0")
    for m in ch.ops:
        assert np.allclose(m, np.eye(2) / np.sqrt(2))


@pytest.mark.channels
def test_environment_state_validation():
    env = EnvironmentState.from_density(np.diag([0.25, 0.75, 0.0]))
    assert env.vectors.shape == (3, 2)
    assert np.allclose(env.density(), np.diag([0.25, 0.75, 0.0]))
    sub = EnvironmentState.subspace(np.eye(3)[:, :2])
    assert sub.is_subspace
    assert np.allclose(sub.effective_weights, [0.5, 0.5])
    with pytest.raises(ValueError):
        EnvironmentState(np.eye(2), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        EnvironmentState(np.ones((2, 2)))


@pytest.mark.channels
def test_apply_channel_rejects_wrong_dimension():
    ch = KrausChannel((np.eye(2),))
    with pytest.raises(DimensionError):
        apply_channel(ch, np.eye(3) / 3)


def _random_state(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.mark.channels
@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_constructed_channels_sweep(seed):
    rng = np.random.default_rng(1000 + seed)
    d_A = 2 + seed % 2
    d_B = 1 + (seed // 2) % 2
    d_S = int(rng.integers(d_A * d_B, 9))
    j, ops = correctable_kraus(d_A, d_B, d_S, 1 + seed % 4, rng)
    dec = SubsystemDecomposition(d_A, d_B, j)
    ch = KrausChannel(tuple(ops))
    assert gram_blocks(ch, dec).triviality_residual <= 1e-9
    cert = build_recovery(ch, dec)
    assert isinstance(cert, RecoveryCertificate)
    assert cert.residual <= 1e-8
    assert d_B <= cert.d_Bprime <= d_S // d_A

    rho, tau = _random_state(d_A, rng), _random_state(d_B, rng)
    out = apply_channel(ch.then(cert.u), encode(dec, rho, tau))
    assert np.allclose(reduce_to_A(cert.recovered, out), rho, atol=1e-8)


@pytest.mark.channels
@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_generic_channels_sweep(seed):
    rng = np.random.default_rng(5000 + seed)
    ch = KrausChannel(tuple(generic_kraus(4, 2 + seed % 3, rng)))
    dec = SubsystemDecomposition.canonical(2, 1, 4)
    result = build_recovery(ch, dec)
    assert isinstance(result, NotCorrectable)
    assert result.residual > 1e-3
    assert entanglement_fidelity(channel_dynamics(ch), dec) < 0.999


@pytest.mark.channels
@pytest.mark.parametrize("seed", range(20))
def test_certificate_follows_a_unitary_after_the_noise(seed):
    rng = np.random.default_rng(seed)
    j, ops = correctable_kraus(2, 1, 6, 3, rng)
    dec = SubsystemDecomposition(2, 1, j)
    ch = KrausChannel(tuple(ops))
    v = random_unitary(6, rng)
    ch2 = ch.then(v)

    assert np.isclose(gram_blocks(ch2, dec).triviality_residual, gram_blocks(ch, dec).triviality_residual, atol=1e-10)
    cert, cert2 = build_recovery(ch, dec), build_recovery(ch2, dec)
    assert isinstance(cert2, RecoveryCertificate)
    assert cert2.d_Bprime == cert.d_Bprime
    assert recovery_residual(ch2, dec, cert.recovered, cert.u @ dagger(v)) < 1e-8
