"""
Kernel tests: vectorization convention, partial trace, ordered exponentials and
the Procrustes / polar helpers every condition check relies on.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import unitary_group

# Ensure `src/` is importable when running `pytest` from project root
ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from oqecdyn.linalg import (  # noqa: E402
    DimensionError,
    dagger,
    gram_schmidt_complete,
    hermitian_basis,
    is_unitary,
    kron,
    partial_trace,
    pauli_string,
    polar_unitary,
    procrustes_unitary,
    superop_matrix,
    time_ordered_exp,
    trace_distance,
    unvec,
    vec,
)


def _rand(d, rng, cols=None):
    cols = d if cols is None else cols
    return rng.normal(size=(d, cols)) + 1j * rng.normal(size=(d, cols))


@pytest.mark.linalg
def test_superop_matches_column_stacking():
    rng = np.random.default_rng(0)
    left, rho, right = _rand(3, rng), _rand(3, rng), _rand(3, rng)
    lhs = vec(left @ rho @ right)
    rhs = superop_matrix(left, right) @ vec(rho)
    assert np.allclose(lhs, rhs)
    assert np.allclose(unvec(rhs, 3), left @ rho @ right)


@pytest.mark.linalg
def test_partial_trace_of_product_keeps_factor_order():
    rng = np.random.default_rng(1)
    a, b, c = _rand(2, rng), _rand(3, rng), _rand(2, rng)
    x = kron(kron(a, b), c)
    assert np.allclose(partial_trace(x, [2, 3, 2], keep=[0]), a * np.trace(b) * np.trace(c))
    assert np.allclose(partial_trace(x, [2, 3, 2], keep=[0, 2]), kron(a, c) * np.trace(b))
    full = partial_trace(x, [2, 3, 2], keep=[])
    assert full.shape == (1, 1)
    assert np.isclose(full[0, 0], np.trace(x))


@pytest.mark.linalg
def test_partial_trace_rejects_bad_dims():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(6), [2, 2], keep=[0])
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), [2, 2], keep=[2])


@pytest.mark.linalg
def test_kron_respects_max_dim():
    with pytest.raises(DimensionError):
        kron(np.eye(8), np.eye(8), max_dim=32)


@pytest.mark.linalg
def test_time_ordered_exp_later_segments_act_on_the_left():
    x, z = pauli_string("X"), pauli_string("Z")
    out = time_ordered_exp([(-1j * x, 0.3), (-1j * z, 0.7)])
    assert np.allclose(out, expm(-1j * z * 0.7) @ expm(-1j * x * 0.3))
    assert is_unitary(out)
    with_substeps = time_ordered_exp([(-1j * x, 0.3), (-1j * z, 0.7)], substeps=4)
    assert np.allclose(with_substeps, out)


@pytest.mark.linalg
def test_time_ordered_exp_rejects_non_antihermitian_generator():
    with pytest.raises(ValueError):
        time_ordered_exp([(pauli_string("X"), 1.0)])
    with pytest.raises(ValueError):
        time_ordered_exp([])


@pytest.mark.linalg
def test_procrustes_recovers_unitary_full_and_rank_deficient():
    u = unitary_group.rvs(4, random_state=3)
    rng = np.random.default_rng(3)
    a = _rand(4, rng)
    got, res = procrustes_unitary(a, u @ a)
    assert res < 1e-9
    assert np.allclose(got, u)

    thin = _rand(4, rng, cols=2)
    got, res = procrustes_unitary(thin, u @ thin)
    assert res < 1e-9
    assert is_unitary(got)


@pytest.mark.linalg
def test_polar_unitary_of_scaled_unitary():
    u = unitary_group.rvs(3, random_state=5)
    p = np.diag([1.0, 2.0, 3.0])
    assert np.allclose(polar_unitary(u @ p), u)


@pytest.mark.linalg
def test_gram_schmidt_complete_spans_complement():
    basis = np.eye(4, dtype=complex)[:, [1]]
    comp = gram_schmidt_complete(basis)
    assert comp.shape == (4, 3)
    assert np.allclose(dagger(basis) @ comp, 0)
    assert np.allclose(dagger(comp) @ comp, np.eye(3))
    # canonical candidates in index order
    assert np.allclose(comp[:, 0], np.eye(4)[:, 0])


@pytest.mark.linalg
def test_hermitian_basis_is_orthonormal():
    d = 3
    basis = hermitian_basis(d)
    assert len(basis) == d * d
    gram = np.array([[np.trace(dagger(a) @ b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(d * d))
    assert np.allclose(basis[-1], np.eye(d) / np.sqrt(d))


@pytest.mark.linalg
def test_pauli_strings_and_trace_distance():
    assert np.allclose(pauli_string("IX"), np.kron(np.eye(2), [[0, 1], [1, 0]]))
    assert np.allclose(pauli_string("-") @ pauli_string("+"), pauli_string("0"))
    with pytest.raises(ValueError):
        pauli_string("IQ")
    assert np.isclose(trace_distance(pauli_string("0"), pauli_string("1")), 1.0)
