"""
Brute-force verification oracle for encoded subsystems.

A "dynamics" here is any linear map on operators of H^S, given as a callable.
The oracle never looks at the condition residuals: it encodes one half of a
maximally entangled (reference, A) pair, runs the dynamics, applies the
candidate recovery and reads off the overlap with the original pair.

Because the dynamics is linear we never build the reference explicitly:

    F = (1/d_A^2) * sum_{r, r'} <r| Tr_B[ J'^dag U E(J(|r><r'| (x) tau)J^dag) U^dag J' ] |r'>

which equals <Phi| (id (x) R.E)(|Phi><Phi|) |Phi> for the maximally entangled
|Phi>. Full depolarization of a qubit gives 0.25.

Residual summaries are macro-averaged over grid points, the same way per-group
metrics are averaged so that no single time dominates.
"""
from __future__ import annotations

from typing import Callable, Dict, Iterable, List, Sequence

import numpy as np

from .channels import EnvironmentState, KrausChannel, apply_channel
from .code_space import SubsystemDecomposition, encode, projector_AB, reduce_to_A
from .linalg import DimensionError, dagger, kron, partial_trace, unvec, vec

Dynamics = Callable[[np.ndarray], np.ndarray]


# ---------------- Dynamics builders ----------------

def channel_dynamics(ch: KrausChannel) -> Dynamics:
    return lambda x: apply_channel(ch, x)


def superop_dynamics(phi: np.ndarray) -> Dynamics:
    """Dynamics from a column-stacked superoperator matrix."""
    d = int(round(np.sqrt(phi.shape[0])))
    return lambda x: unvec(phi @ vec(x), d)


def joint_unitary_dynamics(v: np.ndarray, rho_E: np.ndarray) -> Dynamics:
    """X -> Tr_E[ V (X (x) rho_E) V^dag ]."""
    d_E = rho_E.shape[0]
    d_S = v.shape[0] // d_E
    if d_S * d_E != v.shape[0]:
        raise DimensionError(f"joint unitary of side {v.shape[0]} does not factor with d_E = {d_E}")

    def run(x: np.ndarray) -> np.ndarray:
        big = v @ kron(x, rho_E) @ dagger(v)
        return partial_trace(big, [d_S, d_E], keep={0})

    return run


# ---------------- Oracle ----------------

def _default_gauge_state(d_B: int) -> np.ndarray:
    tau = np.zeros((d_B, d_B), dtype=complex)
    tau[0, 0] = 1.0
    return tau


def entanglement_fidelity(
    dynamics: Dynamics,
    dec: SubsystemDecomposition,
    recovery: np.ndarray | None = None,
    dec_out: SubsystemDecomposition | None = None,
    tau: np.ndarray | None = None,
) -> float:
    """Entanglement fidelity of the logical factor after dynamics and a unitary recovery.

    `dec_out` is where the recovery lands (H^A (x) H^B'); defaults to `dec`.
    """
    d_A = dec.d_A
    dec_out = dec if dec_out is None else dec_out
    if dec_out.d_A != d_A or dec_out.d_S != dec.d_S:
        raise DimensionError("input and output decompositions disagree on d_A or d_S")
    tau = _default_gauge_state(dec.d_B) if tau is None else np.asarray(tau, dtype=complex)
    u = np.eye(dec.d_S, dtype=complex) if recovery is None else np.asarray(recovery, dtype=complex)
    ud = dagger(u)
    total = 0.0 + 0.0j
    for r in range(d_A):
        for rp in range(d_A):
            e = np.zeros((d_A, d_A), dtype=complex)
            e[r, rp] = 1.0
            y = u @ dynamics(encode(dec, e, tau)) @ ud
            total += reduce_to_A(dec_out, y)[r, rp]
    return float(np.clip(total.real / d_A**2, 0.0, 1.0))


def leakage(rho, pab: np.ndarray) -> float:
    """1 - Tr(P rho P): weight outside the code block."""
    rho = np.asarray(getattr(rho, "mat", rho), dtype=complex)
    p = np.asarray(pab, dtype=complex)
    return float(1.0 - np.trace(p @ rho @ p).real)


def code_leakage(rho, dec: SubsystemDecomposition) -> float:
    return leakage(rho, projector_AB(dec))


def fidelity_series(
    dynamics: Sequence[Dynamics],
    dec: SubsystemDecomposition,
    recoveries: Sequence[np.ndarray | None],
    outputs: Sequence[SubsystemDecomposition] | SubsystemDecomposition | None = None,
    tau: np.ndarray | None = None,
) -> np.ndarray:
    if len(dynamics) != len(recoveries):
        raise ValueError(f"{len(dynamics)} dynamics for {len(recoveries)} recoveries")
    if outputs is None or isinstance(outputs, SubsystemDecomposition):
        outputs = [outputs] * len(dynamics)
    return np.array([
        entanglement_fidelity(dyn, dec, u, out, tau)
        for dyn, u, out in zip(dynamics, recoveries, outputs)
    ])


def sample_env_states(d_E: int, n: int, rng: np.random.Generator) -> List[EnvironmentState]:
    """Haar-random pure environment states."""
    out = []
    for _ in range(n):
        psi = rng.normal(size=d_E) + 1j * rng.normal(size=d_E)
        out.append(EnvironmentState.pure(psi))
    return out


def env_states_in(basis: np.ndarray, n: int, rng: np.random.Generator) -> List[EnvironmentState]:
    """Random pure states inside span(basis)."""
    basis = np.asarray(basis, dtype=complex)
    out = []
    for _ in range(n):
        c = rng.normal(size=basis.shape[1]) + 1j * rng.normal(size=basis.shape[1])
        out.append(EnvironmentState.pure(basis @ c))
    return out


# ---------------- Summaries ----------------

def summarize_residuals(residuals: Dict[str, Iterable[float]]) -> Dict[str, float]:
    """Per-series max and mean, plus the max/mean of the pointwise worst residual."""
    out: Dict[str, float] = {}
    series = {k: np.asarray(list(v), dtype=float) for k, v in residuals.items()}
    for k, arr in series.items():
        if arr.size == 0:
            continue
        out[f"{k}_max"] = float(np.nanmax(arr))
        out[f"{k}_mean"] = float(np.nanmean(arr))
    if series:
        worst = np.nanmax(np.vstack([a for a in series.values() if a.size]), axis=0)
        out["residual_max"] = float(np.nanmax(worst))
        out["residual_mean"] = float(np.nanmean(worst))
    return out
