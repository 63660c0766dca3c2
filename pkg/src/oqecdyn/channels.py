"""
Kraus channels, the correctability test and constructive recovery.

Contract:
- ``gram_blocks`` compresses every product M_a^dagger M_b onto the code block
  and measures how far it is from I^A (x) g_ab.
- ``build_recovery`` factors the block matrix G = [g_ab] = C^dagger C by
  eigendecomposition (eigenvalues above `rank_tol` define d_B'), embeds the
  recovered block into the maximal decomposition of H^S and finds U by
  Procrustes. It returns a ``RecoveryCertificate`` or a ``NotCorrectable``
  result; only genuine shape errors raise.
- ``kraus_from_unitary`` reads M_(mu,nu) = sqrt(lambda_nu) <mu|V|nu> off a joint
  unitary, mu over the canonical basis of H^E and nu over the support of the
  environment state, (mu, nu) in lexicographic order. Zero operators are dropped.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from .code_space import (
    SubsystemDecomposition,
    maximal_extension,
    trivial_factor_fit,
)
from .linalg import (
    DEFAULT_TOL,
    DimensionError,
    as_cmatrix,
    dagger,
    frobenius,
    kron,
    partial_trace,
    procrustes_unitary,
    unitarity_defect,
)

logger = logging.getLogger(__name__)

_ZERO_OP = 1e-14


# ---------------- Types ----------------

@dataclass(frozen=True, eq=False)
class KrausChannel:
    ops: Tuple[np.ndarray, ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ops = tuple(as_cmatrix(m, f"Kraus operator {k}") for k, m in enumerate(self.ops))
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        for k, m in enumerate(ops):
            if m.shape != (d, d):
                raise DimensionError(f"Kraus operator {k} has shape {m.shape}, expected {(d, d)}")
        object.__setattr__(self, "ops", ops)

    @property
    def dim(self) -> int:
        return int(self.ops[0].shape[0])

    def completeness_residual(self) -> float:
        total = sum(dagger(m) @ m for m in self.ops)
        return frobenius(total - np.eye(self.dim))

    def then(self, u: np.ndarray) -> "KrausChannel":
        """The channel followed by the unitary u."""
        return KrausChannel(tuple(u @ m for m in self.ops), self.labels)


@dataclass(frozen=True, eq=False)
class GramBlocks:
    g: Dict[Tuple[int, int], np.ndarray]
    triviality_residual: float
    n_ops: int
    d_B: int

    def block_matrix(self) -> np.ndarray:
        n, d = self.n_ops, self.d_B
        big = np.zeros((n * d, n * d), dtype=complex)
        for (a, b), blk in self.g.items():
            big[a * d : (a + 1) * d, b * d : (b + 1) * d] = blk
        return big


@dataclass(frozen=True, eq=False)
class RecoveryCertificate:
    u: np.ndarray
    c_ops: Tuple[np.ndarray, ...]
    d_Bprime: int
    residual: float
    gram_residual: float
    recovered: SubsystemDecomposition  # H^A (x) H^B' inside H^S

    def to_dict(self) -> dict:
        return {
            "d_Bprime": self.d_Bprime,
            "residual": self.residual,
            "gram_residual": self.gram_residual,
            "u": self.u,
            "c_ops": list(self.c_ops),
        }


@dataclass(frozen=True)
class NotCorrectable:
    residual: float
    reason: str = "gram blocks are not trivial on A"

    def to_dict(self) -> dict:
        return {"residual": self.residual, "reason": self.reason}


@dataclass(frozen=True, eq=False)
class EnvironmentState:
    """Initial environment: orthonormal vectors (columns) with weights.

    ``weights=None`` is the subspace-only variant; it is treated as the uniform
    mixture over the given basis wherever a state is needed.
    """

    vectors: np.ndarray
    weights: np.ndarray | None = None
    tol: float = DEFAULT_TOL

    def __post_init__(self) -> None:
        v = as_cmatrix(self.vectors, "environment vectors")
        if frobenius(dagger(v) @ v - np.eye(v.shape[1])) > max(self.tol, 1e-9) * 10:
            raise ValueError("environment vectors are not orthonormal")
        object.__setattr__(self, "vectors", v)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.size != v.shape[1]:
                raise DimensionError(f"{w.size} weights for {v.shape[1]} environment vectors")
            if (w < -self.tol).any() or abs(w.sum() - 1.0) > max(self.tol, 1e-9) * 10:
                raise ValueError(f"environment weights must be a probability vector, got {w}")
            object.__setattr__(self, "weights", w)

    @property
    def d_E(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def is_subspace(self) -> bool:
        return self.weights is None

    @property
    def effective_weights(self) -> np.ndarray:
        if self.weights is None:
            r = self.vectors.shape[1]
            return np.full(r, 1.0 / r)
        return self.weights

    def density(self) -> np.ndarray:
        v, w = self.vectors, self.effective_weights
        return (v * w) @ dagger(v)

    @classmethod
    def pure(cls, psi) -> "EnvironmentState":
        psi = np.asarray(psi, dtype=complex).reshape(-1, 1)
        return cls(psi / np.linalg.norm(psi), np.array([1.0]))

    @classmethod
    def maximally_mixed(cls, d_E: int) -> "EnvironmentState":
        return cls(np.eye(d_E, dtype=complex), np.full(d_E, 1.0 / d_E))

    @classmethod
    def subspace(cls, basis) -> "EnvironmentState":
        return cls(as_cmatrix(basis, "environment subspace basis"), None)

    @classmethod
    def from_density(cls, rho, tol: float = DEFAULT_TOL) -> "EnvironmentState":
        """Eigendecomposition of rho, eigenvalues below `tol` dropped."""
        rho = as_cmatrix(rho, "environment state")
        vals, vecs = sla.eigh(0.5 * (rho + dagger(rho)))
        keep = vals > tol
        w = vals[keep] / vals[keep].sum()
        return cls(vecs[:, keep], w)


# ---------------- Operations ----------------

def apply_channel(ch: KrausChannel, rho) -> np.ndarray:
    rho = np.asarray(getattr(rho, "mat", rho), dtype=complex)
    if rho.shape != (ch.dim, ch.dim):
        raise DimensionError(f"state has shape {rho.shape}, channel acts on {ch.dim}")
    return sum(m @ rho @ dagger(m) for m in ch.ops)


def kraus_from_unitary(v, env: EnvironmentState, tol: float = DEFAULT_TOL) -> KrausChannel:
    v = as_cmatrix(v, "joint unitary")
    d_E = env.d_E
    if v.shape[0] != v.shape[1] or v.shape[0] % d_E:
        raise DimensionError(f"joint unitary shape {v.shape} is incompatible with d_E = {d_E}")
    defect = unitarity_defect(v)
    if defect > max(tol, 1e-9) * 10:
        raise ValueError(f"joint evolution is not unitary (defect {defect:.3e})")
    d_S = v.shape[0] // d_E
    v4 = v.reshape(d_S, d_E, d_S, d_E)
    ops: List[np.ndarray] = []
    labels: List[str] = []
    weights = env.effective_weights
    for mu in range(d_E):
        for nu, lam in enumerate(weights):
            if lam <= 0:
                continue
            m = np.sqrt(lam) * np.einsum("ijk,k->ij", v4[:, mu, :, :], env.vectors[:, nu])
            if frobenius(m) <= _ZERO_OP:
                continue
            ops.append(m)
            labels.append(f"{mu},{nu}")
    return KrausChannel(tuple(ops), tuple(labels))


def gram_blocks(ch: KrausChannel, dec: SubsystemDecomposition) -> GramBlocks:
    if ch.dim != dec.d_S:
        raise DimensionError(f"channel acts on {ch.dim} dims, decomposition has d_S = {dec.d_S}")
    images = [m @ dec.iso for m in ch.ops]
    g: Dict[Tuple[int, int], np.ndarray] = {}
    worst = 0.0
    n = len(images)
    for a in range(n):
        for b in range(a, n):
            x = dagger(images[a]) @ images[b]
            blk, res = trivial_factor_fit(x, dec.d_A)
            worst = max(worst, frobenius(res))
            g[(a, b)] = blk
            if a != b:
                g[(b, a)] = dagger(blk)
    return GramBlocks(g, worst, n, dec.d_B)


def factor_gram(gb: GramBlocks, rank_tol: float = DEFAULT_TOL) -> Tuple[np.ndarray, ...]:
    """Blocks C_a (k x d_B) with C_a^dagger C_b = g_ab, k = number of eigenvalues above rank_tol."""
    big = gb.block_matrix()
    vals, vecs = sla.eigh(0.5 * (big + dagger(big)))
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > rank_tol
    k = int(keep.sum())
    logger.info(
        "gram factorization: rank %d (threshold %.1e, smallest kept %.3e, largest dropped %.3e)",
        k, rank_tol,
        float(vals[keep][-1]) if k else float("nan"),
        float(vals[~keep][0]) if k < vals.size else float("nan"),
    )
    stacked = np.sqrt(vals[keep])[:, None] * dagger(vecs[:, keep])
    d = gb.d_B
    return tuple(stacked[:, a * d : (a + 1) * d] for a in range(gb.n_ops))


def build_recovery(
    ch: KrausChannel,
    dec: SubsystemDecomposition,
    tol: float = DEFAULT_TOL,
    rank_tol: float | None = None,
) -> RecoveryCertificate | NotCorrectable:
    gb = gram_blocks(ch, dec)
    if gb.triviality_residual > tol:
        logger.info("not correctable: gram residual %.3e > %.1e", gb.triviality_residual, tol)
        return NotCorrectable(gb.triviality_residual)

    c_ops = factor_gram(gb, tol if rank_tol is None else rank_tol)
    k = c_ops[0].shape[0]
    d_Bprime = max(k, dec.d_B)
    if d_Bprime > dec.max_gauge_dim:
        return NotCorrectable(
            gb.triviality_residual,
            f"recovered gauge dimension {d_Bprime} exceeds floor(d_S/d_A) = {dec.max_gauge_dim}",
        )
    if k < d_Bprime:
        pad = np.zeros((d_Bprime - k, dec.d_B), dtype=complex)
        c_ops = tuple(np.vstack([c, pad]) for c in c_ops)

    recovered = maximal_extension(dec, d_Bprime)
    eye_a = np.eye(dec.d_A)
    source = np.hstack([m @ dec.iso for m in ch.ops])
    target = np.hstack([recovered.iso @ kron(eye_a, c) for c in c_ops])
    u, _ = procrustes_unitary(source, target)

    residual = max(
        frobenius(m @ dec.iso - dagger(u) @ recovered.iso @ kron(eye_a, c))
        for m, c in zip(ch.ops, c_ops)
    )
    logger.info("recovery certificate: d_Bprime=%d residual=%.3e", d_Bprime, residual)
    return RecoveryCertificate(u, c_ops, d_Bprime, residual, gb.triviality_residual, recovered)


def recovery_residual(
    ch: KrausChannel,
    dec: SubsystemDecomposition,
    recovered: SubsystemDecomposition,
    u: np.ndarray,
) -> float:
    """How far u is from an admissible recovery into `recovered` (H^A (x) H^B').

    Zero iff every u M_a J equals J' (I^A (x) C_a) for some C_a.
    """
    worst = 0.0
    for m in ch.ops:
        y = u @ m @ dec.iso
        z = dagger(recovered.iso) @ y
        _, res = trivial_factor_fit(z, dec.d_A)
        leak = y - recovered.iso @ z
        worst = max(worst, float(np.hypot(frobenius(res), frobenius(leak))))
    return worst


def classify_channel(
    ch: KrausChannel, dec: SubsystemDecomposition, tol: float = DEFAULT_TOL
) -> Tuple[str, RecoveryCertificate | NotCorrectable]:
    """Strongest of NOISELESS, UNITARILY_CORRECTABLE, UNITARILY_RECOVERABLE, NOT_CORRECTABLE."""
    outcome = build_recovery(ch, dec, tol)
    if isinstance(outcome, NotCorrectable):
        return "NOT_CORRECTABLE", outcome
    # noiseless: P M_a P = I (x) C_a with sum C_a^dagger C_a = I_B, no recovery at all
    fits = [trivial_factor_fit(dagger(dec.iso) @ m @ dec.iso, dec.d_A) for m in ch.ops]
    total = sum(dagger(c) @ c for c, _ in fits)
    if max(frobenius(r) for _, r in fits) <= tol and frobenius(total - np.eye(dec.d_B)) <= tol:
        return "NOISELESS", outcome
    if outcome.d_Bprime == dec.d_B:
        return "UNITARILY_CORRECTABLE", outcome
    return "UNITARILY_RECOVERABLE", outcome
