"""
Subsystem code geometry: H^S = H^A (x) H^B (+) K.

A decomposition is stored as an isometry J (d_S x d_A*d_B). Column a*d_B + b of
J is the image of |a>|b>, i.e. the A index is the most significant one, matching
``kron(rho_A, tau_B)``.

Contract:
- ``projector_AB`` returns J J^dagger; ``projector_K`` its complement.
- ``encode`` embeds rho (x) tau; ``reduce_to_A`` compresses onto the code block
  and traces out B. Both are linear and work on arbitrary (even non-Hermitian)
  operators so they can be reused by the fidelity oracle.
- ``expand_gauge`` appends gauge levels without moving existing code vectors.
- ``trivial_factor_fit`` is the shared "nearest I^A (x) C" projection used by
  every condition residual in the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    DimensionError,
    as_cmatrix,
    dagger,
    frobenius,
    gram_schmidt_complete,
    kron,
    partial_trace,
)


class CapacityError(ValueError):
    """Requested gauge dimension does not fit: d_A * d_B > d_S."""


# ---------------- Types ----------------

@dataclass(frozen=True, eq=False)
class SubsystemDecomposition:
    d_A: int
    d_B: int
    iso: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self) -> None:
        iso = as_cmatrix(self.iso, "decomposition isometry").copy()
        if self.d_A < 1 or self.d_B < 1:
            raise DimensionError(f"d_A and d_B must be >= 1, got {self.d_A}, {self.d_B}")
        if iso.shape[1] != self.d_A * self.d_B:
            raise DimensionError(
                f"isometry has {iso.shape[1]} columns, expected d_A*d_B = {self.d_A * self.d_B}"
            )
        if iso.shape[0] < iso.shape[1]:
            raise CapacityError(
                f"d_A*d_B = {iso.shape[1]} exceeds d_S = {iso.shape[0]}"
            )
        defect = frobenius(dagger(iso) @ iso - np.eye(iso.shape[1]))
        if defect > max(self.tol, 1e-9) * 10:
            raise ValueError(f"isometry columns are not orthonormal (defect {defect:.3e})")
        iso.setflags(write=False)
        object.__setattr__(self, "iso", iso)

    @property
    def d_S(self) -> int:
        return int(self.iso.shape[0])

    @property
    def d_K(self) -> int:
        return self.d_S - self.d_A * self.d_B

    @property
    def max_gauge_dim(self) -> int:
        return self.d_S // self.d_A

    @classmethod
    def canonical(cls, d_A: int, d_B: int, d_S: int, tol: float = DEFAULT_TOL) -> "SubsystemDecomposition":
        """J = first d_A*d_B columns of the identity."""
        if d_A * d_B > d_S:
            raise CapacityError(f"d_A*d_B = {d_A * d_B} exceeds d_S = {d_S}")
        return cls(d_A, d_B, np.eye(d_S, dtype=complex)[:, : d_A * d_B], tol)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density operator: Hermitian, unit trace, eigenvalues >= floor."""

    mat: np.ndarray
    tol: float = DEFAULT_TOL
    floor: float = -1e-8

    def __post_init__(self) -> None:
        m = as_cmatrix(self.mat, "density matrix")
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        scale = max(1.0, frobenius(m))
        if frobenius(m - dagger(m)) > self.tol * scale:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > max(self.tol, 1e-8):
            raise ValueError(f"density matrix trace is {tr.real:.6g}, expected 1")
        if self.min_eigenvalue_of(m) < self.floor:
            raise ValueError(
                f"density matrix has eigenvalue {self.min_eigenvalue_of(m):.3e} below {self.floor:g}"
            )
        object.__setattr__(self, "mat", m)

    @staticmethod
    def min_eigenvalue_of(m: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(0.5 * (m + dagger(m)))[0])

    @property
    def min_eigenvalue(self) -> float:
        return self.min_eigenvalue_of(self.mat)

    @property
    def dim(self) -> int:
        return int(self.mat.shape[0])


def _raw(x) -> np.ndarray:
    return x.mat if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


# ---------------- Projectors, encode / reduce ----------------

def projector_AB(dec: SubsystemDecomposition) -> np.ndarray:
    return dec.iso @ dagger(dec.iso)


def projector_K(dec: SubsystemDecomposition) -> np.ndarray:
    return np.eye(dec.d_S, dtype=complex) - projector_AB(dec)


def encode(dec: SubsystemDecomposition, rho_A, tau_B) -> np.ndarray:
    """J (rho (x) tau) J^dagger."""
    rho, tau = _raw(rho_A), _raw(tau_B)
    if rho.shape != (dec.d_A, dec.d_A):
        raise DimensionError(f"rho_A has shape {rho.shape}, expected {(dec.d_A, dec.d_A)}")
    if tau.shape != (dec.d_B, dec.d_B):
        raise DimensionError(f"tau_B has shape {tau.shape}, expected {(dec.d_B, dec.d_B)}")
    return dec.iso @ kron(rho, tau) @ dagger(dec.iso)


def reduce_to_A(dec: SubsystemDecomposition, sigma) -> np.ndarray:
    """Tr_B of the code-block compression J^dagger sigma J."""
    s = _raw(sigma)
    if s.shape != (dec.d_S, dec.d_S):
        raise DimensionError(f"sigma has shape {s.shape}, expected {(dec.d_S, dec.d_S)}")
    return partial_trace(dagger(dec.iso) @ s @ dec.iso, [dec.d_A, dec.d_B], keep={0})


# ---------------- Trivial-on-A fits ----------------

def trivial_factor_fit(z: np.ndarray, d_A: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest I^A (x) C to a (d_A*m) x (d_A*n) matrix, in Frobenius norm.

    Returns (C, z - I^A (x) C). C is the average of the d_A diagonal blocks.
    """
    z = np.asarray(z, dtype=complex)
    rows, cols = z.shape
    if rows % d_A or cols % d_A:
        raise DimensionError(f"shape {z.shape} is not divisible by d_A = {d_A}")
    m, n = rows // d_A, cols // d_A
    blocks = z.reshape(d_A, m, d_A, n)
    c = np.einsum("aiaj->ij", blocks) / d_A
    return c, z - kron(np.eye(d_A), c)


def code_fit(op: np.ndarray, dec: SubsystemDecomposition) -> Tuple[np.ndarray, float, float]:
    """Split ||op J - J (I^A (x) C)|| into the in-code A-action part and leakage.

    Returns (C, action_residual, leakage) with C the best d_B x d_B fit.
    """
    y = np.asarray(op, dtype=complex) @ dec.iso
    z = dagger(dec.iso) @ y
    c, res = trivial_factor_fit(z, dec.d_A)
    leak = y - dec.iso @ z
    return c, frobenius(res), frobenius(leak)


# ---------------- Gauge bookkeeping ----------------

def expand_gauge(dec: SubsystemDecomposition, new_B_vectors) -> SubsystemDecomposition:
    """Append k gauge levels.

    `new_B_vectors` has d_A*k columns; column a*k + j is the image of |a>|d_B + j>.
    The new isometry agrees with the old one on the old levels.
    """
    new = np.asarray(new_B_vectors, dtype=complex)
    if new.ndim != 2 or new.shape[0] != dec.d_S:
        raise DimensionError(f"new gauge vectors must have {dec.d_S} rows, got shape {new.shape}")
    if new.shape[1] == 0:
        return dec
    if new.shape[1] % dec.d_A:
        raise DimensionError(
            f"number of new vectors ({new.shape[1]}) must be a multiple of d_A = {dec.d_A}"
        )
    k = new.shape[1] // dec.d_A
    if dec.d_A * (dec.d_B + k) > dec.d_S:
        raise CapacityError(
            f"gauge expansion to d_B = {dec.d_B + k} needs {dec.d_A * (dec.d_B + k)} "
            f"dimensions but d_S = {dec.d_S}"
        )
    tol = max(dec.tol, 1e-9) * 10
    if frobenius(dagger(new) @ new - np.eye(new.shape[1])) > tol:
        raise ValueError("new gauge vectors are not orthonormal")
    if frobenius(dagger(dec.iso) @ new) > tol:
        raise ValueError("new gauge vectors are not orthogonal to the current code block")

    d_B2 = dec.d_B + k
    iso = np.zeros((dec.d_S, dec.d_A * d_B2), dtype=complex)
    for a in range(dec.d_A):
        iso[:, a * d_B2 : a * d_B2 + dec.d_B] = dec.iso[:, a * dec.d_B : (a + 1) * dec.d_B]
        iso[:, a * d_B2 + dec.d_B : (a + 1) * d_B2] = new[:, a * k : (a + 1) * k]
    return SubsystemDecomposition(dec.d_A, d_B2, iso, dec.tol)


def gauge_level_vectors(dec: SubsystemDecomposition, levels) -> np.ndarray:
    """Columns of J for the given gauge levels, ordered a*k + j (expand_gauge layout)."""
    levels = list(levels)
    cols = [a * dec.d_B + b for a in range(dec.d_A) for b in levels]
    return dec.iso[:, cols]


def restrict_gauge(dec: SubsystemDecomposition, d_B: int) -> SubsystemDecomposition:
    """Keep only the first d_B gauge levels."""
    if not 1 <= d_B <= dec.d_B:
        raise DimensionError(f"cannot restrict d_B = {dec.d_B} to {d_B}")
    return SubsystemDecomposition(dec.d_A, d_B, gauge_level_vectors(dec, range(d_B)), dec.tol)


def maximal_extension(dec: SubsystemDecomposition, d_Bprime: int | None = None) -> SubsystemDecomposition:
    """H^S = H^A (x) H^B' (+) K' with H^B' containing H^B.

    Extra levels are built from the Gram-Schmidt complement of the code block
    over the canonical basis; complement vector number a*k + j becomes level
    d_B + j of A-index a. Default d_B' is floor(d_S / d_A).
    """
    target = dec.max_gauge_dim if d_Bprime is None else int(d_Bprime)
    if target < dec.d_B:
        raise DimensionError(f"d_Bprime = {target} is smaller than d_B = {dec.d_B}")
    if dec.d_A * target > dec.d_S:
        raise CapacityError(f"d_A*d_Bprime = {dec.d_A * target} exceeds d_S = {dec.d_S}")
    k = target - dec.d_B
    if k == 0:
        return dec
    comp = gram_schmidt_complete(dec.iso)[:, : dec.d_A * k]
    return expand_gauge(dec, comp)


def product_decomposition(d_A: int, gauge_basis, tol: float = DEFAULT_TOL) -> SubsystemDecomposition:
    """Subsystem code J = I_A (x) G for H^S = H^A (x) H^R, G: d_R x d_B isometry."""
    g = as_cmatrix(gauge_basis, "gauge basis")
    return SubsystemDecomposition(d_A, g.shape[1], kron(np.eye(d_A), g), tol)
