"""
Dense complex matrix kernel shared by every other module.

Contract:
- Matrices are plain 2-D ``numpy`` arrays of dtype complex128.
- Tensor products use the standard Kronecker ordering: block (i, j) of
  ``kron(a, b)`` is ``a[i, j] * b``; the first factor is the most significant
  index.
- Vectorization is column stacking: ``vec(x)`` stacks the columns of ``x`` top to
  bottom, so ``vec(L @ rho @ R) = kron(R.T, L) @ vec(rho)``.
- Matrix exponentials use ``scipy.linalg.expm`` (Pade approximation with scaling
  and squaring).
- All functions are pure; inputs are never modified.
"""
from __future__ import annotations

import logging
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
# Largest matrix side any kernel routine will build (64-dim joint spaces give
# 4096-dim superoperators).
MAX_DIM = 4096


class DimensionError(ValueError):
    """Shape mismatch or a product space larger than MAX_DIM."""


# ---------------- Validation ----------------

def as_cmatrix(x, name: str = "matrix") -> np.ndarray:
    """Return `x` as a finite 2-D complex array."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _square(x, name: str) -> np.ndarray:
    arr = as_cmatrix(x, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(x)).T


def frobenius(x: np.ndarray) -> float:
    return float(np.linalg.norm(x, "fro"))


def hermitian_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dagger(x))


def is_hermitian(x: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    x = np.asarray(x)
    return x.shape[0] == x.shape[1] and frobenius(x - dagger(x)) <= tol


def unitarity_defect(x: np.ndarray) -> float:
    x = np.asarray(x)
    return frobenius(dagger(x) @ x - np.eye(x.shape[1]))


def is_unitary(x: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    x = np.asarray(x)
    return x.shape[0] == x.shape[1] and unitarity_defect(x) <= tol


# ---------------- Tensor structure ----------------

def kron(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    a = as_cmatrix(a, "kron left factor")
    b = as_cmatrix(b, "kron right factor")
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise DimensionError(
            f"kron result {rows}x{cols} exceeds the configured maximum {max_dim}"
        )
    return np.kron(a, b)


def kron_all(*ops, max_dim: int = MAX_DIM) -> np.ndarray:
    if not ops:
        return np.eye(1, dtype=complex)
    out = as_cmatrix(ops[0])
    for op in ops[1:]:
        out = kron(out, op, max_dim=max_dim)
    return out


def partial_trace(x, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor of `dims` not listed in `keep`.

    Kept factors stay in their original order. Keeping nothing returns the
    scalar trace as a 1x1 matrix.
    """
    x = _square(x, "partial_trace input")
    dims = [int(d) for d in dims]
    if any(d <= 0 for d in dims):
        raise DimensionError(f"factor dims must be positive, got {dims}")
    if int(np.prod(dims)) != x.shape[0]:
        raise DimensionError(
            f"factor dims {dims} (product {int(np.prod(dims))}) do not match "
            f"matrix side {x.shape[0]}"
        )
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} factors")

    t = x.reshape(dims + dims)
    in_idx = list(range(2 * n))
    for j in range(n):
        if j not in keep:
            in_idx[n + j] = j  # contract bra with ket
    out_idx = keep + [n + k for k in keep]
    reduced = np.einsum(t, in_idx, out_idx)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.asarray(reduced).reshape(dk, dk)


# ---------------- Exponentials ----------------

def matrix_exp(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    """exp(a) by Pade scaling-and-squaring (scipy.linalg.expm)."""
    a = _square(a, "matrix_exp input")
    out = sla.expm(a)
    if not np.isfinite(out).all():
        raise ValueError(f"matrix_exp overflowed (norm {np.linalg.norm(a):.3g}, tol {tol:g})")
    return out


def time_ordered_exp(
    schedule: Sequence[Tuple[np.ndarray, float]],
    substeps: int = 1,
    tol: float = DEFAULT_TOL,
    check_antihermitian: bool = True,
) -> np.ndarray:
    """Ordered product of segment exponentials; later segments act on the left.

    Each entry is (generator, duration). With `check_antihermitian` the
    generators must represent -iH, i.e. satisfy g + g^dagger = 0 to `tol`.
    """
    if not schedule:
        raise ValueError("time_ordered_exp: empty schedule")
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    out = None
    for k, (gen, dur) in enumerate(schedule):
        g = _square(gen, f"segment {k} generator")
        if dur <= 0:
            raise ValueError(f"segment {k}: duration must be > 0, got {dur}")
        if check_antihermitian and frobenius(g + dagger(g)) > tol * max(1.0, frobenius(g)):
            raise ValueError(f"segment {k}: generator is not anti-Hermitian")
        if out is None:
            out = np.eye(g.shape[0], dtype=complex)
        elif out.shape != g.shape:
            raise DimensionError(f"segment {k}: generator shape {g.shape} != {out.shape}")
        step = matrix_exp(g * (dur / substeps), tol)
        out = np.linalg.matrix_power(step, substeps) @ out
    return out


# ---------------- Factorizations ----------------

def gram_schmidt_complete(basis: np.ndarray, n: int | None = None, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal columns spanning the complement of `basis`.

    Candidates are the canonical basis vectors e_0, e_1, ... in index order, so
    the completion is deterministic.
    """
    basis = np.asarray(basis, dtype=complex)
    n = basis.shape[0] if n is None else n
    cols: List[np.ndarray] = [basis[:, j] for j in range(basis.shape[1])]
    extra: List[np.ndarray] = []
    target = n - len(cols)
    for i in range(n):
        if len(extra) >= target:
            break
        v = np.zeros(n, dtype=complex)
        v[i] = 1.0
        for _ in range(2):  # re-orthogonalize once
            for c in cols + extra:
                v = v - c * np.vdot(c, v)
        nv = np.linalg.norm(v)
        if nv > tol:
            extra.append(v / nv)
    if not extra:
        return np.zeros((n, 0), dtype=complex)
    return np.stack(extra, axis=1)


def procrustes_unitary(a, b, rank_tol: float = 1e-10) -> Tuple[np.ndarray, float]:
    """Unitary u minimizing ||u a - b||_F.

    u is the polar unitary factor of b a^dagger. When b a^dagger is rank
    deficient the partial isometry on its support is completed by mapping the
    Gram-Schmidt complement of the domain onto the Gram-Schmidt complement of
    the range.
    """
    a = as_cmatrix(a, "procrustes a")
    b = as_cmatrix(b, "procrustes b")
    if a.shape != b.shape:
        raise DimensionError(f"procrustes shapes differ: {a.shape} vs {b.shape}")
    m = b @ dagger(a)
    w, s, vh = sla.svd(m)
    scale = max(1.0, float(s[0])) if s.size else 1.0
    r = int(np.sum(s > rank_tol * scale))
    w_r, v_r = w[:, :r], dagger(vh)[:, :r]
    u = w_r @ dagger(v_r)
    if r < m.shape[0]:
        logger.debug("procrustes: rank %d < %d, completing null space", r, m.shape[0])
        u = u + gram_schmidt_complete(w_r) @ dagger(gram_schmidt_complete(v_r))
    return u, frobenius(u @ a - b)


def polar_unitary(x) -> np.ndarray:
    """Unitary factor of the right polar decomposition x = u p."""
    u, _ = sla.polar(as_cmatrix(x, "polar input"), side="right")
    return u


# ---------------- Vectorization ----------------

def vec(x) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(x, dtype=complex).reshape(-1, order="F")


def unvec(v, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    v = np.asarray(v, dtype=complex)
    if v.size != rows * cols:
        raise DimensionError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def superop_matrix(left, right) -> np.ndarray:
    """Matrix S with S @ vec(rho) = vec(left @ rho @ right)."""
    left = as_cmatrix(left, "superop left")
    right = as_cmatrix(right, "superop right")
    return kron(right.T, left)


# ---------------- Misc helpers ----------------

def hermitian_basis(d: int) -> List[np.ndarray]:
    """Generalized Gell-Mann basis of d x d Hermitian matrices, orthonormal in
    the Hilbert-Schmidt inner product; the last element is I/sqrt(d)."""
    out: List[np.ndarray] = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            out.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[j, k] = -1j / np.sqrt(2)
            a[k, j] = 1j / np.sqrt(2)
            out.append(a)
    for l in range(1, d):
        diag = np.zeros(d, dtype=complex)
        diag[:l] = 1.0
        diag[l] = -l
        out.append(np.diag(diag) / np.sqrt(l * (l + 1)))
    out.append(np.eye(d, dtype=complex) / np.sqrt(d))
    return out


def trace_distance(a, b) -> float:
    diff = hermitian_part(np.asarray(a) - np.asarray(b))
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "0": np.array([[1, 0], [0, 0]], dtype=complex),
    "1": np.array([[0, 0], [0, 1]], dtype=complex),
    "-": np.array([[0, 1], [0, 0]], dtype=complex),  # |0><1|, lowers |1> to |0>
    "+": np.array([[0, 0], [1, 0]], dtype=complex),  # |1><0|
}


def pauli_string(label: str) -> np.ndarray:
    """Tensor product of single-qubit operators named by characters of `label`."""
    try:
        return kron_all(*[PAULI[ch] for ch in label])
    except KeyError as e:
        raise ValueError(f"unknown operator character {e.args[0]!r} in {label!r}") from None
