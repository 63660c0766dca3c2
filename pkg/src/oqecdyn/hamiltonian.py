"""
Joint system-environment Hamiltonian dynamics.

    H_SE(t) = H_S(t) (x) I_E + I_S (x) H_E(t) + sum_j S_j(t) (x) E_j(t)

Joint operators are ordered system first: index = s * d_E + e.

Three kinds of check live here:
- ``thm4_track``: unitary correctability along the evolution, with the recovery
  frame driven by the system Hamiltonian only, U^dagger(t) = T exp(-i int H_S).
- ``thm5_track``: unitary recoverability along the evolution through the double
  frame (U on the system, W on the gauge-environment block). Each step solves a
  least-squares problem for H', picks H'' from the closed formula, and advances
  both frames with RK4. The environment may be restricted to a subspace H^{E0},
  and W may live on H^{B'} (x) H^E or on H^B (x) H^E.
- ``thm8_check``: correctability at a single moment T from the Kraus set of
  V_SE(T); nothing before T is inspected.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg as sla

from .channels import (
    EnvironmentState,
    NotCorrectable,
    RecoveryCertificate,
    build_recovery,
    kraus_from_unitary,
)
from .code_space import SubsystemDecomposition, maximal_extension, trivial_factor_fit
from .linalg import (
    DEFAULT_TOL,
    DimensionError,
    as_cmatrix,
    dagger,
    frobenius,
    hermitian_basis,
    hermitian_part,
    kron,
    matrix_exp,
    time_ordered_exp,
)
from .markovian import (
    UNITARITY_DRIFT_LIMIT,
    FrameTrajectory,
    ScheduleMixin,
    _n_steps,
    _reunitarize,
    _validate_grid,
)

logger = logging.getLogger(__name__)


# ---------------- Model ----------------

def _herm(x, name: str, d: int) -> np.ndarray:
    m = as_cmatrix(x, name)
    if m.shape != (d, d):
        raise DimensionError(f"{name} has shape {m.shape}, expected {(d, d)}")
    if frobenius(m - dagger(m)) > DEFAULT_TOL * max(1.0, frobenius(m)):
        raise ValueError(f"{name} is not Hermitian")
    return m


@dataclass(frozen=True, eq=False)
class HamiltonianSegment:
    duration: float
    h_s: np.ndarray
    h_e: np.ndarray
    interactions: Tuple[Tuple[np.ndarray, np.ndarray], ...] = ()

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError(f"segment duration must be > 0, got {self.duration}")
        d_S = np.asarray(self.h_s).shape[0]
        d_E = np.asarray(self.h_e).shape[0]
        object.__setattr__(self, "h_s", _herm(self.h_s, "H_S", d_S))
        object.__setattr__(self, "h_e", _herm(self.h_e, "H_E", d_E))
        terms = tuple(
            (_herm(s, f"S[{j}]", d_S), _herm(e, f"E[{j}]", d_E))
            for j, (s, e) in enumerate(self.interactions)
        )
        object.__setattr__(self, "interactions", terms)

    @cached_property
    def h_se(self) -> np.ndarray:
        d_S, d_E = self.h_s.shape[0], self.h_e.shape[0]
        out = kron(self.h_s, np.eye(d_E)) + kron(np.eye(d_S), self.h_e)
        for s, e in self.interactions:
            out = out + kron(s, e)
        return out


@dataclass(frozen=True, eq=False)
class HamiltonianModel(ScheduleMixin):
    d_S: int
    d_E: int
    segments: Tuple[HamiltonianSegment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("a Hamiltonian model needs at least one segment")
        for k, seg in enumerate(self.segments):
            if seg.h_s.shape[0] != self.d_S or seg.h_e.shape[0] != self.d_E:
                raise DimensionError(
                    f"segment {k}: dims ({seg.h_s.shape[0]}, {seg.h_e.shape[0]}) "
                    f"do not match (d_S, d_E) = ({self.d_S}, {self.d_E})"
                )
        object.__setattr__(self, "segments", tuple(self.segments))


@dataclass(frozen=True, eq=False)
class EnvSubspace:
    iso_E: np.ndarray

    def __post_init__(self) -> None:
        v = as_cmatrix(self.iso_E, "environment subspace")
        if frobenius(dagger(v) @ v - np.eye(v.shape[1])) > 1e-8:
            raise ValueError("environment subspace basis is not orthonormal")
        object.__setattr__(self, "iso_E", v)

    @classmethod
    def full(cls, d_E: int) -> "EnvSubspace":
        return cls(np.eye(d_E, dtype=complex))

    @property
    def d_E(self) -> int:
        return int(self.iso_E.shape[0])

    @property
    def d_E0(self) -> int:
        return int(self.iso_E.shape[1])

    @property
    def is_full(self) -> bool:
        return self.d_E0 == self.d_E

    def as_state(self) -> EnvironmentState:
        return EnvironmentState.subspace(self.iso_E)


def assemble_HSE(model: HamiltonianModel, t: float) -> np.ndarray:
    return model.segment_at(t).h_se


def full_propagator(model: HamiltonianModel, T: float, substeps: int = 1) -> np.ndarray:
    """V_SE(T) = T exp(-i int_0^T H_SE)."""
    pieces = model.pieces(0.0, T)
    if not pieces:
        return np.eye(model.d_S * model.d_E, dtype=complex)
    return time_ordered_exp([(-1j * model.segments[k].h_se, dur) for k, dur in pieces], substeps)


def propagators_on_grid(model: HamiltonianModel, grid: Sequence[float], system_only: bool = False) -> List[np.ndarray]:
    """Cumulative propagators from 0 to each grid time (of H_SE, or of H_S alone)."""
    g = _validate_grid(model, grid)
    d = model.d_S if system_only else model.d_S * model.d_E
    v = np.eye(d, dtype=complex)
    out: List[np.ndarray] = []
    t_prev = 0.0
    for t in g:
        for k, dur in model.pieces(t_prev, float(t)):
            seg = model.segments[k]
            v = matrix_exp(-1j * (seg.h_s if system_only else seg.h_se) * dur) @ v
        out.append(v.copy())
        t_prev = float(t)
    return out


# ---------------- Unitary correctability ----------------

def thm4_track(
    model: HamiltonianModel,
    dec: SubsystemDecomposition,
    grid: Sequence[float],
    tol: float = DEFAULT_TOL,
) -> FrameTrajectory:
    """Recovery frame U(t) = (T exp(-i int H_S))^dagger with H' = -H~_S.

    r_S: max over interaction terms of ||S~_j J - J (I^A (x) C_j)||, C_j into the code.
    r_H: the same distance for H~_S + H' (zero by construction).
    """
    if dec.d_S != model.d_S:
        raise DimensionError(f"decomposition has d_S = {dec.d_S}, model has {model.d_S}")
    g = _validate_grid(model, grid)
    vs = propagators_on_grid(model, g, system_only=True)
    us: List[np.ndarray] = []
    hps: List[np.ndarray] = []
    r_s: List[float] = []
    r_h: List[float] = []
    for t, v in zip(g, vs):
        u = dagger(v)
        seg = model.segment_at(float(t))
        h_t = u @ seg.h_s @ v
        hp = -h_t
        worst = 0.0
        for s, _ in seg.interactions:
            worst = max(worst, _into_code_distance(u @ s @ v, dec))
        us.append(u)
        hps.append(hp)
        r_s.append(worst)
        r_h.append(_into_code_distance(h_t + hp, dec))
    traj = FrameTrajectory(
        g, us, hps, {"r_S": np.asarray(r_s), "r_H": np.asarray(r_h)},
        np.full(len(g), dec.d_B), [dec] * len(g),
    )
    if traj.max_residual > tol:
        traj.verdict = "NOT_CORRECTABLE"
        traj.reason = f"max residual {traj.max_residual:.3e} exceeds tol {tol:g}"
    logger.info("unitary correctability: %s (max residual %.3e)", traj.verdict, traj.max_residual)
    return traj


def _into_code_distance(op: np.ndarray, dec: SubsystemDecomposition) -> float:
    y = op @ dec.iso
    z = dagger(dec.iso) @ y
    _, res = trivial_factor_fit(z, dec.d_A)
    return float(np.hypot(frobenius(res), frobenius(y - dec.iso @ z)))


# ---------------- Double frame ----------------

@dataclass(frozen=True, eq=False)
class FrameGeometry:
    """Fixed subspaces of the double-frame construction.

    code_env: H^A (x) H^B (x) H^E0 inside H^S (x) H^E, columns ordered (a, b, e0).
    w_iso: the block W acts on, H^A (x) H^W (x) H^E with H^W = H^B' or H^B.
    """

    dec: SubsystemDecomposition
    ambient: SubsystemDecomposition
    env: EnvSubspace
    w_support: str = "Bprime"

    def __post_init__(self) -> None:
        if self.w_support not in ("Bprime", "B"):
            raise ValueError(f"w_support must be 'Bprime' or 'B', got {self.w_support!r}")

    @classmethod
    def build(
        cls,
        dec: SubsystemDecomposition,
        env: EnvSubspace,
        w_support: str = "Bprime",
        ambient: SubsystemDecomposition | None = None,
    ) -> "FrameGeometry":
        return cls(dec, maximal_extension(dec) if ambient is None else ambient, env, w_support)

    @property
    def d_E(self) -> int:
        return self.env.d_E

    @property
    def d_A(self) -> int:
        return self.dec.d_A

    @property
    def w_dec(self) -> SubsystemDecomposition:
        return self.ambient if self.w_support == "Bprime" else self.dec

    @property
    def d_Bprime(self) -> int:
        return self.w_dec.d_B

    @property
    def w_dim(self) -> int:
        return self.w_dec.d_B * self.d_E

    @cached_property
    def code_env(self) -> np.ndarray:
        return kron(self.dec.iso, self.env.iso_E)

    @cached_property
    def w_iso(self) -> np.ndarray:
        return kron(self.w_dec.iso, np.eye(self.d_E))

    @cached_property
    def p_code(self) -> np.ndarray:
        return self.code_env @ dagger(self.code_env)

    def embed_block(self, h: np.ndarray) -> np.ndarray:
        """w_iso (I^A (x) h) w_iso^dagger."""
        return self.w_iso @ kron(np.eye(self.d_A), h) @ dagger(self.w_iso)

    def embed_w(self, w: np.ndarray) -> np.ndarray:
        """I^A (x) W on the block, identity elsewhere."""
        n = self.w_iso.shape[0]
        return self.embed_block(w) + np.eye(n) - self.w_iso @ dagger(self.w_iso)


def _condition_vector(y: np.ndarray, out_iso: np.ndarray, d_A: int) -> np.ndarray:
    """Linear residual of 'y = out_iso (I^A (x) F) for some F', as a real vector."""
    z = dagger(out_iso) @ y
    _, res = trivial_factor_fit(z, d_A)
    leak = y - out_iso @ z
    flat = np.concatenate([leak.ravel(), res.ravel()])
    return np.concatenate([flat.real, flat.imag])


@dataclass(frozen=True, eq=False)
class HPrimeSolution:
    hprime: np.ndarray
    f: np.ndarray
    residual: float
    coeffs: np.ndarray


@dataclass(frozen=True, eq=False)
class HppSolution:
    hpp: np.ndarray
    projection_residual: float
    hamcond_residual: float
    d: np.ndarray


def solve_hprime(
    frame_h: np.ndarray,
    geom: FrameGeometry,
    w: np.ndarray | None = None,
    previous: np.ndarray | None = None,
) -> HPrimeSolution:
    """Least squares for Hermitian H' on the system so that
    (frame_h + W^(H' (x) I_E)W^dagger) restricted to the code-environment block
    equals I^A (x) F on the W block.

    H' is expanded in the generalized Gell-Mann basis; the update relative to
    `previous` coefficients is the minimum-norm least-squares solution.
    """
    d_S, d_E = geom.dec.d_S, geom.d_E
    w = np.eye(geom.w_dim, dtype=complex) if w is None else w
    w_hat = geom.embed_w(w)
    c0 = dagger(w_hat) @ geom.code_env
    basis = hermitian_basis(d_S)
    eye_e = np.eye(d_E)
    cols = [
        _condition_vector(w_hat @ (kron(b, eye_e) @ c0), geom.w_iso, geom.d_A) for b in basis
    ]
    a_mat = np.stack(cols, axis=1)
    rhs = -_condition_vector(frame_h @ geom.code_env, geom.w_iso, geom.d_A)
    x0 = np.zeros(len(basis)) if previous is None else np.asarray(previous, dtype=float)
    delta = sla.lstsq(a_mat, rhs - a_mat @ x0)[0]
    x = x0 + delta
    residual = float(np.linalg.norm(a_mat @ x - rhs))
    hprime = hermitian_part(sum(c * b for c, b in zip(x, basis)))
    total = frame_h + w_hat @ kron(hprime, eye_e) @ dagger(w_hat)
    f, _ = trivial_factor_fit(dagger(geom.w_iso) @ total @ geom.code_env, geom.d_A)
    return HPrimeSolution(hprime, f, residual, x)


def hamcond_residual(total: np.ndarray, geom: FrameGeometry) -> Tuple[float, np.ndarray]:
    """Distance of total P^ABE0 from I^A (x) D^BE0; returns (residual, D)."""
    y = total @ geom.code_env
    d, _ = trivial_factor_fit(dagger(geom.code_env) @ y, geom.d_A)
    return float(np.linalg.norm(_condition_vector(y, geom.code_env, geom.d_A))), d


def choose_hpp(frame_h_plus: np.ndarray, geom: FrameGeometry) -> HppSolution:
    """H'' = -X + P_perp X P_perp projected onto operators I^A (x) h on the W block."""
    x = np.asarray(frame_h_plus, dtype=complex)
    p_perp = np.eye(x.shape[0]) - geom.p_code
    full = -x + p_perp @ x @ p_perp
    h, _ = trivial_factor_fit(dagger(geom.w_iso) @ full @ geom.w_iso, geom.d_A)
    h = hermitian_part(h)
    proj = frobenius(full - geom.embed_block(h))
    res, d = hamcond_residual(x + geom.embed_block(h), geom)
    return HppSolution(h, proj, res, d)


@dataclass(eq=False)
class DoubleFrameTrajectory:
    times: np.ndarray
    unitaries: List[np.ndarray]
    w_blocks: List[np.ndarray]
    hprimes: List[np.ndarray]
    hpps: List[np.ndarray]
    residuals: dict
    d_Bprime: int
    recovered: SubsystemDecomposition
    verdict: str = "RECOVERABLE"
    reason: str = ""

    @property
    def max_residual(self) -> float:
        return max(float(np.max(v)) for v in self.residuals.values())

    @property
    def mean_residual(self) -> float:
        stacked = np.vstack(list(self.residuals.values()))
        return float(np.mean(np.max(stacked, axis=0)))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"t": self.times, **{k: np.asarray(v) for k, v in self.residuals.items()}})
        df["d_Bprime"] = self.d_Bprime
        return df


def _frame_hamiltonian(h_se: np.ndarray, u: np.ndarray, w: np.ndarray, geom: FrameGeometry) -> np.ndarray:
    rot = geom.embed_w(w) @ kron(u, np.eye(geom.d_E))
    return rot @ h_se @ dagger(rot)


def thm5_track(
    model: HamiltonianModel,
    dec: SubsystemDecomposition,
    grid: Sequence[float],
    env: EnvSubspace | None = None,
    w_support: str = "Bprime",
    tol: float = DEFAULT_TOL,
    step: float = 1e-3,
    ambient: SubsystemDecomposition | None = None,
    unitarity_drift: float = UNITARITY_DRIFT_LIMIT,
) -> DoubleFrameTrajectory:
    if dec.d_S != model.d_S:
        raise DimensionError(f"decomposition has d_S = {dec.d_S}, model has {model.d_S}")
    env = EnvSubspace.full(model.d_E) if env is None else env
    if env.d_E != model.d_E:
        raise DimensionError(f"environment subspace lives in {env.d_E} dims, d_E = {model.d_E}")
    geom = FrameGeometry.build(dec, env, w_support, ambient)
    g = _validate_grid(model, grid)
    eye_e = np.eye(model.d_E)

    # H' coefficients of the last accepted step; every RK4 stage regularizes toward them
    state = {"prev": None}

    def rates(h_se: np.ndarray, u: np.ndarray, w: np.ndarray):
        frame = _frame_hamiltonian(h_se, u, w, geom)
        sol = solve_hprime(frame, geom, w, state["prev"])
        w_hat = geom.embed_w(w)
        total = frame + w_hat @ kron(sol.hprime, eye_e) @ dagger(w_hat)
        hpp = choose_hpp(total, geom)
        return -1j * (sol.hprime @ u), -1j * (hpp.hpp @ w), sol, hpp

    def advance(u, w, h_se, dur):
        n = _n_steps(dur, step)
        h = dur / n
        for _ in range(n):
            k1u, k1w, *_ = rates(h_se, u, w)
            k2u, k2w, *_ = rates(h_se, u + 0.5 * h * k1u, w + 0.5 * h * k1w)
            k3u, k3w, *_ = rates(h_se, u + 0.5 * h * k2u, w + 0.5 * h * k2w)
            k4u, k4w, sol4, _ = rates(h_se, u + h * k3u, w + h * k3w)
            u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
            w = w + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
            u = _reunitarize(u, unitarity_drift, "system frame U")
            w = _reunitarize(w, unitarity_drift, "gauge-environment frame W")
            state["prev"] = sol4.coeffs
        return u, w

    u = np.eye(model.d_S, dtype=complex)
    w = np.eye(geom.w_dim, dtype=complex)
    us, ws, hps, hpps = [], [], [], []
    r_sol, r_proj, r_cond = [], [], []
    t_prev = 0.0
    for t in g:
        t = float(t)
        for k, dur in model.pieces(t_prev, t):
            u, w = advance(u, w, model.segments[k].h_se, dur)
        t_prev = t
        _, _, sol, hpp = rates(model.segment_at(t).h_se, u, w)
        state["prev"] = sol.coeffs
        us.append(u.copy())
        ws.append(w.copy())
        hps.append(sol.hprime)
        hpps.append(hpp.hpp)
        r_sol.append(sol.residual)
        r_proj.append(hpp.projection_residual)
        r_cond.append(hpp.hamcond_residual)

    residuals = {"r_hprime": np.asarray(r_sol), "r_proj": np.asarray(r_proj), "r_hamcond": np.asarray(r_cond)}
    traj = DoubleFrameTrajectory(g, us, ws, hps, hpps, residuals, geom.d_Bprime, geom.w_dec)
    if traj.max_residual > tol:
        traj.verdict = "NOT_FOUND_AT_RESOLUTION"
        traj.reason = (
            f"max residual {traj.max_residual:.3e} exceeds tol {tol:g} at step {step:g}; "
            "a finer step may still succeed"
        )
    logger.info("recoverability (W on %s, env dim %d): %s (max residual %.3e)",
                w_support, env.d_E0, traj.verdict, traj.max_residual)
    return traj


# ---------------- Moment-in-time ----------------

def env_state_for(env: EnvSubspace | EnvironmentState | None, d_E: int) -> EnvironmentState:
    if env is None:
        return EnvironmentState.subspace(np.eye(d_E, dtype=complex))
    if isinstance(env, EnvSubspace):
        return env.as_state()
    return env


def thm8_check(
    model: HamiltonianModel,
    dec: SubsystemDecomposition,
    env: EnvSubspace | EnvironmentState | None,
    T: float,
    tol: float = DEFAULT_TOL,
) -> RecoveryCertificate | NotCorrectable:
    """Kraus set of V_SE(T) over a basis of H^E0 (uniform weights), then build_recovery."""
    v = full_propagator(model, T)
    ch = kraus_from_unitary(v, env_state_for(env, model.d_E))
    return build_recovery(ch, dec, tol)
