"""
Markovian (Lindblad) dynamics and rotating-frame correctability tracking.

Contract:
- Generators follow the GKLS convention
      L(rho) = -i[H, rho] + sum_j (L_j rho L_j^dagger - 1/2 {L_j^dagger L_j, rho}).
- Schedules are piecewise constant. A time t belongs to the segment whose
  half-open interval [start, end) contains it; t_max belongs to the last one.
- ``propagate`` offers two integrators: "expm" (exact per-segment exponential of
  the column-stacked Liouvillian) and "rk4" (fixed step, never crossing a
  segment boundary).
- ``track_recovery_unitary`` integrates
      i dU/dt = -U H - (i/2) P U K + (i/2) U K U^dagger P U,  K = sum_j L_j^dagger L_j,
  with RK4 and polar re-unitarization, and evaluates the three frame conditions
  at every grid point. Leakage of the code into gauge levels of the ambient
  maximal decomposition triggers a gauge expansion.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .code_space import (
    CapacityError,
    DensityMatrix,
    SubsystemDecomposition,
    expand_gauge,
    maximal_extension,
    projector_AB,
    trivial_factor_fit,
)
from .linalg import (
    DEFAULT_TOL,
    DimensionError,
    as_cmatrix,
    dagger,
    frobenius,
    gram_schmidt_complete,
    matrix_exp,
    polar_unitary,
    superop_matrix,
    unvec,
    vec,
)
from .channels import NotCorrectable

logger = logging.getLogger(__name__)

TRACE_DRIFT_LIMIT = 1e-6
UNITARITY_DRIFT_LIMIT = 1e-6
_T_EPS = 1e-12


class ScheduleError(ValueError):
    """Time outside the model schedule."""


class TraceDriftError(RuntimeError):
    """Propagated state lost trace beyond the allowed drift."""


class StepSizeError(RuntimeError):
    """Re-unitarization had to correct more than the allowed drift in one step."""


# ---------------- Model ----------------

class ScheduleMixin:
    """Piecewise-constant schedule lookups over ``self.segments`` (each with ``duration``)."""

    segments: Tuple

    @cached_property
    def ends(self) -> np.ndarray:
        return np.cumsum([s.duration for s in self.segments])

    @property
    def t_max(self) -> float:
        return float(self.ends[-1])

    def segment_index(self, t: float) -> int:
        if t < -_T_EPS or t > self.t_max + _T_EPS:
            raise ScheduleError(f"t = {t} outside schedule [0, {self.t_max}]")
        idx = int(np.searchsorted(self.ends, t, side="right"))
        return min(idx, len(self.segments) - 1)

    def segment_at(self, t: float):
        return self.segments[self.segment_index(t)]

    def pieces(self, t0: float, t1: float) -> List[Tuple[int, float]]:
        """(segment index, duration) pieces covering [t0, t1], split at boundaries."""
        if t1 < t0 - _T_EPS:
            raise ScheduleError(f"interval [{t0}, {t1}] runs backwards")
        self.segment_index(t0)
        self.segment_index(t1)
        out: List[Tuple[int, float]] = []
        start = 0.0
        for k, end in enumerate(self.ends):
            lo, hi = max(start, t0), min(float(end), t1)
            if hi - lo > _T_EPS:
                out.append((k, hi - lo))
            start = float(end)
        return out


@dataclass(frozen=True, eq=False)
class LindbladSegment:
    duration: float
    h: np.ndarray
    l_ops: Tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError(f"segment duration must be > 0, got {self.duration}")
        h = as_cmatrix(self.h, "H")
        if frobenius(h - dagger(h)) > DEFAULT_TOL * max(1.0, frobenius(h)):
            raise ValueError("segment Hamiltonian is not Hermitian")
        ls = tuple(as_cmatrix(l, f"L[{j}]") for j, l in enumerate(self.l_ops))
        for j, l in enumerate(ls):
            if l.shape != h.shape:
                raise DimensionError(f"L[{j}] has shape {l.shape}, H has {h.shape}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "l_ops", ls)

    @cached_property
    def k_sum(self) -> np.ndarray:
        """sum_j L_j^dagger L_j"""
        out = np.zeros_like(self.h)
        for l in self.l_ops:
            out = out + dagger(l) @ l
        return out

    @cached_property
    def superop(self) -> np.ndarray:
        return liouvillian_matrix(self.h, self.l_ops)


@dataclass(frozen=True, eq=False)
class LindbladModel(ScheduleMixin):
    d_S: int
    segments: Tuple[LindbladSegment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("a Lindblad model needs at least one segment")
        for k, seg in enumerate(self.segments):
            if seg.h.shape != (self.d_S, self.d_S):
                raise DimensionError(f"segment {k}: H has shape {seg.h.shape}, d_S = {self.d_S}")
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def constant(cls, h, l_ops: Sequence = (), duration: float = 1.0) -> "LindbladModel":
        seg = LindbladSegment(duration, h, tuple(l_ops))
        return cls(seg.h.shape[0], (seg,))


# ---------------- Generator ----------------

def liouvillian_matrix(h: np.ndarray, l_ops: Sequence[np.ndarray]) -> np.ndarray:
    """Column-stacked superoperator of the GKLS generator."""
    d = h.shape[0]
    eye = np.eye(d, dtype=complex)
    out = -1j * (superop_matrix(h, eye) - superop_matrix(eye, h))
    for l in l_ops:
        ll = dagger(l) @ l
        out = out + superop_matrix(l, dagger(l)) - 0.5 * superop_matrix(ll, eye) - 0.5 * superop_matrix(eye, ll)
    return out


def _apply_generator(seg: LindbladSegment, rho: np.ndarray) -> np.ndarray:
    out = -1j * (seg.h @ rho - rho @ seg.h)
    for l in seg.l_ops:
        out = out + l @ rho @ dagger(l)
    k = seg.k_sum
    return out - 0.5 * (k @ rho + rho @ k)


def liouvillian_apply(model: LindbladModel, t: float, rho) -> np.ndarray:
    rho = np.asarray(getattr(rho, "mat", rho), dtype=complex)
    return _apply_generator(model.segment_at(t), rho)


# ---------------- Propagation ----------------

def _validate_grid(model: LindbladModel, grid: Sequence[float]) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("time grid must be a non-empty 1-D sequence")
    if (np.diff(g) < 0).any():
        raise ValueError("time grid must be non-decreasing")
    if g[0] < -_T_EPS or g[-1] > model.t_max + _T_EPS:
        raise ScheduleError(f"grid [{g[0]}, {g[-1]}] outside schedule [0, {model.t_max}]")
    return g


def _n_steps(duration: float, step: float) -> int:
    return max(1, int(math.ceil(duration / step - 1e-9)))


def _rk4(f, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve_operator(
    model: LindbladModel,
    x0: np.ndarray,
    grid: Sequence[float],
    integrator: str = "expm",
    step: float = 1e-3,
    trace_drift: float = TRACE_DRIFT_LIMIT,
) -> List[np.ndarray]:
    """Linear evolution of an arbitrary operator; values at every grid time."""
    g = _validate_grid(model, grid)
    x = np.asarray(x0, dtype=complex)
    if x.shape != (model.d_S, model.d_S):
        raise DimensionError(f"initial operator has shape {x.shape}, d_S = {model.d_S}")
    tr0 = np.trace(x)
    d = model.d_S
    cache: Dict[Tuple[int, float], np.ndarray] = {}
    out: List[np.ndarray] = []
    t_prev = 0.0
    for t in g:
        for k, dur in model.pieces(t_prev, float(t)):
            seg = model.segments[k]
            if integrator == "expm":
                key = (k, round(dur, 14))
                if key not in cache:
                    cache[key] = matrix_exp(seg.superop * dur)
                x = unvec(cache[key] @ vec(x), d)
            elif integrator == "rk4":
                n = _n_steps(dur, step)
                for _ in range(n):
                    x = _rk4(lambda r: _apply_generator(seg, r), x, dur / n)
            else:
                raise ValueError(f"unknown integrator {integrator!r} (expected 'expm' or 'rk4')")
        drift = abs(np.trace(x) - tr0)
        if drift > trace_drift:
            raise TraceDriftError(
                f"trace drift {drift:.3e} at t = {t:.6g} exceeds {trace_drift:g} "
                f"(integrator {integrator}, step {step:g})"
            )
        out.append(x.copy())
        t_prev = float(t)
    return out


def propagate(
    model: LindbladModel,
    rho0,
    grid: Sequence[float],
    integrator: str = "expm",
    step: float = 1e-3,
    trace_drift: float = TRACE_DRIFT_LIMIT,
) -> List[DensityMatrix]:
    rho = np.asarray(getattr(rho0, "mat", rho0), dtype=complex)
    states = evolve_operator(model, rho, grid, integrator, step, trace_drift)
    out: List[DensityMatrix] = []
    for t, s in zip(np.asarray(grid, dtype=float), states):
        lam = DensityMatrix.min_eigenvalue_of(s)
        if lam < -1e-10:
            logger.warning("propagate: eigenvalue %.3e at t = %.6g", lam, t)
        out.append(DensityMatrix(s, tol=max(trace_drift, DEFAULT_TOL)))
    return out


def superop_propagators(
    model: LindbladModel,
    grid: Sequence[float],
    integrator: str = "expm",
    step: float = 1e-3,
) -> List[np.ndarray]:
    """Cumulative superoperator propagators from 0 to each grid time.

    With "rk4" the columns are the RK4-evolved matrix units, so the result
    carries that integrator's error instead of being exact.
    """
    g = _validate_grid(model, grid)
    n = model.d_S ** 2
    if integrator == "rk4":
        d = model.d_S
        cols = [
            evolve_operator(model, unvec(np.eye(n, dtype=complex)[:, k], d), g, "rk4", step, np.inf)
            for k in range(n)
        ]
        return [np.column_stack([vec(c[i]) for c in cols]) for i in range(len(g))]
    if integrator != "expm":
        raise ValueError(f"unknown integrator {integrator!r} (expected 'expm' or 'rk4')")
    phi = np.eye(n, dtype=complex)
    out: List[np.ndarray] = []
    t_prev = 0.0
    for t in g:
        for k, dur in model.pieces(t_prev, float(t)):
            phi = matrix_exp(model.segments[k].superop * dur) @ phi
        out.append(phi.copy())
        t_prev = float(t)
    return out


# ---------------- Rotating frame ----------------

def _rotate(seg: LindbladSegment, u: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    ud = dagger(u)
    return u @ seg.h @ ud, [u @ l @ ud for l in seg.l_ops]


def frame_transform(
    model: LindbladModel, t: float, u: np.ndarray, hprime: np.ndarray | None = None
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """(u H u^dagger + H', [u L_j u^dagger])."""
    h_t, l_t = _rotate(model.segment_at(t), np.asarray(u, dtype=complex))
    if hprime is not None:
        h_t = h_t + hprime
    return h_t, l_t


def choose_hprime(h_tilde: np.ndarray, l_tilde: Sequence[np.ndarray], dec: SubsystemDecomposition) -> np.ndarray:
    """H' = -H~ - (i/2) P K~ + (i/2) K~ P."""
    p = projector_AB(dec)
    k = np.zeros_like(h_tilde)
    for l in l_tilde:
        k = k + dagger(l) @ l
    return -h_tilde - 0.5j * (p @ k) + 0.5j * (k @ p)


@dataclass(frozen=True, eq=False)
class R1Breakdown:
    """Split of the first frame condition measured against an ambient maximal decomposition.

    action: A-nontrivial part (including leakage outside the ambient block).
    leakage: trivial-on-A flow from the code into unused ambient gauge levels.
    leak_blocks: per L_j, the (d_B' - d_B) x d_B leakage coefficients.
    """

    action: float
    leakage: float
    leak_blocks: Tuple[np.ndarray, ...]

    @property
    def total(self) -> float:
        return float(np.hypot(self.action, self.leakage))


@dataclass(frozen=True, eq=False)
class MarkovResiduals:
    r1: float
    r2: float
    r3: float
    breakdown: R1Breakdown

    @property
    def worst(self) -> float:
        return max(self.r1, self.r2, self.r3)


def _r1_breakdown(
    l_tilde: Sequence[np.ndarray], dec: SubsystemDecomposition, ambient: SubsystemDecomposition
) -> R1Breakdown:
    act2 = leak2 = 0.0
    blocks: List[np.ndarray] = []
    for l in l_tilde:
        y = l @ dec.iso
        z = dagger(ambient.iso) @ y
        c, res = trivial_factor_fit(z, dec.d_A)
        outside = y - ambient.iso @ z
        act2 += frobenius(res) ** 2 + frobenius(outside) ** 2
        rest = c[dec.d_B :, :]
        leak2 += dec.d_A * frobenius(rest) ** 2
        blocks.append(rest)
    return R1Breakdown(math.sqrt(act2), math.sqrt(leak2), tuple(blocks))


def markov_residuals(
    model: LindbladModel,
    t: float,
    dec: SubsystemDecomposition,
    u: np.ndarray,
    hprime: np.ndarray,
    ambient: SubsystemDecomposition | None = None,
) -> MarkovResiduals:
    """Frobenius residuals of the three rotating-frame conditions.

    r1 is the root-sum-square over j of the distance of L~_j P from the nearest
    J (I^A (x) C_j) J^dagger, which makes it invariant under unitary mixing of
    the L_j. r2 is the distance of J^dagger (H~ + H') J from I^A (x) D.
    r3 = || P (H~ + H' + (i/2) sum L~^dagger L~) P_K ||.
    """
    ambient = maximal_extension(dec) if ambient is None else ambient
    h_t, l_t = frame_transform(model, t, u)
    x = h_t + hprime
    br = _r1_breakdown(l_t, dec, ambient)
    _, res2 = trivial_factor_fit(dagger(dec.iso) @ x @ dec.iso, dec.d_A)
    p = projector_AB(dec)
    k = np.zeros_like(x)
    for l in l_t:
        k = k + dagger(l) @ l
    r3 = frobenius(p @ (x + 0.5j * k) @ (np.eye(dec.d_S) - p))
    return MarkovResiduals(br.total, frobenius(res2), r3, br)


# ---------------- Gauge expansion ----------------

@dataclass(frozen=True, eq=False)
class GaugeProposal:
    vectors: np.ndarray
    dec: SubsystemDecomposition
    ambient: SubsystemDecomposition

    @property
    def k(self) -> int:
        return self.vectors.shape[1] // self.dec.d_A


def detect_gauge_expansion(
    breakdown: R1Breakdown,
    dec: SubsystemDecomposition,
    ambient: SubsystemDecomposition,
    tol: float = DEFAULT_TOL,
) -> GaugeProposal | NotCorrectable | None:
    """Propose new gauge levels spanning the leakage image.

    The leakage coefficients of all L_j are stacked and their left singular
    vectors above `tol` select combinations of the unused ambient levels. The
    ambient decomposition is re-based so that the chosen combinations come
    first, keeping the new code block a prefix of the ambient one.
    """
    if breakdown.action > tol:
        return NotCorrectable(breakdown.action, "nontrivial action on A")
    if breakdown.leakage <= tol or not breakdown.leak_blocks:
        return None
    stack = np.hstack(breakdown.leak_blocks)
    w, s, _ = np.linalg.svd(stack)
    k = int(np.sum(s > tol))
    if k == 0:
        return None
    if dec.d_A * (dec.d_B + k) > dec.d_S:
        raise CapacityError(
            f"gauge expansion by {k} levels exceeds floor(d_S/d_A) = {dec.max_gauge_dim}"
        )
    r = w[:, :k]
    r_full = np.hstack([r, gram_schmidt_complete(r)])
    d_max, d_B = ambient.d_B, dec.d_B
    iso = np.array(ambient.iso)
    new_cols: List[np.ndarray] = []
    for a in range(dec.d_A):
        lo, hi = a * d_max + d_B, (a + 1) * d_max
        rotated = ambient.iso[:, lo:hi] @ r_full
        iso[:, lo:hi] = rotated
        new_cols.append(rotated[:, :k])
    vectors = np.hstack(new_cols)
    new_dec = expand_gauge(dec, vectors)
    new_ambient = SubsystemDecomposition(ambient.d_A, d_max, iso, ambient.tol)
    return GaugeProposal(vectors, new_dec, new_ambient)


# ---------------- Tracking ----------------

@dataclass(frozen=True, eq=False)
class GaugeEvent:
    time: float
    d_B: int
    vectors: np.ndarray

    def to_dict(self) -> dict:
        return {"time": self.time, "d_B": self.d_B, "vectors": self.vectors}


@dataclass(eq=False)
class FrameTrajectory:
    times: np.ndarray
    unitaries: List[np.ndarray]
    hprimes: List[np.ndarray]
    residuals: Dict[str, np.ndarray]
    d_B: np.ndarray
    decompositions: List[SubsystemDecomposition]
    gauge_events: List[GaugeEvent] = field(default_factory=list)
    verdict: str = "CORRECTABLE"
    reason: str = ""

    @property
    def max_residual(self) -> float:
        return max((float(np.max(v)) for v in self.residuals.values() if len(v)), default=0.0)

    @property
    def mean_residual(self) -> float:
        stacked = np.vstack([v for v in self.residuals.values()]) if self.residuals else np.zeros((1, 1))
        return float(np.mean(np.max(stacked, axis=0)))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"t": self.times, **{k: np.asarray(v) for k, v in self.residuals.items()}})
        df["d_B"] = self.d_B
        return df


def _u_rate(u: np.ndarray, seg: LindbladSegment, p: np.ndarray) -> np.ndarray:
    # dU/dt = i U H - 1/2 P U K + 1/2 U K U^dagger P U
    k = seg.k_sum
    uk = u @ k
    return 1j * (u @ seg.h) - 0.5 * (p @ uk) + 0.5 * (uk @ dagger(u) @ p @ u)


def _reunitarize(u: np.ndarray, limit: float, where: str) -> np.ndarray:
    fixed = polar_unitary(u)
    drift = frobenius(u - fixed)
    if drift > limit:
        raise StepSizeError(f"{where}: re-unitarization drift {drift:.3e} exceeds {limit:g}; reduce the step")
    if drift > 1e-9:
        logger.warning("%s: re-unitarization drift %.3e", where, drift)
    else:
        logger.debug("%s: re-unitarization drift %.3e", where, drift)
    return fixed


def track_recovery_unitary(
    model: LindbladModel,
    dec: SubsystemDecomposition,
    grid: Sequence[float],
    tol: float = DEFAULT_TOL,
    step: float = 1e-3,
    allow_gauge_expansion: bool = True,
    ambient: SubsystemDecomposition | None = None,
    unitarity_drift: float = UNITARITY_DRIFT_LIMIT,
) -> FrameTrajectory:
    g = _validate_grid(model, grid)
    if dec.d_S != model.d_S:
        raise DimensionError(f"decomposition has d_S = {dec.d_S}, model has {model.d_S}")
    cur = dec
    amb = maximal_extension(dec) if ambient is None else ambient
    u = np.eye(model.d_S, dtype=complex)
    us: List[np.ndarray] = []
    hps: List[np.ndarray] = []
    decs: List[SubsystemDecomposition] = []
    r = {"r1": [], "r2": [], "r3": []}
    d_Bs: List[int] = []
    events: List[GaugeEvent] = []
    reason = ""
    t_prev = float(g[0])
    if t_prev > _T_EPS:
        for k, dur in model.pieces(0.0, t_prev):
            u = _advance(u, model.segments[k], projector_AB(cur), dur, step, unitarity_drift)

    for t in g:
        t = float(t)
        for k, dur in model.pieces(t_prev, t):
            u = _advance(u, model.segments[k], projector_AB(cur), dur, step, unitarity_drift)
        t_prev = t

        h_t, l_t = frame_transform(model, t, u)
        hp = choose_hprime(h_t, l_t, cur)
        res = markov_residuals(model, t, cur, u, hp, amb)
        if allow_gauge_expansion and res.r1 > tol:
            try:
                proposal = detect_gauge_expansion(res.breakdown, cur, amb, tol)
            except CapacityError as e:
                proposal = NotCorrectable(res.r1, str(e))
            if isinstance(proposal, GaugeProposal):
                cur, amb = proposal.dec, proposal.ambient
                events.append(GaugeEvent(t, cur.d_B, proposal.vectors))
                logger.info("gauge expansion at t = %.6g: d_B -> %d", t, cur.d_B)
                hp = choose_hprime(h_t, l_t, cur)
                res = markov_residuals(model, t, cur, u, hp, amb)
            elif isinstance(proposal, NotCorrectable) and not reason:
                reason = f"t = {t:.6g}: {proposal.reason}"

        us.append(u.copy())
        hps.append(hp)
        decs.append(cur)
        d_Bs.append(cur.d_B)
        r["r1"].append(res.r1)
        r["r2"].append(res.r2)
        r["r3"].append(res.r3)

    residuals = {k: np.asarray(v) for k, v in r.items()}
    traj = FrameTrajectory(g, us, hps, residuals, np.asarray(d_Bs), decs, events)
    if traj.max_residual > tol:
        traj.verdict = "NOT_CORRECTABLE"
        traj.reason = reason or f"max residual {traj.max_residual:.3e} exceeds tol {tol:g}"
    logger.info("markov tracking: %s (max residual %.3e, %d gauge events)",
                traj.verdict, traj.max_residual, len(events))
    return traj


def _advance(
    u: np.ndarray, seg: LindbladSegment, p: np.ndarray, dur: float, step: float, limit: float
) -> np.ndarray:
    n = _n_steps(dur, step)
    h = dur / n
    for _ in range(n):
        u = _reunitarize(_rk4(lambda x: _u_rate(x, seg, p), u, h), limit, "recovery unitary")
    return u


def track_fixed_frame(
    model: LindbladModel,
    dec: SubsystemDecomposition,
    grid: Sequence[float],
    tol: float = DEFAULT_TOL,
) -> FrameTrajectory:
    """Frame conditions with U = I and H' = 0: the noiseless-subsystem test."""
    g = _validate_grid(model, grid)
    eye = np.eye(model.d_S, dtype=complex)
    zero = np.zeros_like(eye)
    amb = maximal_extension(dec)
    rows = [markov_residuals(model, float(t), dec, eye, zero, amb) for t in g]
    residuals = {
        "r1": np.array([x.r1 for x in rows]),
        "r2": np.array([x.r2 for x in rows]),
        "r3": np.array([x.r3 for x in rows]),
    }
    traj = FrameTrajectory(g, [eye] * len(g), [zero] * len(g), residuals,
                           np.full(len(g), dec.d_B), [dec] * len(g))
    if traj.max_residual > tol:
        traj.verdict = "NOT_CORRECTABLE"
        traj.reason = f"max residual {traj.max_residual:.3e} exceeds tol {tol:g}"
    return traj


# ---------------- Generator split ----------------

@dataclass(frozen=True, eq=False)
class GeneratorSplit:
    h_eff: np.ndarray
    dissipator: np.ndarray
    s_part: np.ndarray

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = rho.shape[0]
        comm = -1j * (self.h_eff @ rho - rho @ self.h_eff)
        return comm + unvec((self.dissipator + self.s_part) @ vec(rho), d)


def generator_split(model: LindbladModel, t: float, pab_t: np.ndarray, tol: float = DEFAULT_TOL) -> GeneratorSplit:
    """L = -i[H_eff, .] + D + S with H_eff = H + (i/2) P K - (i/2) K P,
    D(.) = sum L . L^dagger and S(.) = -1/2 PKP (.) - 1/2 (.) PKP."""
    p = as_cmatrix(pab_t, "projector")
    if frobenius(p @ p - p) > tol or frobenius(p - dagger(p)) > tol:
        raise ValueError("generator_split needs an orthogonal projector")
    seg = model.segment_at(t)
    k = seg.k_sum
    eye = np.eye(model.d_S, dtype=complex)
    h_eff = seg.h + 0.5j * (p @ k) - 0.5j * (k @ p)
    diss = np.zeros((model.d_S ** 2, model.d_S ** 2), dtype=complex)
    for l in seg.l_ops:
        diss = diss + superop_matrix(l, dagger(l))
    pkp = p @ k @ p
    s_part = -0.5 * superop_matrix(pkp, eye) - 0.5 * superop_matrix(eye, pkp)
    return GeneratorSplit(h_eff, diss, s_part)
