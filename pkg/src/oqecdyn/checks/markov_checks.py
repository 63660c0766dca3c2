"""Markovian checks: frame tracking (with and without gauge expansion), the
noiseless-subsystem special case and integrator cross-validation."""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from ..code_space import encode
from ..evaluate import entanglement_fidelity, superop_dynamics, summarize_residuals
from ..ingest import CheckSpec, Scenario
from ..linalg import trace_distance
from ..markovian import (
    FrameTrajectory,
    evolve_operator,
    superop_propagators,
    track_fixed_frame,
    track_recovery_unitary,
)
from . import CheckContext, CheckResult, register
from ._common import fidelity_indices, min_or_none

logger = logging.getLogger(__name__)


def _require_markov(sc: Scenario, name: str) -> None:
    if sc.kind != "markovian":
        raise ValueError(f"check {name} needs a markovian scenario, got {sc.kind!r}")


def _fidelities(sc: Scenario, traj: FrameTrajectory, ctx: CheckContext) -> np.ndarray:
    idx = fidelity_indices(len(traj.times), ctx.fidelity_every)
    phis = superop_propagators(sc.model, traj.times[idx], ctx.integrator, ctx.step)
    return np.array([
        entanglement_fidelity(superop_dynamics(phi), sc.dec, traj.unitaries[k], traj.decompositions[k], sc.gauge_state)
        for k, phi in zip(idx, phis)
    ])


def _result(name: str, sc: Scenario, traj: FrameTrajectory, ctx: CheckContext) -> CheckResult:
    summary = summarize_residuals(traj.residuals)
    fids = _fidelities(sc, traj, ctx)
    series = traj.to_frame()
    idx = fidelity_indices(len(traj.times), ctx.fidelity_every)
    series["fidelity"] = np.nan
    series.loc[idx, "fidelity"] = fids
    return CheckResult(
        name, traj.verdict,
        residual_max=summary.get("residual_max"),
        residual_mean=summary.get("residual_mean"),
        fidelity_min=min_or_none(fids),
        gauge_events=[e.to_dict() for e in traj.gauge_events],
        reason=traj.reason,
        certificate={"d_B_final": int(traj.d_B[-1]), "u_final": traj.unitaries[-1]},
        extra={k: v for k, v in summary.items() if not k.startswith("residual_")},
        series=series,
    )


def _track(name: str, sc: Scenario, ctx: CheckContext, allow_expansion: bool) -> CheckResult:
    _require_markov(sc, name)
    traj = track_recovery_unitary(
        sc.model, sc.dec, sc.grid, ctx.tol, ctx.step,
        allow_gauge_expansion=allow_expansion, ambient=sc.ambient,
        unitarity_drift=ctx.unitarity_drift,
    )
    return _result(name, sc, traj, ctx)


@register("thm2")
def thm2(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """Correctability by a tracked unitary with a fixed gauge factor."""
    return _track("thm2", sc, ctx, allow_expansion=False)


@register("thm3")
def thm3(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """As thm2, with gauge expansion into the ambient maximal decomposition."""
    return _track("thm3", sc, ctx, allow_expansion=True)


@register("dfs")
def dfs(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    _require_markov(sc, "dfs")
    traj = track_fixed_frame(sc.model, sc.dec, sc.grid, ctx.tol)
    return _result("dfs", sc, traj, ctx)


@register("propagate")
def propagate_check(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """expm vs RK4 on the encoded maximally mixed code state at the end of the grid."""
    _require_markov(sc, "propagate")
    dec = sc.dec
    rho0 = encode(dec, np.eye(dec.d_A) / dec.d_A, np.eye(dec.d_B) / dec.d_B)
    limit = float(spec.options.get("limit", 1e-6))
    grid = sc.grid
    exact = evolve_operator(sc.model, rho0, grid, "expm", ctx.step, ctx.trace_drift)
    rk4 = evolve_operator(sc.model, rho0, grid, "rk4", ctx.step, ctx.trace_drift)
    dists = np.array([trace_distance(a, b) for a, b in zip(exact, rk4)])
    verdict = "AGREE" if dists[-1] <= limit else "DISAGREE"
    logger.info("integrator cross-validation: %s (trace distance %.3e at t = %.6g)", verdict, dists[-1], grid[-1])
    return CheckResult(
        "propagate", verdict,
        residual_max=float(dists.max()), residual_mean=float(dists.mean()),
        extra={"trace_distance_final": float(dists[-1]), "limit": limit},
        series=pd.DataFrame({"t": grid, "trace_distance": dists}),
    )
