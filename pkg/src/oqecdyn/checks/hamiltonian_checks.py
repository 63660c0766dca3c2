"""Joint system-environment checks: tracked unitary correctability, double-frame
recoverability (full environment, environment subspace, W on B) and the
moment-in-time check."""
from __future__ import annotations

import logging
from typing import List

import numpy as np

from ..channels import EnvironmentState, NotCorrectable, kraus_from_unitary, recovery_residual
from ..evaluate import entanglement_fidelity, joint_unitary_dynamics, summarize_residuals
from ..hamiltonian import full_propagator, propagators_on_grid, thm4_track, thm5_track, thm8_check
from ..ingest import CheckSpec, Scenario
from . import CheckContext, CheckResult, register
from ._common import env_spec, fidelity_indices, min_or_none, oracle_env_states, outside_state

logger = logging.getLogger(__name__)


def _require_hamiltonian(sc: Scenario, name: str) -> None:
    if sc.kind != "hamiltonian":
        raise ValueError(f"check {name} needs a hamiltonian scenario, got {sc.kind!r}")


def _grid_fidelities(sc, times, unitaries, outputs, env_states, ctx) -> tuple[List[int], np.ndarray]:
    """Worst fidelity over `env_states` at every sampled grid point."""
    idx = fidelity_indices(len(times), ctx.fidelity_every)
    vs = propagators_on_grid(sc.model, np.asarray(times)[idx])
    worst = []
    for k, v in zip(idx, vs):
        out = outputs[k] if isinstance(outputs, list) else outputs
        worst.append(min(
            entanglement_fidelity(joint_unitary_dynamics(v, rho_e), sc.dec, unitaries[k], out, sc.gauge_state)
            for rho_e in env_states
        ))
    return idx, np.asarray(worst)


def moment_residuals(sc: Scenario, times, unitaries) -> np.ndarray:
    """Admissibility of each U(t) as a recovery of the full-environment channel at t."""
    full_env = EnvironmentState.subspace(np.eye(sc.d_E, dtype=complex))
    return np.array([
        recovery_residual(kraus_from_unitary(v, full_env), sc.dec, sc.dec, u)
        for v, u in zip(propagators_on_grid(sc.model, times), unitaries)
    ])


@register("thm4")
def thm4(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """Unitary correctability with U(t) driven by H_S alone."""
    _require_hamiltonian(sc, "thm4")
    traj = thm4_track(sc.model, sc.dec, sc.grid, ctx.tol)
    summary = summarize_residuals(traj.residuals)
    envs = oracle_env_states(sc, spec, ctx)
    idx, fids = _grid_fidelities(sc, traj.times, traj.unitaries, sc.dec, envs, ctx)

    # a correctable evolution must also be correctable at every moment with the tracked U
    implied = moment_residuals(sc, traj.times, traj.unitaries)
    verdict, reason = traj.verdict, traj.reason
    if verdict == "CORRECTABLE" and implied.max() > ctx.tol:
        k = int(np.argmax(implied))
        verdict = "NOT_CORRECTABLE"
        reason = (f"tracked U fails the moment-in-time condition at t = {traj.times[k]:.6g} "
                  f"(residual {implied[k]:.3e} > tol {ctx.tol:g})")
        logger.warning("%s", reason)

    series = traj.to_frame()
    series["moment_residual"] = implied
    series["fidelity"] = np.nan
    series.loc[idx, "fidelity"] = fids
    return CheckResult(
        "thm4", verdict,
        residual_max=summary.get("residual_max"),
        residual_mean=summary.get("residual_mean"),
        fidelity_min=min_or_none(fids),
        reason=reason,
        certificate={"d_Bprime": sc.dec.d_B, "u_final": traj.unitaries[-1]},
        extra={"moment_residual_max": float(implied.max()),
               **{k: v for k, v in summary.items() if not k.startswith("residual_")}},
        series=series,
    )


def _double_frame(name: str, sc: Scenario, spec: CheckSpec, ctx: CheckContext, w_support: str) -> CheckResult:
    _require_hamiltonian(sc, name)
    env = env_spec(sc, spec)
    sub = env.subspace(sc.d_E)
    traj = thm5_track(
        sc.model, sc.dec, sc.grid, env=sub, w_support=w_support, tol=ctx.tol,
        step=ctx.step, ambient=sc.ambient, unitarity_drift=ctx.unitarity_drift,
    )
    summary = summarize_residuals(traj.residuals)
    envs = oracle_env_states(sc, spec, ctx)
    idx, fids = _grid_fidelities(sc, traj.times, traj.unitaries, traj.recovered, envs, ctx)
    extra = {k: v for k, v in summary.items() if not k.startswith("residual_")}
    extra["env_dim"] = sub.d_E0
    extra["w_support"] = w_support

    # the same recovery against a state outside the environment subspace
    if not sub.is_full:
        psi = outside_state(sub.iso_E)
        if psi is not None:
            _, out_fids = _grid_fidelities(sc, traj.times, traj.unitaries, traj.recovered, [psi.density()], ctx)
            extra["fidelity_outside_min"] = float(out_fids.min())

    series = traj.to_frame()
    series["fidelity"] = np.nan
    series.loc[idx, "fidelity"] = fids
    return CheckResult(
        name, traj.verdict,
        residual_max=summary.get("residual_max"),
        residual_mean=summary.get("residual_mean"),
        fidelity_min=min_or_none(fids),
        reason=traj.reason,
        certificate={"d_Bprime": traj.d_Bprime, "u_final": traj.unitaries[-1], "w_final": traj.w_blocks[-1]},
        extra=extra,
        series=series,
    )


@register("thm5")
def thm5(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """Recoverability through the double frame, W on H^B' (x) H^E."""
    return _double_frame("thm5", sc, spec, ctx, "Bprime")


@register("thm6")
def thm6(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """thm5 with the environment initialized inside a subspace."""
    return _double_frame("thm6", sc, spec, ctx, "Bprime")


@register("thm7")
def thm7(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """Environment subspace, W restricted to H^B (x) H^E."""
    return _double_frame("thm7", sc, spec, ctx, "B")


@register("thm8")
def thm8(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    """Correctability at the single moment T (default: end of the grid)."""
    _require_hamiltonian(sc, "thm8")
    T = float(sc.grid[-1]) if spec.T is None else spec.T
    env = env_spec(sc, spec)
    outcome = thm8_check(sc.model, sc.dec, env.environment(sc.d_E), T, ctx.tol)
    extra = {"T": T}
    if isinstance(outcome, NotCorrectable):
        return CheckResult(
            "thm8", "NOT_CORRECTABLE",
            residual_max=outcome.residual, residual_mean=outcome.residual,
            reason=outcome.reason, certificate=outcome.to_dict(), extra=extra,
        )
    v = full_propagator(sc.model, T)
    fids = [
        entanglement_fidelity(joint_unitary_dynamics(v, rho_e), sc.dec, outcome.u, outcome.recovered, sc.gauge_state)
        for rho_e in oracle_env_states(sc, spec, ctx)
    ]
    residual = max(outcome.gram_residual, outcome.residual)
    return CheckResult(
        "thm8", "CORRECTABLE",
        residual_max=residual, residual_mean=residual,
        fidelity_min=min_or_none(fids),
        certificate=outcome.to_dict(), extra=extra,
    )
