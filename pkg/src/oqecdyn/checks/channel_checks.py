"""Channel correctability (Kraus-level condition and constructive recovery)."""
from __future__ import annotations

import logging

import numpy as np

from ..channels import NotCorrectable, apply_channel, build_recovery, classify_channel
from ..code_space import encode, reduce_to_A
from ..evaluate import channel_dynamics, entanglement_fidelity
from ..ingest import CheckSpec, Scenario
from ..linalg import dagger, frobenius
from . import CheckContext, CheckResult, register

logger = logging.getLogger(__name__)


def _random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ dagger(g)
    return rho / np.trace(rho)


@register("thm1")
def thm1(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> CheckResult:
    if sc.kind != "channel":
        raise ValueError(f"check thm1 needs a channel scenario, got {sc.kind!r}")
    ch, dec = sc.model, sc.dec
    outcome = build_recovery(ch, dec, ctx.tol)
    if isinstance(outcome, NotCorrectable):
        fid = entanglement_fidelity(channel_dynamics(ch), dec, None, None, sc.gauge_state)
        return CheckResult(
            "thm1", "NOT_CORRECTABLE",
            residual_max=outcome.residual, residual_mean=outcome.residual,
            reason=outcome.reason,
            certificate=outcome.to_dict(),
            extra={"identity_recovery_fidelity": fid},
        )

    label, _ = classify_channel(ch, dec, ctx.tol)
    fid = entanglement_fidelity(channel_dynamics(ch), dec, outcome.u, outcome.recovered, sc.gauge_state)

    # recover a random logical state through the full encode / noise / recover / reduce path
    rng = ctx.rng()
    rho = _random_density(dec.d_A, rng)
    tau = _random_density(dec.d_B, rng)
    out = apply_channel(ch.then(outcome.u), encode(dec, rho, tau))
    reduction_error = frobenius(reduce_to_A(outcome.recovered, out) - rho)

    residual = max(outcome.gram_residual, outcome.residual)
    return CheckResult(
        "thm1", "CORRECTABLE",
        residual_max=residual, residual_mean=residual,
        fidelity_min=fid,
        certificate=outcome.to_dict(),
        extra={"classification": label, "reduction_error": reduction_error},
    )
