"""Helpers shared by the check families."""
from __future__ import annotations

from typing import List

import numpy as np

from ..channels import EnvironmentState
from ..evaluate import env_states_in, sample_env_states
from ..ingest import CheckSpec, EnvSpec, Scenario
from . import CheckContext


def fidelity_indices(n: int, every: int) -> List[int]:
    """Every `every`-th grid index plus the last one."""
    idx = list(range(0, n, max(1, every)))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return idx


def env_spec(sc: Scenario, spec: CheckSpec) -> EnvSpec:
    return spec.env if spec.env is not None else sc.env


def oracle_env_states(sc: Scenario, spec: CheckSpec, ctx: CheckContext) -> List[np.ndarray]:
    """Environment densities for the fidelity oracle.

    Explicit samples win; otherwise random pure states inside the environment
    subspace (or anywhere for a full environment), plus the state itself when
    the environment is a given density.
    """
    env = env_spec(sc, spec)
    if env.samples:
        return list(env.samples)
    d_E = sc.d_E
    rng = ctx.rng()
    if env.kind == "state":
        return [env.state]
    if env.kind == "subspace":
        states = env_states_in(env.basis, ctx.env_samples, rng)
    else:
        states = sample_env_states(d_E, ctx.env_samples, rng)
    return [s.density() for s in states]


def min_or_none(values) -> float | None:
    values = [float(v) for v in values]
    return min(values) if values else None


def outside_state(basis: np.ndarray) -> EnvironmentState | None:
    """A pure state orthogonal to span(basis), or None if the basis is complete."""
    from ..linalg import gram_schmidt_complete

    comp = gram_schmidt_complete(np.asarray(basis, dtype=complex))
    if comp.shape[1] == 0:
        return None
    return EnvironmentState.pure(comp[:, 0])
