"""The `evolve` verb: state, leakage and uncorrected-fidelity series for a scenario.

No condition is evaluated; this is the raw dynamics the checks reason about.
"""
from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from .checks import CheckContext
from .code_space import DensityMatrix, encode, projector_AB
from .evaluate import (
    channel_dynamics,
    entanglement_fidelity,
    joint_unitary_dynamics,
    leakage,
    superop_dynamics,
)
from .hamiltonian import propagators_on_grid
from .ingest import Scenario, ScenarioError, load_scenario
from .linalg import DimensionError
from .markovian import evolve_operator, superop_propagators
from .utils import add_common_args, apply_cli_overrides, get_logger, load_config, save_csv, save_json, timer

logger = logging.getLogger(__name__)


def _initial_state(sc: Scenario) -> np.ndarray:
    dec = sc.dec
    tau = sc.gauge_state
    if tau is None:
        tau = np.zeros((dec.d_B, dec.d_B), dtype=complex)
        tau[0, 0] = 1.0
    return encode(dec, np.eye(dec.d_A) / dec.d_A, tau)


def _row(t: float, rho: np.ndarray, p: np.ndarray, fid: float) -> dict:
    return {
        "t": t,
        "trace": float(np.trace(rho).real),
        "purity": float(np.trace(rho @ rho).real),
        "min_eig": DensityMatrix.min_eigenvalue_of(rho),
        "leakage": leakage(rho, p),
        "fidelity": fid,
    }


def evolve_series(sc: Scenario, ctx: CheckContext | None = None) -> tuple[pd.DataFrame, List[np.ndarray]]:
    """Per-time rows (t, trace, purity, min_eig, leakage, fidelity) and the states.

    The initial state is the encoded maximally mixed logical state with the
    scenario gauge state; fidelity is taken with no recovery.
    """
    ctx = ctx or CheckContext()
    dec = sc.dec
    rho0 = _initial_state(sc)
    p = projector_AB(dec)
    rows, states = [], []
    if sc.kind == "channel":
        for t, dyn in ((0.0, lambda x: x), (1.0, channel_dynamics(sc.model))):
            rho = dyn(rho0)
            rows.append(_row(t, rho, p, entanglement_fidelity(dyn, dec, None, None, sc.gauge_state)))
            states.append(rho)
    elif sc.kind == "markovian":
        states = evolve_operator(sc.model, rho0, sc.grid, ctx.integrator, ctx.step, ctx.trace_drift)
        phis = superop_propagators(sc.model, sc.grid, ctx.integrator, ctx.step)
        for t, rho, phi in zip(sc.grid, states, phis):
            rows.append(_row(float(t), rho, p, entanglement_fidelity(superop_dynamics(phi), dec, None, None, sc.gauge_state)))
    else:
        rho_e = sc.env.environment(sc.d_E).density()
        for t, v in zip(sc.grid, propagators_on_grid(sc.model, sc.grid)):
            dyn = joint_unitary_dynamics(v, rho_e)
            rho = dyn(rho0)
            states.append(rho)
            rows.append(_row(float(t), rho, p, entanglement_fidelity(dyn, dec, None, None, sc.gauge_state)))
    return pd.DataFrame(rows), states


def build_parser(ap: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    ap = ap or argparse.ArgumentParser(description="Emit state / leakage / fidelity series for a scenario")
    add_common_args(ap)
    ap.add_argument("--scenario", required=True, help="scenario JSON file")
    ap.add_argument("--csv", default=None, help="directory for the series CSV")
    ap.add_argument("--out", default=None, help="JSON file with the full density matrices")
    return ap


def evolve_main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_cli_overrides(load_config(args.config), args)
        log = get_logger(level=cfg.get("logging", {}).get("level", "INFO"))
        sc = load_scenario(args.scenario)
    except (ScenarioError, DimensionError, FileNotFoundError, ValueError) as e:
        get_logger().error("%s", e)
        return 2
    ctx = CheckContext.from_config(cfg, sc)
    with timer(f"evolve {sc.name}", log):
        df, states = evolve_series(sc, ctx)
    csv_dir = Path(args.csv) if args.csv else Path(cfg.get("output_root", "runs")) / "evolve"
    save_csv(df, csv_dir / f"{sc.name}.csv")
    log.info("Wrote series -> %s", csv_dir / f"{sc.name}.csv")
    if args.out:
        save_json({"scenario": sc.name, "t": df["t"].to_numpy(), "states": states}, args.out)
        log.info("Wrote states -> %s", args.out)
    log.info("final leakage %.3e, final fidelity %.9f", df["leakage"].iloc[-1], df["fidelity"].iloc[-1])
    return 0
