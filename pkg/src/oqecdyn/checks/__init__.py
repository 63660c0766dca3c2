"""
Checks package bootstrap + registry.

Usage:

    # 1) Register checks in their own files:
    # src/oqecdyn/checks/channel_checks.py
    #
    # from . import CheckResult, register
    #
    # @register("thm1")
    # def thm1(sc, spec, ctx) -> CheckResult:
    #     ...
    #
    # 2) In your code:
    # from oqecdyn.checks import discover, run_check, list_checks
    # discover()
    # result = run_check("thm1", scenario, spec, ctx)

Each check receives the parsed Scenario, its CheckSpec (per-check overrides
such as T or env) and a CheckContext with the resolved tolerances.
"""

from __future__ import annotations

import importlib
import pathlib
import pkgutil
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np

from ..linalg import DEFAULT_TOL

# -----------------------------------------------------------------------------
# Context and result
# -----------------------------------------------------------------------------

POSITIVE = {"CORRECTABLE", "RECOVERABLE", "AGREE"}


@dataclass
class CheckContext:
    tol: float = DEFAULT_TOL
    fidelity_tol: float = 1e-6
    trace_drift: float = 1e-6
    unitarity_drift: float = 1e-6
    integrator: str = "expm"
    step: float = 1e-3
    fidelity_every: int = 10
    env_samples: int = 3
    seed: int = 0

    @classmethod
    def from_config(cls, cfg: dict, scenario=None) -> "CheckContext":
        """Config values, then scenario tolerances/integrator on top, then explicit CLI tol."""
        tols = dict(cfg.get("tolerances", {}))
        integ = dict(cfg.get("integrator", {}))
        fid = dict(cfg.get("fidelity", {}))
        seed = cfg.get("seed", 0)
        if scenario is not None:
            for k, v in scenario.tolerances.items():
                if k == "tol" and cfg.get("_tol_from_cli"):
                    continue
                tols[k] = v
            if "integrator" in scenario.raw:
                integ.update(scenario.integrator)
            if scenario.seed is not None and not cfg.get("_seed_from_cli"):
                seed = scenario.seed
        return cls(
            tol=float(tols.get("tol", DEFAULT_TOL)),
            fidelity_tol=float(tols.get("fidelity", 1e-6)),
            trace_drift=float(tols.get("trace_drift", 1e-6)),
            unitarity_drift=float(tols.get("unitarity_drift", 1e-6)),
            integrator=str(integ.get("method", "expm")),
            step=float(integ.get("step", 1e-3)),
            fidelity_every=int(fid.get("every", 10)),
            env_samples=int(fid.get("env_samples", 3)),
            seed=int(seed or 0),
        )

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass
class CheckResult:
    name: str
    verdict: str
    residual_max: float | None = None
    residual_mean: float | None = None
    fidelity_min: float | None = None
    gauge_events: List[dict] = field(default_factory=list)
    certificate: Dict[str, Any] | None = None
    reason: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)
    series: Any = None  # pandas DataFrame of per-grid-point values, if any

    @property
    def positive(self) -> bool:
        return self.verdict in POSITIVE

    def failures(self, spec, fidelity_tol: float = 1e-6) -> List[str]:
        """Reasons this result does not meet the expectations in `spec`."""
        out: List[str] = []
        if spec.expect is not None and self.verdict != spec.expect:
            out.append(f"verdict {self.verdict}, expected {spec.expect}")
        if spec.expect_d_Bprime is not None:
            got = (self.certificate or {}).get("d_Bprime")
            if got != spec.expect_d_Bprime:
                out.append(f"d_Bprime {got}, expected {spec.expect_d_Bprime}")
        if spec.expect_gauge_events is not None and len(self.gauge_events) != spec.expect_gauge_events:
            out.append(f"{len(self.gauge_events)} gauge events, expected {spec.expect_gauge_events}")
        if self.positive and self.fidelity_min is not None and self.fidelity_min < 1 - fidelity_tol:
            out.append(f"oracle fidelity {self.fidelity_min:.9f} contradicts verdict {self.verdict}")
        return out

    def to_dict(self, spec=None, fidelity_tol: float = 1e-6) -> dict:
        out = {
            "verdict": self.verdict,
            "expect": getattr(spec, "expect", None),
            "residual_max": self.residual_max,
            "residual_mean": self.residual_mean,
            "fidelity_min": self.fidelity_min,
            "gauge_events": self.gauge_events,
            "certificate": self.certificate,
        }
        if self.reason:
            out["reason"] = self.reason
        out.update(self.extra)
        if spec is not None:
            fails = self.failures(spec, fidelity_tol)
            out["passed"] = not fails
            if fails:
                out["failures"] = fails
        return out


CheckFn = Callable[..., CheckResult]

# -----------------------------------------------------------------------------
# Global registry
# -----------------------------------------------------------------------------

REGISTRY: Dict[str, CheckFn] = {}


def register(name: str):
    """
    Decorator to register a check under its scenario name.

    Example:
        @register("thm8")
        def thm8(sc, spec, ctx) -> CheckResult:
            ...
    """
    if not isinstance(name, str) or not name:
        raise ValueError("register(name): name must be a non-empty string")

    def deco(fn: CheckFn):
        if not callable(fn):
            raise TypeError("register() expects a callable check")
        if name in REGISTRY:
            raise KeyError(f"Check '{name}' already registered")
        REGISTRY[name] = fn
        return fn

    return deco


def run_check(name: str, scenario, spec, ctx: CheckContext) -> CheckResult:
    """
    Run a registered check. Call `discover()` once at startup so all
    submodules can register themselves.
    """
    if name not in REGISTRY:
        raise KeyError(
            f"Unknown check '{name}'. Did you call discover()? "
            f"Available: {sorted(REGISTRY.keys())}"
        )
    return REGISTRY[name](scenario, spec, ctx)


def list_checks() -> List[str]:
    """Return a sorted list of available check names."""
    return sorted(REGISTRY.keys())


def discover() -> Dict[str, CheckFn]:
    """
    Auto-import all submodules in this package so their @register decorators run.

    Files starting with underscore are skipped. Returns the REGISTRY dict.
    """
    pkg_path = pathlib.Path(__file__).parent
    for mod in pkgutil.iter_modules([str(pkg_path)]):
        if mod.name.startswith("_"):
            continue
        importlib.import_module(f"{__name__}.{mod.name}")
    return REGISTRY


__all__ = [
    "CheckContext",
    "CheckResult",
    "register",
    "run_check",
    "list_checks",
    "discover",
    "REGISTRY",
]
