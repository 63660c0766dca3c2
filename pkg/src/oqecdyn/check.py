"""Scenario runner: the `check` verb."""
from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

from joblib import Parallel, delayed

from . import __version__
from .checks import CheckContext, discover, list_checks, run_check
from .ingest import Scenario, ScenarioError, load_scenario
from .linalg import DimensionError
from .utils import (
    add_common_args,
    apply_cli_overrides,
    get_logger,
    load_config,
    output_dir_from_cfg,
    save_artifacts,
    save_csv,
    save_json,
    timer,
)

logger = logging.getLogger(__name__)

CONVENTIONS = {"lindblad": "GKLS", "vec": "column-stacking", "markov3_sign": "+i/2"}
LOAD_ERRORS = (ScenarioError, DimensionError, FileNotFoundError, ValueError)


def _validate_checks(sc: Scenario) -> None:
    known = set(list_checks())
    for i, spec in enumerate(sc.checks):
        if spec.name not in known:
            raise ScenarioError(f"checks[{i}].name", f"unknown check {spec.name!r}; available: {sorted(known)}")


def run_scenario(scenario: Scenario | str | Path, cfg: Dict[str, Any] | None = None) -> Tuple[dict, Dict[str, Any]]:
    """Execute every requested check. Returns (report, {series name: DataFrame})."""
    discover()
    cfg = cfg or {}
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    _validate_checks(sc)
    ctx = CheckContext.from_config(cfg, sc)

    checks: Dict[str, dict] = {}
    series: Dict[str, Any] = {}
    passed = True
    for i, spec in enumerate(sc.checks):
        key = spec.name if spec.name not in checks else f"{spec.name}#{i}"
        with timer(f"{sc.name}: {key}", logger):
            try:
                result = run_check(spec.name, sc, spec, ctx)
            except (ValueError, RuntimeError) as e:
                logger.error("%s: check %s failed to run: %s", sc.name, key, e)
                checks[key] = {"verdict": "ERROR", "expect": spec.expect, "passed": False, "error": str(e)}
                passed = False
                continue
        entry = result.to_dict(spec, ctx.fidelity_tol)
        checks[key] = entry
        passed &= entry["passed"]
        logger.info("%s: %s -> %s%s", sc.name, key, result.verdict,
                    "" if entry["passed"] else f" (FAILED: {'; '.join(entry['failures'])})")
        if result.series is not None:
            series[f"{sc.name}__{key.replace('#', '_')}"] = result.series

    report = {
        "tool": "oqecdyn",
        "version": __version__,
        "scenario": sc.name,
        "source": sc.source,
        "seed": ctx.seed,
        "tol": ctx.tol,
        "conventions": CONVENTIONS,
        "checks": checks,
        "passed": bool(passed),
    }
    return report, series


def _run_path(path: str, cfg: Dict[str, Any]) -> Tuple[dict, Dict[str, Any]]:
    # joblib workers start with an empty registry
    get_logger(level=cfg.get("logging", {}).get("level", "INFO"))
    return run_scenario(path, cfg)


def _expand_paths(paths: List[str]) -> List[Path]:
    out: List[Path] = []
    for p in paths:
        p = Path(p)
        out.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return out


def build_parser(ap: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    ap = ap or argparse.ArgumentParser(description="Run the checks requested by scenario files")
    add_common_args(ap)
    ap.add_argument("--scenario", nargs="+", required=True, help="scenario JSON file(s) or directories")
    ap.add_argument("--out", default=None, help="report path (a directory when several scenarios run)")
    ap.add_argument("--csv", default=None, help="directory for per-check CSV series")
    ap.add_argument("--tol", type=float, default=None, help="override the condition tolerance")
    return ap


def check_main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_cli_overrides(load_config(args.config), args)
    except (FileNotFoundError, ValueError) as e:
        get_logger().error("%s", e)
        return 2
    cfg["_tol_from_cli"] = args.tol is not None
    cfg["_seed_from_cli"] = args.seed is not None
    log = get_logger(level=cfg.get("logging", {}).get("level", "INFO"))

    discover()
    paths = _expand_paths(args.scenario)
    if not paths:
        log.error("no scenario files found in %s", args.scenario)
        return 2
    try:
        for p in paths:
            _validate_checks(load_scenario(p))
    except LOAD_ERRORS as e:
        log.error("%s", e)
        return 2

    n_jobs = int(cfg.get("parallel", {}).get("n_jobs", 1) or 1)
    with timer(f"{len(paths)} scenario(s)", log):
        if n_jobs == 1 or len(paths) == 1:
            results = [run_scenario(p, cfg) for p in paths]
        else:
            results = Parallel(n_jobs=n_jobs)(delayed(_run_path)(str(p), cfg) for p in paths)

    reports = [r for r, _ in results]
    series: Dict[str, Any] = {}
    for _, s in results:
        series.update(s)
    errored = any(c.get("verdict") == "ERROR" for r in reports for c in r["checks"].values())
    all_passed = all(r["passed"] for r in reports)
    combined = reports[0] if len(reports) == 1 else {
        "tool": "oqecdyn", "version": __version__, "conventions": CONVENTIONS,
        "scenarios": reports, "passed": all_passed,
    }

    if args.out:
        out = Path(args.out)
        if len(reports) == 1:
            save_json(combined, out)
        else:
            for r in reports:
                save_json(r, out / f"{r['scenario']}.json")
            save_json(combined, out / "summary.json")
        log.info("Wrote report(s) -> %s", out)
    if args.csv:
        for name, df in series.items():
            save_csv(df, Path(args.csv) / f"{name}.csv")
        log.info("Wrote %d CSV series -> %s", len(series), args.csv)
    if not args.out and not args.csv:
        clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
        out_dir = output_dir_from_cfg(clean)
        save_artifacts(clean, {"report": combined, "series": series}, out_dir)
        log.info("Output dir: %s", out_dir)

    for r in reports:
        log.info("%s: %s", r["scenario"], "PASSED" if r["passed"] else "FAILED")
    if errored:
        return 2
    return 0 if all_passed else 1
