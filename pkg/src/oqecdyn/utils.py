from __future__ import annotations
import json, logging, random, time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Sequence

import numpy as np
import yaml

# Optional deps
try:
    import pandas as pd  # type: ignore
except Exception:
    pd = None  # save_csv guards for this

# ---------------- Repro & Logging ----------------

def set_seed(seed: int) -> np.random.Generator:
    """Seed the global generators and return a fresh numpy Generator for `seed`."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    return np.random.default_rng(seed)

def get_logger(name: str = "oqecdyn", level: int | str = logging.INFO) -> logging.Logger:
    """Configure (once) and return a logger.

    Library modules log through `logging.getLogger(__name__)`; those loggers are
    children of "oqecdyn" and inherit the handler installed here.
    """
    logger = logging.getLogger(name)
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    if not logger.handlers:
        h = logging.StreamHandler()
        h.setFormatter(logging.Formatter("%(asctime)s | %(levelname)s | %(name)s | %(message)s"))
        logger.addHandler(h)
    logger.setLevel(level)
    return logger

@contextmanager
def timer(msg: str, logger: logging.Logger | None = None) -> Iterator[None]:
    t0 = time.perf_counter()
    yield
    dt = time.perf_counter() - t0
    (logger or logging.getLogger("oqecdyn")).info("%s: %.3fs", msg, dt)

# ---------------- CLI & Config ----------------

def add_common_args(ap) -> None:
    """Attach common run args to an argparse.ArgumentParser."""
    ap.add_argument("-c", "--config", required=False, help="Path to YAML run config")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--output_root", type=str, default=None)
    ap.add_argument("--experiment_name", type=str, default=None)
    ap.add_argument("--n_jobs", type=int, default=None)
    ap.add_argument("--log_level", type=str, default=None)

def _deep_merge(base: Dict[str, Any], over: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out

def _read_yaml(p: Path) -> dict:
    if not p.exists():
        raise FileNotFoundError(f"Config not found: {p}")
    with p.open("r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"Top-level YAML must be a mapping: {p}")
    return data

def load_config(path_or_none, overlays: Sequence[str | Path] | None = None) -> dict:
    """Load a YAML config into a dict (or {} if None); overlays are deep-merged in order."""
    data: dict = {}
    if path_or_none:
        data = _read_yaml(Path(path_or_none))
    for extra in overlays or ():
        data = _deep_merge(data, _read_yaml(Path(extra)))
    return data

def apply_cli_overrides(cfg: dict, args) -> dict:
    """Fold the common CLI flags into the config (CLI wins)."""
    cfg = dict(cfg)
    for key in ("seed", "output_root", "experiment_name"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "n_jobs", None) is not None:
        cfg["parallel"] = _deep_merge(cfg.get("parallel", {}), {"n_jobs": args.n_jobs})
    if getattr(args, "log_level", None):
        cfg["logging"] = _deep_merge(cfg.get("logging", {}), {"level": args.log_level})
    if getattr(args, "tol", None) is not None:
        cfg["tolerances"] = _deep_merge(cfg.get("tolerances", {}), {"tol": args.tol})
    return cfg

def output_dir_from_cfg(cfg: dict, create: bool = True) -> Path:
    root = Path(cfg.get("output_root", "runs"))
    exp  = cfg.get("experiment_name", "exp")
    ts   = time.strftime("%Y%m%d-%H%M%S")
    out = root / exp / ts
    if create:
        out.mkdir(parents=True, exist_ok=True)
    return out

def save_artifacts(cfg: dict, artifacts: dict, outdir: Path) -> None:
    """Save config, report, and residual series to disk."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with (outdir / "config.yaml").open("w", encoding="utf-8") as f:
        yaml.safe_dump(cfg, f, sort_keys=False)
    report = artifacts.get("report")
    if report is not None:
        save_json(report, outdir / "report.json")
    for name, df in (artifacts.get("series") or {}).items():
        save_csv(df, outdir / f"{name}.csv")

# ---------------- Atomic IO ----------------

def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays (complex included) to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj

def save_json(data: Any, path: Path | str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with Path(path).open("w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, indent=2)

def load_json(path: Path | str) -> Any:
    with Path(path).open("r", encoding="utf-8") as f:
        return json.load(f)

def save_csv(df, path: Path | str, index: bool = False) -> None:
    if pd is None:
        raise RuntimeError("pandas not available for save_csv")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=index)
