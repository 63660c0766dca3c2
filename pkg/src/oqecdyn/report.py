"""The `report` verb: pretty-print a report JSON written by `check`."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, Iterable, List

from .utils import get_logger, load_json

COLUMNS = ("check", "verdict", "expect", "passed", "residual_max", "fidelity_min", "gauge_events")


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "NO"
    if isinstance(v, float):
        return f"{v:.3e}" if v < 1e-3 or v >= 1e4 else f"{v:.6f}"
    if isinstance(v, list):
        return str(len(v))
    return str(v)


def rows_for(report: dict) -> List[List[str]]:
    rows = []
    for name, c in report.get("checks", {}).items():
        rows.append([name] + [_fmt(c.get(k)) for k in COLUMNS[1:]])
    return rows


def _flatten(report: dict) -> Iterable[dict]:
    if "scenarios" in report:
        yield from report["scenarios"]
    else:
        yield report


def render_text(report: dict) -> str:
    lines: List[str] = []
    for r in _flatten(report):
        lines.append(f"{r.get('scenario', '?')}  (oqecdyn {r.get('version', '?')}, seed {r.get('seed')})")
        rows = [list(COLUMNS)] + rows_for(r)
        widths = [max(len(row[i]) for row in rows) for i in range(len(COLUMNS))]
        for row in rows:
            lines.append("  " + "  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        for name, c in r.get("checks", {}).items():
            for f in c.get("failures", []):
                lines.append(f"  ! {name}: {f}")
            if c.get("error"):
                lines.append(f"  ! {name}: {c['error']}")
        lines.append(f"  => {'PASSED' if r.get('passed') else 'FAILED'}")
    return "\n".join(lines)


def _render_rich(report: dict) -> bool:
    try:
        from rich.console import Console
        from rich.table import Table
    except Exception:
        return False
    console = Console()
    for r in _flatten(report):
        table = Table(title=f"{r.get('scenario', '?')} (seed {r.get('seed')})")
        for h in COLUMNS:
            table.add_column(h)
        for row in rows_for(r):
            table.add_row(*row)
        console.print(table)
        style = "bold green" if r.get("passed") else "bold red"
        console.print(f"[{style}]{'PASSED' if r.get('passed') else 'FAILED'}[/{style}]")
    return True


def report_main(argv: List[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description="Pretty-print an oqecdyn report")
    ap.add_argument("report", help="report JSON written by `oqecdyn check`")
    ap.add_argument("--plain", action="store_true", help="plain text even when rich is installed")
    args = ap.parse_args(argv)
    path = Path(args.report)
    if not path.exists():
        get_logger().error("Report not found: %s", path)
        return 2
    report = load_json(path)
    if args.plain or not _render_rich(report):
        print(render_text(report))
    return 0
