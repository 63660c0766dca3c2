"""Command-line entry point: ``oqecdyn <verb> [options]``.

Verbs:
    check    run the checks requested by scenario files (exit 0 pass, 1 fail, 2 error)
    evolve   emit state / leakage / fidelity series
    gen      emit a random instance that is correctable by construction
    report   pretty-print a report JSON
    list     list the registered checks
"""
from __future__ import annotations

import sys
from typing import Callable, Dict, List


def _list_main(argv: List[str] | None = None) -> int:
    from .checks import discover, list_checks

    discover()
    for name in list_checks():
        print(name)
    return 0


def _verbs() -> Dict[str, Callable[[List[str] | None], int]]:
    from .check import check_main
    from .evolve import evolve_main
    from .instances import gen_main
    from .report import report_main

    return {"check": check_main, "evolve": evolve_main, "gen": gen_main, "report": report_main, "list": _list_main}


def main(argv: List[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        return 0 if argv else 2
    verbs = _verbs()
    verb, rest = argv[0], argv[1:]
    if verb not in verbs:
        print(f"unknown verb {verb!r}; expected one of {sorted(verbs)}", file=sys.stderr)
        return 2
    return int(verbs[verb](rest) or 0)


if __name__ == "__main__":
    sys.exit(main())
