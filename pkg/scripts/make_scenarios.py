"""Write a sweep of random scenarios (correctable by construction, plus perturbed
negatives) into a directory that `oqecdyn check --scenario <dir>` can consume.

    python scripts/make_scenarios.py --out scenarios/generated --n 5
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from oqecdyn.instances import KINDS, raw_instance  # noqa: E402
from oqecdyn.utils import get_logger, save_json  # noqa: E402

# (d_A, d_B, d_S) per kind; channel instances need d_S > d_A * d_B for a complement
DIMS = {
    "channel": [(2, 1, 4), (2, 2, 8)],
    "generic": [(2, 1, 4)],
    "dfs": [(2, 2, 4), (2, 2, 6)],
    "drift": [(2, 1, 2), (2, 2, 4)],
    "hamiltonian": [(2, 1, 2), (2, 2, 4)],
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "scenarios" / "generated"))
    ap.add_argument("--n", type=int, default=3, help="seeds per (kind, dims)")
    ap.add_argument("--seed", type=int, default=0, help="first seed")
    ap.add_argument("--perturb", type=float, default=0.05, help="epsilon for the negative copies (0 disables)")
    args = ap.parse_args(argv)
    log = get_logger()

    out = Path(args.out)
    written = 0
    for kind in KINDS:
        for d_A, d_B, d_S in DIMS.get(kind, []):
            for seed in range(args.seed, args.seed + args.n):
                eps_values = [0.0]
                if args.perturb and kind in ("dfs", "drift", "hamiltonian"):
                    eps_values.append(args.perturb)
                for eps in eps_values:
                    raw = raw_instance(kind, d_A=d_A, d_B=d_B, d_S=d_S, seed=seed, perturb=eps)
                    save_json(raw, out / f"{raw['name']}.json")
                    written += 1
    log.info("Wrote %d scenarios -> %s", written, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
