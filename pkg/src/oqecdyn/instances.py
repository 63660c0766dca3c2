"""Seeded random instances that are correctable by construction (and perturbed
or generic ones that are not).

Every generator returns the raw scenario dict; ``random_correctable_instance``
parses it, so a generated file and an in-memory instance are the same thing.

Kinds:
    channel      Kraus set with M_a J = W^dag J'' (I^A (x) C_a), sum C_a^dag C_a = I
    generic      Kraus set from a random Stinespring isometry
    dfs (a)      L_j = J (I^A (x) l_j) J^dag (+) K part, H = J (I^A (x) h) J^dag (+) K part
    drift (b)    as dfs plus an A-local drift h_A (x) I^B, tracked by U(t)
    hamiltonian (c)  H_S = J (h_A (x) I + I (x) h_B) J^dag (+) K part, S_j = J (I (x) s_j) J^dag (+) K part
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, List

import numpy as np
from scipy.stats import unitary_group

from .code_space import CapacityError
from .ingest import Scenario, matrix_to_json, parse_scenario
from .linalg import dagger, kron
from .utils import add_common_args, get_logger, save_json, set_seed

logger = logging.getLogger(__name__)

KIND_ALIASES = {"a": "dfs", "b": "drift", "c": "hamiltonian"}
KINDS = ("channel", "generic", "dfs", "drift", "hamiltonian")


# ---------------- Random building blocks ----------------

def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return np.asarray(unitary_group.rvs(d, random_state=rng), dtype=complex)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (g + dagger(g)) / np.sqrt(2 * d)


def random_operator(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2 * d)


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return random_unitary(rows, rng)[:, :cols]


def _orthonormal_complement_sample(basis: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k random orthonormal vectors orthogonal to the columns of `basis`."""
    n = basis.shape[0]
    if k == 0:
        return np.zeros((n, 0), dtype=complex)
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    g = g - basis @ (dagger(basis) @ g)
    q, _ = np.linalg.qr(g)
    return q[:, :k]


def _check_dims(d_A: int, d_B: int, d_S: int) -> None:
    if d_A < 1 or d_B < 1:
        raise ValueError(f"d_A and d_B must be >= 1, got {d_A}, {d_B}")
    if d_A * d_B > d_S:
        raise CapacityError(f"d_A*d_B = {d_A * d_B} exceeds d_S = {d_S}")


def _embed(j: np.ndarray, code_op: np.ndarray, j_k: np.ndarray, k_op: np.ndarray | None) -> np.ndarray:
    """J code_op J^dag + J_K k_op J_K^dag."""
    out = j @ code_op @ dagger(j)
    if k_op is not None and j_k.shape[1]:
        out = out + j_k @ k_op @ dagger(j_k)
    return out


# ---------------- Channels ----------------

def correctable_kraus(
    d_A: int, d_B: int, d_S: int, n_ops: int, rng: np.random.Generator, d_Bprime: int | None = None
) -> tuple[np.ndarray, List[np.ndarray]]:
    """(code isometry J, Kraus operators) recoverable into a d_Bprime gauge factor."""
    _check_dims(d_A, d_B, d_S)
    d_max = d_S // d_A
    if d_Bprime is None:
        d_Bprime = int(rng.integers(d_B, d_max + 1))
    if not d_B <= d_Bprime <= d_max:
        raise CapacityError(f"d_Bprime = {d_Bprime} outside [{d_B}, {d_max}]")
    if n_ops * d_Bprime < d_B:
        raise ValueError(f"{n_ops} operators into {d_Bprime} gauge levels cannot carry d_B = {d_B}")
    v_s = random_unitary(d_S, rng)
    j, j_k = v_s[:, : d_A * d_B], v_s[:, d_A * d_B :]
    stacked_c = random_isometry(n_ops * d_Bprime, d_B, rng)
    c_ops = [stacked_c[a * d_Bprime : (a + 1) * d_Bprime, :] for a in range(n_ops)]
    w = random_unitary(d_S, rng)
    j_pp = random_isometry(d_S, d_A * d_Bprime, rng)

    # Stinespring isometry C^n (x) H^S <- H^S: image of the code is fixed, the
    # complement K goes anywhere orthogonal to it.
    eye_a = np.eye(d_A)
    code_img = np.vstack([dagger(w) @ j_pp @ kron(eye_a, c) for c in c_ops])
    k_img = _orthonormal_complement_sample(code_img, j_k.shape[1], rng)
    big = np.hstack([code_img, k_img]) @ dagger(np.hstack([j, j_k]))
    ops = [big[a * d_S : (a + 1) * d_S, :] for a in range(n_ops)]
    return j, ops


def generic_kraus(d_S: int, n_ops: int, rng: np.random.Generator) -> List[np.ndarray]:
    g = rng.normal(size=(n_ops * d_S, d_S)) + 1j * rng.normal(size=(n_ops * d_S, d_S))
    q, _ = np.linalg.qr(g)
    return [q[a * d_S : (a + 1) * d_S, :] for a in range(n_ops)]


# ---------------- Raw scenario dicts ----------------

def _base(name: str, kind: str, d_A: int, d_B: int, d_S: int, iso: np.ndarray, seed: int) -> Dict[str, Any]:
    return {
        "schema_version": 1,
        "name": name,
        "kind": kind,
        "decomposition": {"d_A": d_A, "d_B": d_B, "d_S": d_S, "isometry": matrix_to_json(iso)},
        "seed": seed,
    }


def _perturbation(d_A: int, j: np.ndarray, rng: np.random.Generator, d_B: int) -> np.ndarray:
    """J (X_A (x) m) J^dag with a fixed A-nontrivial X_A and random Hermitian m."""
    x_a = np.zeros((d_A, d_A), dtype=complex)
    x_a[0, 1] = x_a[1, 0] = 1.0
    m = random_hermitian(d_B, rng) + np.eye(d_B)
    op = j @ kron(x_a, m) @ dagger(j)
    return op / np.linalg.norm(op)


def raw_instance(
    kind: str,
    d_A: int = 2,
    d_B: int = 2,
    d_S: int | None = None,
    seed: int = 0,
    n_ops: int = 2,
    d_E: int = 2,
    perturb: float = 0.0,
    t_max: float = 1.0,
    dt: float = 0.05,
) -> Dict[str, Any]:
    kind = KIND_ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown instance kind {kind!r}; expected one of {KINDS}")
    d_S = d_A * d_B if d_S is None else d_S
    _check_dims(d_A, d_B, d_S)
    if d_A < 2 and perturb:
        raise ValueError("a perturbation needs d_A >= 2")
    rng = set_seed(seed)
    name = f"{kind}_dA{d_A}_dB{d_B}_dS{d_S}_seed{seed}" + (f"_eps{perturb:g}" if perturb else "")
    expect_ok = perturb == 0.0

    if kind in ("channel", "generic"):
        if kind == "channel":
            j, ops = correctable_kraus(d_A, d_B, d_S, n_ops, rng)
        else:
            j = random_isometry(d_S, d_A * d_B, rng)
            ops = generic_kraus(d_S, n_ops, rng)
            expect_ok = False
        raw = _base(name, "channel", d_A, d_B, d_S, j, seed)
        raw["model"] = {"kraus": [matrix_to_json(m) for m in ops]}
        raw["checks"] = [{"name": "thm1", "expect": "CORRECTABLE" if expect_ok else "NOT_CORRECTABLE"}]
        return raw

    v_s = random_unitary(d_S, rng)
    j, j_k = v_s[:, : d_A * d_B], v_s[:, d_A * d_B :]
    d_K = d_S - d_A * d_B
    eye_a, eye_b = np.eye(d_A), np.eye(d_B)
    grid = {"t_max": t_max, "dt": dt}

    if kind in ("dfs", "drift"):
        h_code = kron(eye_a, random_hermitian(d_B, rng))
        if kind == "drift":
            h_code = h_code + kron(random_hermitian(d_A, rng, scale=2.0), eye_b)
        h = _embed(j, h_code, j_k, random_hermitian(d_K, rng) if d_K else None)
        l_ops = [
            _embed(j, kron(eye_a, random_operator(d_B, rng, 0.5)), j_k,
                   random_operator(d_K, rng, 0.5) if d_K else None)
            for _ in range(n_ops)
        ]
        if perturb:
            l_ops[0] = l_ops[0] + perturb * _perturbation(d_A, j, rng, d_B)
        raw = _base(name, "markovian", d_A, d_B, d_S, j, seed)
        raw["model"] = {"segments": [{
            "duration": t_max, "H": matrix_to_json(h), "L": [matrix_to_json(l) for l in l_ops],
        }]}
        raw["grid"] = grid
        verdict = "CORRECTABLE" if expect_ok else "NOT_CORRECTABLE"
        raw["checks"] = [{"name": "thm2", "expect": verdict}]
        if kind == "dfs":
            raw["checks"].append({"name": "dfs", "expect": verdict})
        return raw

    # hamiltonian
    h_s = _embed(j, kron(random_hermitian(d_A, rng, 2.0), eye_b) + kron(eye_a, random_hermitian(d_B, rng)),
                 j_k, random_hermitian(d_K, rng) if d_K else None)
    terms = []
    for _ in range(n_ops):
        s = _embed(j, kron(eye_a, random_hermitian(d_B, rng)), j_k,
                   random_hermitian(d_K, rng) if d_K else None)
        terms.append([s, random_hermitian(d_E, rng)])
    if perturb:
        terms[0][0] = terms[0][0] + perturb * _perturbation(d_A, j, rng, d_B)
    raw = _base(name, "hamiltonian", d_A, d_B, d_S, j, seed)
    raw["model"] = {"d_E": d_E, "segments": [{
        "duration": t_max,
        "H_S": matrix_to_json(h_s),
        "H_E": matrix_to_json(random_hermitian(d_E, rng)),
        "interactions": [{"S": matrix_to_json(s), "E": matrix_to_json(e)} for s, e in terms],
    }]}
    raw["grid"] = grid
    raw["checks"] = [{"name": "thm4", "expect": "CORRECTABLE" if expect_ok else "NOT_CORRECTABLE"}]
    return raw


def random_correctable_instance(kind: str, dims: Dict[str, int] | None = None, seed: int = 0, **kwargs) -> Scenario:
    """Parsed scenario for `kind`; `dims` may set d_A, d_B, d_S, d_E, n_ops."""
    raw = raw_instance(kind, seed=seed, **(dims or {}), **kwargs)
    return parse_scenario(raw, source=f"<gen:{raw['name']}>")


# ---------------- CLI ----------------

def build_parser(ap: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    ap = ap or argparse.ArgumentParser(description="Emit a random scenario that is correctable by construction")
    add_common_args(ap)
    ap.add_argument("--kind", default="dfs", help=f"one of {KINDS} (or a, b, c)")
    ap.add_argument("--d_A", type=int, default=2)
    ap.add_argument("--d_B", type=int, default=2)
    ap.add_argument("--d_S", type=int, default=None)
    ap.add_argument("--d_E", type=int, default=2)
    ap.add_argument("--n_ops", type=int, default=2)
    ap.add_argument("--perturb", type=float, default=0.0, help="epsilon of the A-nontrivial perturbation")
    ap.add_argument("--out", default=None, help="output path (stdout if omitted)")
    return ap


def gen_main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    get_logger(level=args.log_level or "INFO")
    raw = raw_instance(
        args.kind, d_A=args.d_A, d_B=args.d_B, d_S=args.d_S, seed=args.seed or 0,
        n_ops=args.n_ops, d_E=args.d_E, perturb=args.perturb,
    )
    if args.out:
        save_json(raw, args.out)
        logger.info("wrote %s", args.out)
    else:
        json.dump(raw, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0
