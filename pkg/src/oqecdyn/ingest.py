"""
Scenario ingestion for oqecdyn.

Reads a scenario JSON file into validated module types so the checks can
assume consistent dimensions.

Contract:
    load_scenario(path) -> Scenario
    parse_scenario(raw: dict, source="<dict>") -> Scenario

Every rejection is a ``ScenarioError`` whose message starts with the JSON path
of the offending field, e.g. ``model.segments[1].L[0]: ...``.

Matrices are row-major nested arrays. An entry is a plain number or an
[re, im] pair. Wherever an operator is expected, two shorthands are accepted:

    {"pauli": "ZI", "coeff": 0.5}               coeff * Z (x) I
    {"terms": [{"pauli": "II", "coeff": 1.57}, ...]}

Pauli characters: I X Y Z, 0 = |0><0|, 1 = |1><1|, - = |0><1|, + = |1><0|.
A coeff may itself be an [re, im] pair. A state vector is written
{"vector": [entries...]}.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from .channels import EnvironmentState, KrausChannel
from .code_space import SubsystemDecomposition, restrict_gauge
from .hamiltonian import EnvSubspace, HamiltonianModel, HamiltonianSegment
from .linalg import DEFAULT_TOL, dagger, frobenius, pauli_string
from .markovian import LindbladModel, LindbladSegment
from .utils import load_json

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KINDS = ("channel", "markovian", "hamiltonian")
VERDICTS = (
    "CORRECTABLE", "NOT_CORRECTABLE",
    "RECOVERABLE", "NOT_FOUND_AT_RESOLUTION",
    "AGREE", "DISAGREE",
)


class ScenarioError(ValueError):
    """Malformed scenario; `path` names the offending field."""

    def __init__(self, path: str, msg: str):
        self.path = path
        super().__init__(f"{path}: {msg}" if path else msg)


# ---------------- Types ----------------

@dataclass
class EnvSpec:
    kind: str = "full"
    basis: np.ndarray | None = None
    state: np.ndarray | None = None
    samples: List[np.ndarray] = field(default_factory=list)

    def subspace(self, d_E: int) -> EnvSubspace:
        if self.kind == "subspace":
            return EnvSubspace(self.basis)
        if self.kind == "state":
            return EnvSubspace(EnvironmentState.from_density(self.state).vectors)
        return EnvSubspace.full(d_E)

    def environment(self, d_E: int) -> EnvironmentState:
        if self.kind == "state":
            return EnvironmentState.from_density(self.state)
        if self.kind == "subspace":
            return EnvironmentState.subspace(self.basis)
        return EnvironmentState.subspace(np.eye(d_E, dtype=complex))


@dataclass
class CheckSpec:
    name: str
    expect: str | None = None
    T: float | None = None
    env: EnvSpec | None = None
    expect_d_Bprime: int | None = None
    expect_gauge_events: int | None = None
    options: Dict[str, Any] = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    kind: str
    dec: SubsystemDecomposition
    model: KrausChannel | LindbladModel | HamiltonianModel
    checks: List[CheckSpec]
    ambient: SubsystemDecomposition | None = None
    gauge_state: np.ndarray | None = None
    env: EnvSpec = field(default_factory=EnvSpec)
    grid: np.ndarray | None = None
    integrator: Dict[str, Any] = field(default_factory=lambda: {"method": "expm", "step": 1e-3})
    tolerances: Dict[str, float] = field(default_factory=dict)
    seed: int | None = None
    source: str = "<dict>"
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def d_E(self) -> int | None:
        return getattr(self.model, "d_E", None)

    def tol(self, default: float = DEFAULT_TOL) -> float:
        return float(self.tolerances.get("tol", default))


# ---------------- Scalars and matrices ----------------

def _number(v: Any, path: str) -> complex:
    if isinstance(v, bool):
        raise ScenarioError(path, "expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        return complex(float(v[0]), float(v[1]))
    raise ScenarioError(path, f"expected a number or an [re, im] pair, got {v!r}")


def _real(v: Any, path: str, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(path, f"expected a real number, got {v!r}")
    if positive and not v > 0:
        raise ScenarioError(path, f"must be > 0, got {v}")
    return float(v)


def _int(v: Any, path: str, minimum: int = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(path, f"expected an integer, got {v!r}")
    if v < minimum:
        raise ScenarioError(path, f"must be >= {minimum}, got {v}")
    return v


def parse_matrix(v: Any, path: str, shape: tuple | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(row, list) for row in v):
        raise ScenarioError(path, "expected a non-empty list of rows")
    width = len(v[0])
    rows = []
    for i, row in enumerate(v):
        if len(row) != width:
            raise ScenarioError(f"{path}[{i}]", f"row has {len(row)} entries, expected {width}")
        rows.append([_number(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    m = np.array(rows, dtype=complex)
    if shape is not None and m.shape != tuple(shape):
        raise ScenarioError(path, f"shape {m.shape}, expected {tuple(shape)}")
    return m


def parse_vector(v: Any, path: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ScenarioError(path, "expected a non-empty list of entries")
    vec = np.array([_number(x, f"{path}[{i}]") for i, x in enumerate(v)], dtype=complex)
    if dim is not None and vec.size != dim:
        raise ScenarioError(path, f"length {vec.size}, expected {dim}")
    return vec


def parse_operator(v: Any, path: str, dim: int) -> np.ndarray:
    """Matrix or Pauli shorthand, checked to be dim x dim."""
    if isinstance(v, dict):
        if "terms" in v:
            terms = v["terms"]
            if not isinstance(terms, list) or not terms:
                raise ScenarioError(f"{path}.terms", "expected a non-empty list")
            return sum(parse_operator(t, f"{path}.terms[{i}]", dim) for i, t in enumerate(terms))
        if "pauli" in v:
            label = v["pauli"]
            if not isinstance(label, str) or not label:
                raise ScenarioError(f"{path}.pauli", "expected a non-empty string")
            try:
                m = pauli_string(label)
            except ValueError as e:
                raise ScenarioError(f"{path}.pauli", str(e)) from None
            if m.shape[0] != dim:
                raise ScenarioError(f"{path}.pauli", f"{label!r} acts on {m.shape[0]} dims, expected {dim}")
            return _number(v.get("coeff", 1.0), f"{path}.coeff") * m
        if "matrix" in v:
            return parse_matrix(v["matrix"], f"{path}.matrix", (dim, dim))
        raise ScenarioError(path, "operator object needs one of 'pauli', 'terms', 'matrix'")
    return parse_matrix(v, path, (dim, dim))


def parse_state(v: Any, path: str, dim: int) -> np.ndarray:
    """Density matrix, Pauli shorthand, or {"vector": [...]} (normalized)."""
    if isinstance(v, dict) and "vector" in v:
        psi = parse_vector(v["vector"], f"{path}.vector", dim)
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ScenarioError(f"{path}.vector", "zero vector")
        psi = psi / nrm
        return np.outer(psi, psi.conj())
    rho = parse_operator(v, path, dim)
    if frobenius(rho - dagger(rho)) > 1e-9 or abs(np.trace(rho) - 1) > 1e-8:
        raise ScenarioError(path, "not a unit-trace Hermitian matrix")
    return rho


def matrix_to_json(m: np.ndarray) -> list:
    """Inverse of parse_matrix: entries as [re, im] pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


# ---------------- Sections ----------------

def _require(raw: dict, key: str, path: str) -> Any:
    if key not in raw:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return raw[key]


def _decomposition(raw: Any) -> tuple[SubsystemDecomposition, SubsystemDecomposition | None]:
    path = "decomposition"
    if not isinstance(raw, dict):
        raise ScenarioError(path, "expected an object")
    d_A = _int(_require(raw, "d_A", path), f"{path}.d_A")
    d_B = _int(_require(raw, "d_B", path), f"{path}.d_B")
    d_S = _int(_require(raw, "d_S", path), f"{path}.d_S")
    if d_A * d_B > d_S:
        raise ScenarioError(path, f"d_A*d_B = {d_A * d_B} exceeds d_S = {d_S}")
    iso_raw = raw.get("isometry", "canonical")
    try:
        if iso_raw == "canonical":
            dec = SubsystemDecomposition.canonical(d_A, d_B, d_S)
        else:
            iso = parse_matrix(iso_raw, f"{path}.isometry", (d_S, d_A * d_B))
            dec = SubsystemDecomposition(d_A, d_B, iso)
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"{path}.isometry", str(e)) from None

    ambient = None
    if "ambient" in raw:
        apath = f"{path}.ambient"
        amb = parse_matrix(raw["ambient"], apath)
        if amb.shape[0] != d_S or amb.shape[1] % d_A:
            raise ScenarioError(apath, f"shape {amb.shape} is not d_S x (d_A * d_B')")
        try:
            ambient = SubsystemDecomposition(d_A, amb.shape[1] // d_A, amb)
        except ValueError as e:
            raise ScenarioError(apath, str(e)) from None
        if ambient.d_B < d_B or frobenius(restrict_gauge(ambient, d_B).iso - dec.iso) > 1e-9:
            raise ScenarioError(apath, "the first d_B gauge levels must reproduce the code isometry")
    return dec, ambient


def _channel_model(raw: dict, d_S: int) -> KrausChannel:
    ops = _require(raw, "kraus", "model")
    if not isinstance(ops, list) or not ops:
        raise ScenarioError("model.kraus", "expected a non-empty list of operators")
    mats = tuple(parse_operator(m, f"model.kraus[{i}]", d_S) for i, m in enumerate(ops))
    ch = KrausChannel(mats)
    if ch.completeness_residual() > 1e-8:
        raise ScenarioError("model.kraus", f"not trace preserving (residual {ch.completeness_residual():.3e})")
    return ch


def _segments(raw: dict) -> list:
    segs = _require(raw, "segments", "model")
    if not isinstance(segs, list) or not segs:
        raise ScenarioError("model.segments", "expected a non-empty list")
    return segs


def _markov_model(raw: dict, d_S: int) -> LindbladModel:
    out = []
    for k, seg in enumerate(_segments(raw)):
        path = f"model.segments[{k}]"
        dur = _real(_require(seg, "duration", path), f"{path}.duration", positive=True)
        h = parse_operator(seg["H"], f"{path}.H", d_S) if "H" in seg else np.zeros((d_S, d_S), complex)
        ls = seg.get("L", [])
        if not isinstance(ls, list):
            raise ScenarioError(f"{path}.L", "expected a list of operators")
        l_ops = tuple(parse_operator(l, f"{path}.L[{j}]", d_S) for j, l in enumerate(ls))
        try:
            out.append(LindbladSegment(dur, h, l_ops))
        except ValueError as e:
            raise ScenarioError(path, str(e)) from None
    return LindbladModel(d_S, tuple(out))


def _hamiltonian_model(raw: dict, d_S: int) -> HamiltonianModel:
    d_E = _int(_require(raw, "d_E", "model"), "model.d_E")
    out = []
    for k, seg in enumerate(_segments(raw)):
        path = f"model.segments[{k}]"
        dur = _real(_require(seg, "duration", path), f"{path}.duration", positive=True)
        h_s = parse_operator(seg["H_S"], f"{path}.H_S", d_S) if "H_S" in seg else np.zeros((d_S, d_S), complex)
        h_e = parse_operator(seg["H_E"], f"{path}.H_E", d_E) if "H_E" in seg else np.zeros((d_E, d_E), complex)
        terms = []
        for j, term in enumerate(seg.get("interactions", [])):
            tpath = f"{path}.interactions[{j}]"
            terms.append((
                parse_operator(_require(term, "S", tpath), f"{tpath}.S", d_S),
                parse_operator(_require(term, "E", tpath), f"{tpath}.E", d_E),
            ))
        try:
            out.append(HamiltonianSegment(dur, h_s, h_e, tuple(terms)))
        except ValueError as e:
            raise ScenarioError(path, str(e)) from None
    return HamiltonianModel(d_S, d_E, tuple(out))


def parse_env(raw: Any, path: str, d_E: int | None) -> EnvSpec:
    if raw is None:
        return EnvSpec()
    if not isinstance(raw, dict):
        raise ScenarioError(path, "expected an object")
    kind = raw.get("kind", "full")
    if kind not in ("full", "subspace", "state"):
        raise ScenarioError(f"{path}.kind", f"unknown environment kind {kind!r}")
    if d_E is None:
        if kind != "full":
            raise ScenarioError(path, "environment given for a model without an environment")
        return EnvSpec()
    spec = EnvSpec(kind)
    if kind == "subspace":
        b = raw.get("basis")
        if isinstance(b, dict) and "vector" in b:
            spec.basis = parse_vector(b["vector"], f"{path}.basis.vector", d_E).reshape(-1, 1)
        else:
            spec.basis = parse_matrix(_require(raw, "basis", path), f"{path}.basis")
        if spec.basis.shape[0] != d_E:
            raise ScenarioError(f"{path}.basis", f"basis vectors have length {spec.basis.shape[0]}, d_E = {d_E}")
        try:
            EnvSubspace(spec.basis)
        except ValueError as e:
            raise ScenarioError(f"{path}.basis", str(e)) from None
    if kind == "state":
        spec.state = parse_state(_require(raw, "state", path), f"{path}.state", d_E)
    for i, s in enumerate(raw.get("samples", [])):
        spec.samples.append(parse_state(s, f"{path}.samples[{i}]", d_E))
    return spec


def _checks(raw: Any, d_E: int | None) -> List[CheckSpec]:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("checks", "expected a non-empty list")
    known = {"name", "expect", "T", "env", "expect_d_Bprime", "expect_gauge_events"}
    out = []
    for i, c in enumerate(raw):
        path = f"checks[{i}]"
        if isinstance(c, str):
            c = {"name": c}
        if not isinstance(c, dict):
            raise ScenarioError(path, "expected a check name or an object")
        name = _require(c, "name", path)
        if not isinstance(name, str):
            raise ScenarioError(f"{path}.name", "expected a string")
        expect = c.get("expect")
        if expect is not None and expect not in VERDICTS:
            raise ScenarioError(f"{path}.expect", f"unknown verdict {expect!r}; expected one of {VERDICTS}")
        spec = CheckSpec(name, expect)
        if "T" in c:
            spec.T = _real(c["T"], f"{path}.T")
        if "env" in c:
            spec.env = parse_env(c["env"], f"{path}.env", d_E)
        if "expect_d_Bprime" in c:
            spec.expect_d_Bprime = _int(c["expect_d_Bprime"], f"{path}.expect_d_Bprime")
        if "expect_gauge_events" in c:
            spec.expect_gauge_events = _int(c["expect_gauge_events"], f"{path}.expect_gauge_events", 0)
        spec.options = {k: v for k, v in c.items() if k not in known}
        out.append(spec)
    return out


def _grid(raw: Any, t_max_model: float) -> np.ndarray:
    if raw is None:
        return np.linspace(0.0, t_max_model, 101)
    t_max = _real(_require(raw, "t_max", "grid"), "grid.t_max", positive=True)
    dt = _real(_require(raw, "dt", "grid"), "grid.dt", positive=True)
    if t_max > t_max_model + 1e-12:
        raise ScenarioError("grid.t_max", f"{t_max} exceeds the schedule length {t_max_model}")
    n = int(round(t_max / dt))
    if n < 1:
        raise ScenarioError("grid.dt", f"dt = {dt} is larger than t_max = {t_max}")
    return np.linspace(0.0, t_max, n + 1)


# ---------------- Entry points ----------------

def parse_scenario(raw: Any, source: str = "<dict>") -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("", "top-level scenario must be an object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    kind = _require(raw, "kind", "")
    if kind not in KINDS:
        raise ScenarioError("kind", f"unknown kind {kind!r}; expected one of {KINDS}")
    dec, ambient = _decomposition(_require(raw, "decomposition", ""))

    model_raw = _require(raw, "model", "")
    if not isinstance(model_raw, dict):
        raise ScenarioError("model", "expected an object")
    build = {"channel": _channel_model, "markovian": _markov_model, "hamiltonian": _hamiltonian_model}[kind]
    model = build(model_raw, dec.d_S)

    d_E = getattr(model, "d_E", None)
    sc = Scenario(
        name=str(raw.get("name", Path(source).stem)),
        kind=kind,
        dec=dec,
        model=model,
        checks=_checks(_require(raw, "checks", ""), d_E),
        ambient=ambient,
        env=parse_env(raw.get("env"), "env", d_E),
        source=source,
        raw=raw,
    )
    if "gauge_state" in raw:
        sc.gauge_state = parse_state(raw["gauge_state"], "gauge_state", dec.d_B)
    if kind != "channel":
        sc.grid = _grid(raw.get("grid"), model.t_max)
    integ = raw.get("integrator", {})
    if not isinstance(integ, dict):
        raise ScenarioError("integrator", "expected an object")
    method = integ.get("method", "expm")
    if method not in ("expm", "rk4"):
        raise ScenarioError("integrator.method", f"unknown integrator {method!r}")
    sc.integrator = {"method": method, "step": _real(integ.get("step", 1e-3), "integrator.step", positive=True)}
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ScenarioError("tolerances", "expected an object")
    sc.tolerances = {k: _real(v, f"tolerances.{k}", positive=True) for k, v in tols.items()}
    if "seed" in raw:
        sc.seed = _int(raw["seed"], "seed", 0)
    logger.debug("parsed scenario %s (%s, %d checks)", sc.name, kind, len(sc.checks))
    return sc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Scenario not found: {path}")
    try:
        raw = load_json(path)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"line {e.lineno}, column {e.colno}", f"invalid JSON: {e.msg}") from None
    return parse_scenario(raw, str(path))


def load_scenarios(paths: Sequence[str | Path]) -> List[Scenario]:
    return [load_scenario(p) for p in paths]
