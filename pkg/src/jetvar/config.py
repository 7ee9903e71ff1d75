"""JSON problem files: presets, user expressions and consistency checks.

A problem file is a JSON object with these sections (all arrays are indexed
by coordinate first, then derivative order)::

    problem    {"dim": int, "k": int}
    lagrangian {"preset": name} | {"expression": source}
    metric     {"preset": name} | {"expression": [[source, ...], ...]}     optional
    curve      {"preset": name, ...parameters} | {"expressions": [source, ...]}
    variation  {"expressions": [source, ...]}                               optional
    interval   {"t0": float, "t1": float}
    boundary   {"initial": (dim, k) array, "final": (dim, k) array | "free"} optional
    initial    {"state": (dim, 2k) array}                                   optional
    solver     overrides of SolverConfig fields                              optional
    output     {"csv": path, "samples": int}                                optional
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigError, ParseError
from .expr import ParseContext, evaluate, parse, variable_name
from .geometry import METRIC_PRESETS, MetricField
from .solver import SolverConfig
from .variational import Lagrangian
from .weil_algebra import sin

__all__ = [
    "ProblemConfig",
    "LAGRANGIAN_PRESETS",
    "CURVE_PRESETS",
    "lagrangian_preset",
    "lagrangian_from_expression",
    "metric_from_expressions",
    "curve_from_expressions",
    "curve_preset",
    "load_config",
    "config_from_dict",
]

SECTIONS = (
    "problem", "lagrangian", "metric", "curve", "variation", "interval",
    "boundary", "initial", "solver", "output",
)
DEFAULT_SAMPLES = 101


# -- Lagrangians ------------------------------------------------------------------

def _free_particle(x):
    return sum((0.5 * row[1] * row[1] for row in x), 0.0)


def _harmonic(x):
    return sum((0.5 * (row[1] * row[1] - row[0] * row[0]) for row in x), 0.0)


def _accel_squared(x):
    return sum((row[2] * row[2] for row in x), 0.0)


LAGRANGIAN_PRESETS: dict[str, tuple[int, Callable]] = {
    "free_particle": (1, _free_particle),
    "harmonic": (1, _harmonic),
    "accel_squared": (2, _accel_squared),
}


def lagrangian_preset(name: str, dim: int) -> Lagrangian:
    """Shipped Lagrangian by name; its order is fixed by the preset."""
    if name not in LAGRANGIAN_PRESETS:
        raise ConfigError(f"unknown lagrangian preset {name!r}; choose from {sorted(LAGRANGIAN_PRESETS)}")
    k, evaluator = LAGRANGIAN_PRESETS[name]
    return Lagrangian(k, dim, evaluator, name)


def lagrangian_from_expression(source: str, dim: int, k: int) -> Lagrangian:
    """Parse a Lagrangian in ``x{a}`` with up to ``k`` primes."""
    tree = parse(source, ParseContext("lagrangian", dim, k))

    def evaluator(x):
        bindings = {variable_name(a, al): x[a][al] for a in range(dim) for al in range(k + 1)}
        return evaluate(tree, bindings)

    return Lagrangian(k, dim, evaluator, source)


# -- metrics ------------------------------------------------------------------------

def metric_from_expressions(entries, dim: int) -> MetricField:
    """Metric from a ``dim x dim`` matrix of expressions in ``x0 .. x{dim-1}``."""
    if len(entries) != dim or any(len(row) != dim for row in entries):
        raise ConfigError(f"metric expression must be a {dim}x{dim} matrix")
    context = ParseContext("metric", dim, 0)
    trees = [[parse(str(src), context) for src in row] for row in entries]

    def evaluator(x):
        bindings = {variable_name(a, 0): x[a] for a in range(dim)}
        return [[evaluate(t, bindings) for t in row] for row in trees]

    return MetricField(dim, evaluator, "expression")


# -- curves --------------------------------------------------------------------------

def curve_from_expressions(sources, kind: str = "curve"):
    """Jet-capable curve ``t -> [x^0(t), ...]`` from expressions in ``t``."""
    context = ParseContext(kind, 1, 0)
    trees = [parse(str(src), context) for src in sources]

    def gamma(t):
        return [evaluate(tree, {"t": t}) for tree in trees]

    return gamma


def _vector(params: dict, key: str, dim: int, default: float) -> np.ndarray:
    value = params.get(key, default)
    arr = np.broadcast_to(np.asarray(value, dtype=float), (dim,)) if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float)
    if arr.shape != (dim,):
        raise ConfigError(f"curve parameter {key!r} must have {dim} entries")
    return np.array(arr)


def _line(params: dict, dim: int):
    start = _vector(params, "start", dim, 0.0)
    velocity = _vector(params, "velocity", dim, 1.0)

    def gamma(t):
        return [start[a] + velocity[a] * t for a in range(dim)]

    return gamma


def _sine(params: dict, dim: int):
    amplitude = _vector(params, "amplitude", dim, 1.0)
    frequency = _vector(params, "frequency", dim, 1.0)
    phase = _vector(params, "phase", dim, 0.0)

    def gamma(t):
        return [amplitude[a] * sin(frequency[a] * t + phase[a]) for a in range(dim)]

    return gamma


def _cubic_poly(params: dict, dim: int):
    coeffs = np.asarray(params.get("coefficients", [[0.0, 0.0, 0.0, 1.0]] * dim), dtype=float)
    if coeffs.shape != (dim, 4):
        raise ConfigError(f"cubic_poly coefficients must be shaped ({dim}, 4)")

    def gamma(t):
        out = []
        for row in coeffs:
            acc = row[3]
            for c in row[2::-1]:
                acc = acc * t + c
            out.append(acc)
        return out

    return gamma


CURVE_PRESETS: dict[str, Callable] = {"line": _line, "sine": _sine, "cubic_poly": _cubic_poly}


def curve_preset(name: str, dim: int, params: dict | None = None):
    """Shipped curve by name, with optional parameters."""
    if name not in CURVE_PRESETS:
        raise ConfigError(f"unknown curve preset {name!r}; choose from {sorted(CURVE_PRESETS)}")
    return CURVE_PRESETS[name](params or {}, dim)


# -- the document ----------------------------------------------------------------------

@dataclass
class ProblemConfig:
    """Validated problem file."""

    dim: int
    k: int
    lagrangian: Lagrangian | None = None
    metric: MetricField | None = None
    curve: Callable | None = None
    variation: Callable | None = None
    t0: float = 0.0
    t1: float = 1.0
    boundary_start: np.ndarray | None = None  # (k, dim)
    boundary_end: np.ndarray | None = None  # (k, dim)
    free_final: bool = False
    initial_state: np.ndarray | None = None  # (2k, dim)
    solver: SolverConfig = field(default_factory=SolverConfig)
    csv_path: str | None = None
    samples: int = DEFAULT_SAMPLES
    raw: dict = field(default_factory=dict, repr=False)

    def require(self, *names: str) -> None:
        """Raise :class:`ConfigError` unless every named field is set."""
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"configuration lacks {', '.join(missing)}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.samples)


def _section(doc: dict, name: str, required: bool = False) -> dict | None:
    value = doc.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing section {name!r}")
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return value


def _one_of(section: dict, name: str, keys: tuple[str, str]) -> str:
    present = [k for k in keys if k in section]
    if len(present) != 1:
        raise ConfigError(f"section {name!r} needs exactly one of {keys[0]!r} or {keys[1]!r}")
    return present[0]


def _int(value: Any, what: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{what} must be an integer >= {minimum}, got {value!r}")
    return value


def _float(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{what} must be a finite number, got {value!r}")
    return float(value)


def _array(value: Any, shape: tuple[int, int], what: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a numeric array") from exc
    if arr.shape != shape:
        raise ConfigError(f"{what} must have shape {list(shape)}, got {list(arr.shape)}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} must be finite")
    return arr


def _with_position(what: str, exc: ParseError) -> ConfigError:
    return ConfigError(f"{what}: {exc}")


def config_from_dict(doc: dict, default_k: int | None = None) -> ProblemConfig:
    """Validate a parsed JSON document; ``default_k`` applies when no order is given."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    problem = _section(doc, "problem") or {}
    lag = _section(doc, "lagrangian")
    dim = _int(problem.get("dim", 1), "problem.dim", 1)

    k = problem.get("k")
    lagrangian = None
    if lag is not None:
        key = _one_of(lag, "lagrangian", ("preset", "expression"))
        if key == "preset":
            lagrangian = lagrangian_preset(str(lag["preset"]), dim)
            if k is not None and _int(k, "problem.k", 1) != lagrangian.k:
                raise ConfigError(
                    f"problem.k = {k} but preset {lag['preset']!r} has order {lagrangian.k}"
                )
            k = lagrangian.k
        else:
            k = _int(k, "problem.k", 1) if k is not None else None
            if k is None:
                raise ConfigError("an expression Lagrangian needs problem.k")
            try:
                lagrangian = lagrangian_from_expression(str(lag["expression"]), dim, k)
            except ParseError as exc:
                raise _with_position("lagrangian.expression", exc) from exc
    k = _int(k if k is not None else (default_k or 1), "problem.k", 1)
    cfg = ProblemConfig(dim=dim, k=k, lagrangian=lagrangian, raw=doc)

    metric = _section(doc, "metric")
    if metric is not None:
        key = _one_of(metric, "metric", ("preset", "expression"))
        if key == "preset":
            name = str(metric["preset"])
            if name not in METRIC_PRESETS:
                raise ConfigError(f"unknown metric preset {name!r}; choose from {sorted(METRIC_PRESETS)}")
            cfg.metric = METRIC_PRESETS[name](dim)
        else:
            try:
                cfg.metric = metric_from_expressions(metric["expression"], dim)
            except ParseError as exc:
                raise _with_position("metric.expression", exc) from exc
        if cfg.metric.dim != dim:
            raise ConfigError(f"metric {cfg.metric.name!r} has dimension {cfg.metric.dim}, problem has {dim}")

    curve = _section(doc, "curve")
    if curve is not None:
        key = _one_of(curve, "curve", ("preset", "expressions"))
        if key == "preset":
            params = {p: v for p, v in curve.items() if p != "preset"}
            cfg.curve = curve_preset(str(curve["preset"]), dim, params)
        else:
            cfg.curve = _curve_section(curve["expressions"], dim, "curve")

    variation = _section(doc, "variation")
    if variation is not None:
        if "expressions" not in variation:
            raise ConfigError("section 'variation' needs 'expressions'")
        cfg.variation = _curve_section(variation["expressions"], dim, "variation")

    interval = _section(doc, "interval") or {}
    cfg.t0 = _float(interval.get("t0", 0.0), "interval.t0")
    cfg.t1 = _float(interval.get("t1", 1.0), "interval.t1")
    if cfg.t1 <= cfg.t0:
        raise ConfigError(f"interval needs t0 < t1, got [{cfg.t0}, {cfg.t1}]")

    boundary = _section(doc, "boundary")
    if boundary is not None:
        if "initial" not in boundary or "final" not in boundary:
            raise ConfigError("section 'boundary' needs 'initial' and 'final'")
        cfg.boundary_start = _array(boundary["initial"], (dim, k), "boundary.initial").T
        if boundary["final"] == "free":
            cfg.free_final = True
        else:
            cfg.boundary_end = _array(boundary["final"], (dim, k), "boundary.final").T

    initial = _section(doc, "initial")
    if initial is not None:
        if "state" not in initial:
            raise ConfigError("section 'initial' needs 'state'")
        cfg.initial_state = _array(initial["state"], (dim, 2 * k), "initial.state").T

    solver = _section(doc, "solver")
    if solver is not None:
        valid = set(SolverConfig.__dataclass_fields__)
        bad = sorted(set(solver) - valid)
        if bad:
            raise ConfigError(f"unknown solver option(s): {', '.join(bad)}")
        try:
            cfg.solver = SolverConfig().with_overrides(**solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from exc

    output = _section(doc, "output") or {}
    if "csv" in output:
        cfg.csv_path = str(output["csv"])
    cfg.samples = _int(output.get("samples", DEFAULT_SAMPLES), "output.samples", 2)
    return cfg


def _curve_section(sources, dim: int, kind: str):
    if not isinstance(sources, list) or len(sources) != dim:
        raise ConfigError(f"{kind}.expressions must list {dim} expression(s)")
    try:
        return curve_from_expressions(sources, kind)
    except ParseError as exc:
        raise _with_position(f"{kind}.expressions", exc) from exc


def load_config(path, default_k: int | None = None) -> ProblemConfig:
    """Read and validate a JSON problem file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
    return config_from_dict(doc, default_k)
