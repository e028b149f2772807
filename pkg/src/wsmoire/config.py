"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment.  Numeric values may be plain
literals or small arithmetic expressions over literals and ``pi`` (for
example ``12.6*pi`` or ``1/10.55``).  Every key must be known to the command
being run; anything else is rejected before computation starts.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .dynamics import DENSE, STEPWISE, EvolutionConfig
from .errors import ConfigError, WsMoireError
from .lattice import LatticeSpec, Linear, Logarithmic, flat_state, gaussian_state

COMMANDS = ("phase-diagram", "ep-curve", "evolve", "moire", "spectrum")

_COMMON = {"run.threads", "run.seed"}
_LATTICE = {"lattice.J", "lattice.beta", "lattice.n_sites", "potential.kind",
            "potential.omega", "potential.gamma", "potential.tau"}
_EVOLUTION = {"state.kind", "state.width", "evolution.t_max", "evolution.n_frames",
              "evolution.tolerance", "evolution.method"}

KNOWN_KEYS = {
    "phase-diagram": _COMMON | {
        "grid.j_min", "grid.j_max", "grid.j_count",
        "grid.beta_min", "grid.beta_max", "grid.beta_count", "classify.tol",
        "overlay.ratio_min", "overlay.ratio_max", "overlay.ratio_count", "overlay.n_max",
    },
    "ep-curve": _COMMON | {"lattice.J", "lattice.beta", "omega.min", "omega.max", "ep.tol"},
    "evolve": _COMMON | _LATTICE | _EVOLUTION,
    "moire": _COMMON | _LATTICE | _EVOLUTION | {
        "moire.threshold_quantile", "moire.edge_exclusion", "classify.tol",
    },
    "spectrum": _COMMON | _LATTICE | {"spectrum.n_levels"},
}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    raise ValueError("unsupported expression")


def parse_number(text: str) -> float:
    try:
        value = _eval_node(ast.parse(text.strip(), mode="eval").body)
        value = float(value)
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc
    if not math.isfinite(value):
        raise ConfigError(f"not a finite number: {text!r}")
    return value


@dataclass
class RunConfig:
    command: str
    values: dict
    source: Optional[Path] = None

    def has(self, key: str) -> bool:
        return key in self.values

    def text(self, key: str, default: Optional[str] = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default

    def number(self, key: str, default: Optional[float] = None) -> float:
        if key in self.values:
            return parse_number(self.values[key])
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return float(default)

    def integer(self, key: str, default: Optional[int] = None) -> int:
        value = self.number(key, default)
        if value != int(value):
            raise ConfigError(f"{key} must be an integer, got {self.values[key]!r}")
        return int(value)

    @property
    def threads(self) -> int:
        n = self.integer("run.threads", 1)
        if n < 1:
            raise ConfigError("run.threads must be >= 1")
        return n

    @property
    def seed(self) -> int:
        return self.integer("run.seed", 0)

    def lattice(self) -> LatticeSpec:
        kind = self.text("potential.kind")
        try:
            if kind == "linear":
                pot = Linear(self.number("potential.omega"))
            elif kind == "logarithmic":
                pot = Logarithmic(self.number("potential.gamma"), self.number("potential.tau"))
            else:
                raise ConfigError(f"potential.kind must be linear or logarithmic, got {kind!r}")
            return LatticeSpec(self.number("lattice.J"), self.number("lattice.beta"),
                               self.integer("lattice.n_sites"), pot)
        except WsMoireError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def initial_state(self, n_sites: int):
        kind = self.text("state.kind", "gaussian")
        if kind == "gaussian":
            return gaussian_state(n_sites, self.number("state.width", 0.01))
        if kind == "flat":
            return flat_state(n_sites)
        raise ConfigError(f"state.kind must be gaussian or flat, got {kind!r}")

    def evolution(self) -> EvolutionConfig:
        method = self.text("evolution.method", "auto")
        methods = {"auto": None, "dense": DENSE, "stepwise": STEPWISE}
        if method not in methods:
            raise ConfigError(f"evolution.method must be one of {sorted(methods)}, got {method!r}")
        try:
            return EvolutionConfig(
                t_max=self.number("evolution.t_max"),
                n_frames=self.integer("evolution.n_frames", 400),
                tolerance=self.number("evolution.tolerance", 1e-10),
                method=methods[method],
            )
        except WsMoireError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def parse_config(text: str, command: str, source: Optional[Path] = None) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key not in KNOWN_KEYS[command]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for {command}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return RunConfig(command, values, source)


def load_config(path, command: str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, command, path)
