"""Flat ``key = value`` experiment configuration.

One pair per line, ``#`` starts a comment, keys are dotted paths such as
``params.gamma``.  Unknown keys are errors; missing keys take the defaults in
:data:`DEFAULTS`.  Floats are written back with 17 significant digits so
``parse_config(serialize_config(cfg)) == cfg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .analysis import WeightSpec
from .errors import ConfigParseError, ConfigValidationError, ParameterError
from .model import ModelParams
from .solver import PerturbationSpec, Shape

REGIME_HINTS = ("auto", "supersonic", "transonic", "nonexistent")


@dataclass(frozen=True)
class GridConfig:
    L: float | None = None  # None: design default for the regime
    n: int = 512


@dataclass(frozen=True)
class RunConfig:
    t_end: float = 20.0
    cfl: float = 0.8
    snapshot_interval: float = 0.5
    burn_in: float | None = None  # None: first 20% of the run
    well_balanced: bool = True

    @property
    def effective_burn_in(self) -> float:
        return 0.2 * self.t_end if self.burn_in is None else self.burn_in


@dataclass(frozen=True)
class PerturbationConfig:
    shape: str = "bump"
    a_rho: float = 0.01
    a_u: float = 0.01
    a_omega: float = 0.01
    x_c: float | None = None  # None: L / 4
    width: float | None = None  # None: L / 8
    theta: float = 2.0
    beta: float = 0.05

    def resolve(self, L: float) -> PerturbationSpec:
        x_c = L / 4 if self.x_c is None else self.x_c
        width = L / 8 if self.width is None else self.width
        return PerturbationSpec(
            Shape(self.shape), self.a_rho, self.a_u, self.a_omega,
            x_c=x_c, width=width, theta=self.theta, beta=self.beta,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    regime: str = "auto"
    grid: GridConfig = field(default_factory=GridConfig)
    run: RunConfig = field(default_factory=RunConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    weights: tuple[WeightSpec, ...] = (WeightSpec(2.0, 0.05, 0),)
    output_dir: str = "out"


# supersonic desk case: gamma = 1.4, rho_+ = c_+ = 1, M_+ = 1.5, u_b / u_+ = 0.9
DEFAULT_PARAMS = ModelParams(
    lam=1.0, mu=1.0, nu=1.0, K=1.0 / 1.4, gamma=1.4, rho_plus=1.0,
    u_plus=-1.5, u_b=-1.35, omega_b=0.05,
)

# key -> (section, attribute, kind)
_KEYS = {
    **{f"params.{f.name}": ("params", f.name, "float") for f in fields(ModelParams)},
    "regime": (None, "regime", "str"),
    "grid.L": ("grid", "L", "float?"),
    "grid.n": ("grid", "n", "int"),
    "run.t_end": ("run", "t_end", "float"),
    "run.cfl": ("run", "cfl", "float"),
    "run.snapshot_interval": ("run", "snapshot_interval", "float"),
    "run.burn_in": ("run", "burn_in", "float?"),
    "run.well_balanced": ("run", "well_balanced", "bool"),
    "perturbation.shape": ("perturbation", "shape", "str"),
    "perturbation.a_rho": ("perturbation", "a_rho", "float"),
    "perturbation.a_u": ("perturbation", "a_u", "float"),
    "perturbation.a_omega": ("perturbation", "a_omega", "float"),
    "perturbation.x_c": ("perturbation", "x_c", "float?"),
    "perturbation.width": ("perturbation", "width", "float?"),
    "perturbation.theta": ("perturbation", "theta", "float"),
    "perturbation.beta": ("perturbation", "beta", "float"),
    "weights": (None, "weights", "weights"),
    "output_dir": (None, "output_dir", "str"),
}


def _default_values() -> dict:
    cfg = ExperimentConfig(DEFAULT_PARAMS)
    return {key: _get(cfg, key) for key in _KEYS}


def _get(cfg: ExperimentConfig, key: str):
    section, attr, _ = _KEYS[key]
    obj = cfg if section is None else getattr(cfg, section)
    return getattr(obj, attr)


def _convert(kind: str, raw: str, line: int):
    try:
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        if kind == "float?":
            return None if raw == "auto" else _convert("float", raw, line)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError("expected true/false")
        if kind == "weights":
            specs = []
            for item in raw.split():
                a, b, o = item.split(":")
                specs.append((float(a), float(b), int(o)))
            if not specs:
                raise ValueError("empty weight list")
            return tuple(specs)
        return raw
    except ValueError as exc:
        raise ConfigParseError(line, f"bad {kind} value {raw!r}: {exc}") from None


def parse_config(text: str) -> ExperimentConfig:
    values = _default_values()
    values["weights"] = tuple((w.alpha, w.beta, w.order) for w in values["weights"])
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigParseError(lineno, f"expected 'key = value', got {line!r}")
        if key not in _KEYS:
            raise ConfigParseError(lineno, f"unknown key {key!r}")
        if key in seen:
            raise ConfigParseError(lineno, f"duplicate key {key!r} (first on line {seen[key]})")
        seen[key] = lineno
        values[key] = _convert(_KEYS[key][2], raw, lineno)
    return _build(values)


def _build(values: dict) -> ExperimentConfig:
    sections = {"params": {}, "grid": {}, "run": {}, "perturbation": {}}
    top = {}
    for key, v in values.items():
        section, attr, _ = _KEYS[key]
        (top if section is None else sections[section])[attr] = v
    try:
        params = ModelParams(**sections["params"])
    except ParameterError as exc:
        raise ConfigValidationError(f"params.{exc.field}: {exc}") from None
    try:
        weights = tuple(WeightSpec(*w) for w in top.pop("weights"))
    except ValueError as exc:
        raise ConfigValidationError(f"weights: {exc}") from None
    cfg = ExperimentConfig(
        params=params,
        grid=GridConfig(**sections["grid"]),
        run=RunConfig(**sections["run"]),
        perturbation=PerturbationConfig(**sections["perturbation"]),
        weights=weights,
        **top,
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    def bad(key, msg):
        raise ConfigValidationError(f"{key}: {msg}")

    if cfg.regime not in REGIME_HINTS:
        bad("regime", f"must be one of {REGIME_HINTS}")
    if cfg.grid.L is not None and not cfg.grid.L > 0:
        bad("grid.L", "must be > 0 or auto")
    if cfg.grid.n < 16:
        bad("grid.n", "must be >= 16")
    r = cfg.run
    if not r.t_end > 0:
        bad("run.t_end", "must be > 0")
    if not 0 < r.cfl <= 1:
        bad("run.cfl", "must lie in (0, 1]")
    if not r.snapshot_interval > 0:
        bad("run.snapshot_interval", "must be > 0")
    if r.burn_in is not None and r.burn_in < 0:
        bad("run.burn_in", "must be >= 0")
    if not r.t_end > r.effective_burn_in:
        bad("run.burn_in", "t_end must exceed burn_in")
    pc = cfg.perturbation
    if pc.shape not in {s.value for s in Shape}:
        bad("perturbation.shape", f"must be one of {[s.value for s in Shape]}")
    for name in ("a_rho", "a_u", "a_omega"):
        if getattr(pc, name) < 0:
            bad(f"perturbation.{name}", "must be >= 0")
    if pc.width is not None and not pc.width > 0:
        bad("perturbation.width", "must be > 0")
    if pc.theta < 0 or pc.beta < 0:
        bad("perturbation.theta", "theta and beta must be >= 0")
    if not cfg.output_dir:
        bad("output_dir", "must be non-empty")


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, tuple):
        return " ".join(f"{w.alpha:.17g}:{w.beta:.17g}:{w.order}" for w in v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{key} = {_fmt(_get(cfg, key))}\n" for key in _KEYS)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def with_output_dir(cfg: ExperimentConfig, out) -> ExperimentConfig:
    return replace(cfg, output_dir=str(out))
