"""Run configuration: TOML file plus command-line overrides."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("parameter_in_a", "pseudo_arclength")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class RunConfig:
    M: int = 10
    N: int = 16
    nu1: float = 1.02
    nu2: float = 1.02
    lambda2_from: float = 0.10
    lambda2_to: float = 0.245
    a_from: float = -0.005
    a_to: float = 0.005
    a_step: float = 0.002
    mode: str = "parameter_in_a"
    R: float = 1e-4
    newton_tol: float = 1e-11
    n_scan: int | None = None
    out: str = "out"
    threads: int = 1
    seed: int = 0
    search: bool = True
    search_nu: list = field(default_factory=lambda: [1.05, 1.02, 1.1])
    search_K: list = field(default_factory=lambda: [[10, 16], [12, 20], [14, 22], [16, 24]])

    @property
    def K(self) -> tuple:
        return (self.M, self.N)

    def validate(self) -> "RunConfig":
        if self.M < 1 or self.N < 1:
            raise ConfigError("M and N must be >= 1")
        if self.nu1 < 1 or self.nu2 < 1:
            raise ConfigError("weights must be >= 1")
        if not self.R > 0:
            raise ConfigError("R must be > 0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not self.a_step > 0:
            raise ConfigError("a_step must be > 0")
        if self.a_to <= self.a_from:
            raise ConfigError("a_to must exceed a_from")
        if self.lambda2_from >= self.lambda2_to:
            raise ConfigError("lambda2_from must be below lambda2_to")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.newton_tol > 0:
            raise ConfigError("newton_tol must be > 0")
        if self.n_scan is not None and self.n_scan < 1:
            raise ConfigError("n_scan must be >= 1")
        for nu in self.search_nu:
            if nu < 1:
                raise ConfigError("search weights must be >= 1")
        for k in self.search_K:
            if len(k) != 2 or min(k) < 1:
                raise ConfigError("search truncations must be pairs of positive integers")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "truncation": ("M", "N", "nu1", "nu2"),
    "continuation": ("lambda2_from", "lambda2_to", "a_from", "a_to", "a_step", "mode", "newton_tol"),
    "validation": ("R", "n_scan", "search", "search_nu", "search_K"),
    "run": ("out", "threads", "seed"),
}


def _coerce(name: str, value):
    types = {f.name: f.type for f in fields(RunConfig)}
    t = types[name]
    try:
        if t == "int":
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if t == "float":
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if t == "bool":
            if not isinstance(value, bool):
                raise ValueError
            return value
        if t == "str":
            if not isinstance(value, str):
                raise ValueError
            return value
        if t == "int | None":
            return None if value is None else _coerce_int(value)
        if t == "list":
            return list(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None
    return value


def _coerce_int(v):
    if isinstance(v, bool) or int(v) != v:
        raise ValueError
    return int(v)


def from_mapping(data: dict, base: RunConfig | None = None) -> RunConfig:
    """Sections as in ``desk.toml``; top-level keys are accepted too."""
    cfg = RunConfig() if base is None else RunConfig(**asdict(base))
    known = {f.name for f in fields(RunConfig)}
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in _SECTIONS:
                raise ConfigError(f"unknown section [{key}]")
            for k, v in value.items():
                if k not in _SECTIONS[key]:
                    raise ConfigError(f"unknown key {k!r} in [{key}]")
                flat[k] = v
        elif key in known:
            flat[key] = value
        else:
            raise ConfigError(f"unknown key {key!r}")
    for k, v in flat.items():
        setattr(cfg, k, _coerce(k, v))
    return cfg.validate()


def load(path: str, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_mapping(data, base)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    out = RunConfig(**asdict(cfg))
    for k, v in overrides.items():
        if v is not None:
            setattr(out, k, _coerce(k, v))
    return out.validate()
