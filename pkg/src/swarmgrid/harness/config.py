"""``<key>,<type>,<value>`` parameter files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from swarmgrid.core import ParamMap
from swarmgrid.errors import ConfigError, MissingConfig


class ParseError(ConfigError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DuplicateKey(ConfigError):
    def __init__(self, key: str, line: int):
        super().__init__(f"line {line}: duplicate key '{key}'")
        self.key = key
        self.line = line


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {
    "int": int,
    "real": float,
    "bool": _bool,
    "str": str,
    "vec": lambda t: tuple(float(v) for v in t.split(";") if v.strip()),
}


def parse_config(text: str) -> ParamMap:
    entries: dict = {}
    seen: dict[str, int] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",", 2)
        if len(parts) != 3:
            raise ParseError(n, "expected <key>,<type>,<value>")
        key, typ, value = (p.strip() for p in parts)
        if not key:
            raise ParseError(n, "empty key")
        if typ not in _PARSERS:
            raise ParseError(n, f"unknown type '{typ}'")
        if key in seen:
            raise DuplicateKey(key, n)
        try:
            entries[key] = _PARSERS[typ](value)
        except ValueError as exc:
            raise ParseError(n, f"bad {typ} value {value!r}") from exc
        if typ == "vec" and not entries[key]:
            raise ParseError(n, "empty vector")
        seen[key] = n
    return ParamMap(entries)


def read_config(path) -> ParamMap:
    return parse_config(Path(path).read_text(encoding="utf-8"))


@dataclass
class RunConfig:
    function: str
    dim: int
    optimizer: str
    params: ParamMap = field(default_factory=ParamMap)
    seed: int = 0
    budget: int | None = None
    reps: int = 1

    def __post_init__(self):
        if self.budget is None:
            self.budget = 1000 * self.dim
        if self.budget <= 0:
            raise ConfigError("budget must be positive")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.dim < 1:
            raise ConfigError("dim must be positive")

    @classmethod
    def from_params(cls, params: ParamMap) -> RunConfig:
        for key in ("function", "dim", "optimizer"):
            if key not in params:
                raise MissingConfig(f"missing required parameter '{key}'")
        return cls(
            function=params.get_str("function"),
            dim=params.get_int("dim"),
            optimizer=params.get_str("optimizer"),
            params=params,
            seed=params.get_int("seed", 0),
            budget=params.get_int("budget", None),
            reps=params.get_int("reps", 1),
        )
