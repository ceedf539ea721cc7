"""Run configuration: defaults, ``key = value`` files and overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .symbolic import PRINTABLE
from .values import pct, unpct


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    alphabet: bytes = PRINTABLE
    max_string_len: int = 8       # longest random seed
    max_solve_len: int = 8        # longest string the solver may propose
    max_iterations: int = 50      # executed test cases per function
    time_budget_ms: int = 60_000  # per function; 0 disables
    trace_op_cap: int = 1_000_000
    solver_budget: int = 1_000_000
    rng_seed: int = 0
    symbolize_all_strings: bool = True
    output_dir: str = "out"
    deterministic: bool = False   # zero out wall-clock fields in reports

    def __post_init__(self):
        if not self.alphabet:
            raise ConfigError("alphabet must be nonempty")
        for name in ("max_iterations", "trace_op_cap", "solver_budget"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_string_len", "max_solve_len", "time_budget_ms"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must not be negative")

    def with_overrides(self, **overrides) -> "Config":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


_FIELDS = {f.name: f for f in fields(Config)}


def parse_value(name: str, text: str):
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {name!r}")
    kind = _FIELDS[name].type
    text = text.strip()
    if kind == "bytes":
        return parse_alphabet(text)
    if kind == "bool":
        lowered = text.lower()
        if lowered not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{name}: expected a boolean, got {text!r}")
        return lowered in ("true", "1", "yes")
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {text!r}") from None
    return text


def parse_alphabet(text: str) -> bytes:
    """``a-d`` style ranges, ``printable``, or percent-encoded literal bytes."""
    if text == "printable":
        return PRINTABLE
    if len(text) == 3 and text[1] == "-" and text[0] <= text[2]:
        return bytes(range(ord(text[0]), ord(text[2]) + 1))
    data = unpct(text)
    if not data:
        raise ConfigError("alphabet must be nonempty")
    return bytes(sorted(set(data)))


def format_alphabet(alphabet: bytes) -> str:
    return pct(alphabet)


def load_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = parse_value(key.replace("-", "_"), value)
    return out


def resolve(file: str | Path | None = None, **flags) -> Config:
    """Defaults, then the config file, then explicit flags."""
    config = Config()
    if file is not None:
        config = replace(config, **load_config_file(file))
    return config.with_overrides(**flags)
