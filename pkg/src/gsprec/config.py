"""Run configuration and its flat ``key = value`` file format.

Blank lines and ``#`` comments are ignored; keys must match
:class:`RunConfig` field names exactly. List-valued keys take
comma-separated values. Relative ``data_path``/``cache_dir`` entries resolve
against the config file's directory.
"""

from __future__ import annotations

import codecs
import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

from .ingest import ColumnFormat

ABLATIONS = ("full", "no-bandpass", "no-lowpass", "no-seq")
SPLIT_STRATEGIES = ("random-per-user", "temporal-per-user")
SWEEP_KEYS = ("r", "center", "width", "phi")
# column overrides; empty means "use the format preset"
_OPTIONAL = ("delimiter", "user_col", "item_col", "time_col", "skip_header")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    data_path: str = ""
    data_format: str = "ml100k"
    delimiter: str | None = None
    user_col: int | None = None
    item_col: int | None = None
    time_col: int | None = None
    skip_header: bool | None = None
    split_ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0
    split_strategy: str = "random-per-user"
    alpha: float = 0.4
    depth: int = 2
    r: int = 32
    center: float = 0.2
    width: float = 0.1
    phi: float = 0.5
    ablation: str = "full"
    ks: tuple = (5, 10, 20)
    cache_dir: str = ""
    threads: int = 1
    eig_tol: float = 1e-8
    eig_max_iter: int = 0
    block_size: int = 2048
    manifest_path: str = ""
    item_graph_dump: str = ""

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.split_strategy not in SPLIT_STRATEGIES:
            raise ConfigError(f"split_strategy must be one of {SPLIT_STRATEGIES}, got {self.split_strategy!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.r < 1:
            raise ConfigError("r must be >= 1")
        if not (0.0 <= self.center <= 1.0):
            raise ConfigError("center must lie in [0, 1]")
        if not self.width > 0:
            raise ConfigError("width must be positive")
        if not (0.0 <= self.phi <= 1.0):
            raise ConfigError("phi must lie in [0, 1]")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split_ratios must be three values summing to 1, got {self.split_ratios}")
        if not self.ks or min(self.ks) < 1:
            raise ConfigError("ks must be positive integers")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def column_format(self) -> ColumnFormat:
        base = ColumnFormat.preset(self.data_format) if self.data_format != "custom" else ColumnFormat()
        overrides = {
            name: getattr(self, name)
            for name in _OPTIONAL
            if getattr(self, name) is not None
        }
        return dataclasses.replace(base, **overrides)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def items(self):
        for f in dataclasses.fields(self):
            yield f.name, getattr(self, f.name)

    def echo(self) -> str:
        return "\n".join(f"{k} = {format_value(v)}" for k, v in self.items()) + "\n"


def _field_types():
    return {f.name: f for f in dataclasses.fields(RunConfig)}


def format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, str):
        return v.encode("unicode_escape").decode("ascii")
    return repr(v)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_value(name: str, text: str):
    """Convert the raw text of ``name`` according to its RunConfig default's type."""
    fields = _field_types()
    default = fields[name].default
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    if name in _OPTIONAL and text == "":
        return None
    if name in ("split_ratios",):
        return tuple(float(x) for x in text.split(","))
    if name == "ks":
        return tuple(int(x) for x in text.split(","))
    if name == "delimiter":
        return codecs.decode(text, "unicode_escape")
    if name == "skip_header":
        return _parse_bool(text)
    if name in ("user_col", "item_col", "time_col"):
        return int(text)
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def read_key_values(path) -> dict:
    """Raw ``key -> text`` pairs from a flat key-value file."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        # an inline comment needs whitespace before '#'
        for marker in (" #", "\t#"):
            if marker in value:
                value = value.split(marker, 1)[0]
        out[key] = value.strip()
    return out


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    raw = read_key_values(path)
    known = _field_types()
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    values = {}
    for key, text in raw.items():
        try:
            values[key] = parse_value(key, text)
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key}: {exc}") from None
    for key in ("data_path", "cache_dir", "manifest_path", "item_graph_dump"):
        if values.get(key) and not os.path.isabs(values[key]):
            values[key] = str((path.parent / values[key]).resolve())
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_grid(path) -> dict:
    """Sweep grid: each key in ('r', 'center', 'width', 'phi') with comma-separated values."""
    raw = read_key_values(path)
    unknown = sorted(set(raw) - set(SWEEP_KEYS))
    if unknown:
        raise ConfigError(f"{path}: grid keys must be among {SWEEP_KEYS}, got {unknown}")
    grid = {}
    for key, text in raw.items():
        cast = int if key == "r" else float
        try:
            values = [cast(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key}: {exc}") from None
        if not values:
            raise ConfigError(f"{path}: empty value list for {key}")
        grid[key] = sorted(set(values))
    return grid
