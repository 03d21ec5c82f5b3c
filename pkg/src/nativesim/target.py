"""Target-platform parameters and virtual-time arithmetic.

Every timing knob of the simulated platform lives in :class:`TargetConfig`.
Costs are kept as exact rationals; virtual time itself is an integer number
of target clock cycles.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path


class ConfigError(ValueError):
    """Raised for an invalid or unreadable target configuration."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class CacheGeometry:
    total_bytes: int
    line_bytes: int
    associativity: int

    @property
    def set_count(self) -> int:
        return self.total_bytes // (self.line_bytes * self.associativity)


# arm926-class defaults: 16 KiB, 4-way, 32-byte lines for both caches.
ARM926_CACHE = CacheGeometry(total_bytes=16384, line_bytes=32, associativity=4)


@dataclass(frozen=True)
class TargetConfig:
    core_count: int = 16
    clock_hz: int = 470_000_000
    mean_instr_cycles: Fraction = Fraction(1)
    imiss_cycles: Fraction = Fraction(20)
    dmiss_cycles: Fraction = Fraction(20)
    icache: CacheGeometry = ARM926_CACHE
    dcache: CacheGeometry = ARM926_CACHE
    shared_mem_extra_cycles: Fraction = Fraction(2)
    fork_overhead_cycles: int = 0
    join_overhead_cycles: int = 0

    def with_cores(self, core_count: int) -> "TargetConfig":
        return dataclasses.replace(self, core_count=core_count)


_RATIONAL_FIELDS = ("mean_instr_cycles", "imiss_cycles", "dmiss_cycles", "shared_mem_extra_cycles")
_INT_FIELDS = ("core_count", "clock_hz", "fork_overhead_cycles", "join_overhead_cycles")
_CACHE_FIELDS = ("icache", "dcache")
_GEOMETRY_KEYS = ("total_bytes", "line_bytes", "associativity")


def _check_geometry(name: str, geo: CacheGeometry) -> None:
    for key in _GEOMETRY_KEYS:
        value = getattr(geo, key)
        if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
            raise ConfigError(f"{name}.{key}", f"must be a positive integer, got {value!r}")
    if geo.line_bytes & (geo.line_bytes - 1):
        raise ConfigError(f"{name}.line_bytes", f"must be a power of two, got {geo.line_bytes}")
    if geo.total_bytes % (geo.line_bytes * geo.associativity):
        raise ConfigError(
            f"{name}.total_bytes",
            f"{geo.total_bytes} not divisible by line_bytes*associativity "
            f"({geo.line_bytes * geo.associativity})",
        )


def validate(config: TargetConfig) -> TargetConfig:
    """Return *config* unchanged if every invariant holds, else raise ConfigError."""
    for name in _INT_FIELDS:
        value = getattr(config, name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(name, f"must be an integer, got {value!r}")
    if config.core_count < 1:
        raise ConfigError("core_count", f"must be >= 1, got {config.core_count}")
    if config.clock_hz <= 0:
        raise ConfigError("clock_hz", f"must be > 0, got {config.clock_hz}")
    for name in ("fork_overhead_cycles", "join_overhead_cycles"):
        if getattr(config, name) < 0:
            raise ConfigError(name, "must be >= 0")
    for name in _RATIONAL_FIELDS:
        value = getattr(config, name)
        if not isinstance(value, (int, Fraction)) or isinstance(value, bool):
            raise ConfigError(name, f"must be a rational number, got {value!r}")
        if value < 0:
            raise ConfigError(name, f"must be >= 0, got {value}")
    for name in _CACHE_FIELDS:
        _check_geometry(name, getattr(config, name))
    return config


def round_half_up(value: Fraction) -> int:
    """Round a non-negative rational to the nearest integer, halves upward."""
    return (2 * value.numerator + value.denominator) // (2 * value.denominator)


def cycles_to_ns(cycles: int, config: TargetConfig) -> int:
    """Convert a cycle count to integer nanoseconds at the target clock."""
    return (2 * cycles * 1_000_000_000 + config.clock_hz) // (2 * config.clock_hz)


def cycles_to_ms(cycles: int, config: TargetConfig) -> float:
    return cycles * 1000.0 / config.clock_hz


def _parse_rational(key: str, text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(key, f"not a rational number: {text!r}") from None


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ConfigError(key, f"not an integer: {text!r}") from None


def parse_config(text: str, base: TargetConfig | None = None) -> TargetConfig:
    """Parse ``key = value`` lines; keys absent from *text* keep *base* values."""
    base = base or TargetConfig()
    values: dict = {}
    geometries = {name: dataclasses.asdict(getattr(base, name)) for name in _CACHE_FIELDS}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key or not value:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        if key in seen:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        seen.add(key)
        if key in _INT_FIELDS:
            values[key] = _parse_int(key, value)
        elif key in _RATIONAL_FIELDS:
            values[key] = _parse_rational(key, value)
        else:
            cache, _, sub = key.partition(".")
            if cache not in _CACHE_FIELDS or sub not in _GEOMETRY_KEYS:
                raise ConfigError(key, f"unknown configuration key (line {lineno})")
            geometries[cache][sub] = _parse_int(key, value)
    for name in _CACHE_FIELDS:
        values[name] = CacheGeometry(**geometries[name])
    return validate(dataclasses.replace(base, **values))


def load_config(path: str | Path) -> TargetConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read configuration: {exc.strerror}") from None
    return parse_config(text)


def format_config(config: TargetConfig) -> str:
    """Render *config* in the ``key = value`` file format (inverse of parse_config)."""
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if isinstance(value, CacheGeometry):
            for key in _GEOMETRY_KEYS:
                lines.append(f"{f.name}.{key} = {getattr(value, key)}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
