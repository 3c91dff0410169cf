"""Device- and platform-level parameters.

Bitcell, platform and DRAM parameters live in flat ``key = value`` text files
with ``#`` comments. Bitcell files must list every field exactly once; platform
files may omit any key and fall back to the defaults below.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Iterator

from .errors import ParseError


class MemoryTech(enum.Enum):
    SRAM = "SRAM"
    STT_MRAM = "STT_MRAM"
    SOT_MRAM = "SOT_MRAM"

    @classmethod
    def parse(cls, text: str) -> "MemoryTech":
        key = text.strip().upper().replace("-", "_")
        aliases = {"STT": "STT_MRAM", "SOT": "SOT_MRAM"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown memory technology {text!r}") from None

    @property
    def is_mram(self) -> bool:
        return self is not MemoryTech.SRAM


class MissingKey(ParseError):
    def __init__(self, name: str):
        super().__init__(f"missing required key {name!r}")
        self.name = name


class DuplicateKey(ParseError):
    def __init__(self, name: str):
        super().__init__(f"key {name!r} given more than once")
        self.name = name


class UnknownKey(ParseError):
    def __init__(self, name: str):
        super().__init__(f"unknown key {name!r}")
        self.name = name


class NonNumeric(ParseError):
    def __init__(self, name: str, value: str):
        super().__init__(f"value for {name!r} is not numeric: {value!r}")
        self.name = name


class RangeViolation(ParseError):
    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"{name}: {detail}" if detail else f"{name} out of range")
        self.name = name


class MalformedLine(ParseError):
    pass


@dataclass(frozen=True)
class Violation:
    field: str
    bound: str
    value: object

    def __str__(self) -> str:
        return f"{self.field}={self.value!r} violates {self.bound}"


@dataclass(frozen=True)
class BitcellParams:
    """One technology's bitcell characterization.

    Latencies are in picoseconds, energies in picojoules, and ``area_norm`` is
    relative to the foundry SRAM bitcell (SRAM itself is exactly 1.0).
    """

    tech: MemoryTech
    sense_latency_ps: float
    sense_energy_pj: float
    write_latency_set_ps: float
    write_latency_reset_ps: float
    write_energy_set_pj: float
    write_energy_reset_pj: float
    fin_count_read: int
    fin_count_write: int
    area_norm: float


@dataclass(frozen=True)
class PlatformParams:
    l2_clock_hz: float = 1.481e9
    line_size_bytes: int = 128
    l2_capacity_baseline_mb: float = 3.0

    @property
    def clock_ghz(self) -> float:
        return self.l2_clock_hz / 1e9


@dataclass(frozen=True)
class DramParams:
    energy_per_access_nj: float = 70.0
    latency_per_access_ns: float = 100.0


_BITCELL_INT_FIELDS = {"fin_count_read", "fin_count_write"}
BITCELL_KEYS = tuple(f.name for f in fields(BitcellParams))


def validate_bitcell(p: BitcellParams) -> list[Violation]:
    """Return every invariant violation of ``p``; an empty list means valid."""
    out = []
    for name in ("sense_latency_ps", "sense_energy_pj",
                 "write_latency_set_ps", "write_latency_reset_ps"):
        v = getattr(p, name)
        if not v > 0:
            out.append(Violation(name, "> 0", v))
    for name in ("write_energy_set_pj", "write_energy_reset_pj"):
        v = getattr(p, name)
        if p.tech.is_mram and not v > 0:
            out.append(Violation(name, "> 0 for MRAM", v))
        elif not v >= 0:
            out.append(Violation(name, ">= 0", v))
    for name in _BITCELL_INT_FIELDS:
        v = getattr(p, name)
        if not (isinstance(v, int) and v >= 1):
            out.append(Violation(name, "integer >= 1", v))
    if not 0 < p.area_norm <= 10:
        out.append(Violation("area_norm", "in (0, 10]", p.area_norm))
    elif p.tech is MemoryTech.SRAM and p.area_norm != 1.0:
        out.append(Violation("area_norm", "== 1.0 for SRAM", p.area_norm))
    return out


def _iter_pairs(text: str) -> Iterator[tuple[int, str, str]]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedLine(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        yield lineno, key, value


def _read_pairs(text: str, allowed: tuple[str, ...]) -> dict[str, str]:
    seen: dict[str, str] = {}
    for _, key, value in _iter_pairs(text):
        if key not in allowed:
            raise UnknownKey(key)
        if key in seen:
            raise DuplicateKey(key)
        seen[key] = value
    return seen


def _to_float(name: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise NonNumeric(name, value) from None


def _to_int(name: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise NonNumeric(name, value) from None


def parse_bitcell_file(text: str) -> BitcellParams:
    pairs = _read_pairs(text, BITCELL_KEYS)
    for key in BITCELL_KEYS:
        if key not in pairs:
            raise MissingKey(key)
    try:
        tech = MemoryTech.parse(pairs["tech"])
    except ValueError as exc:
        raise RangeViolation("tech", str(exc)) from None
    values: dict[str, object] = {"tech": tech}
    for key in BITCELL_KEYS[1:]:
        conv = _to_int if key in _BITCELL_INT_FIELDS else _to_float
        values[key] = conv(key, pairs[key])
    params = BitcellParams(**values)
    problems = validate_bitcell(params)
    if problems:
        raise RangeViolation(problems[0].field, "; ".join(map(str, problems)))
    return params


def format_bitcell(p: BitcellParams) -> str:
    lines = []
    for key in BITCELL_KEYS:
        v = getattr(p, key)
        lines.append(f"{key} = {v.value if isinstance(v, MemoryTech) else repr(v)}")
    return "\n".join(lines) + "\n"


_PLATFORM_KEYS = {
    "l2_clock_hz": float,
    "line_size_bytes": int,
    "l2_capacity_baseline_mb": float,
    "dram_energy_per_access_nj": float,
    "dram_latency_per_access_ns": float,
}


def validate_platform(plat: PlatformParams, dram: DramParams) -> list[Violation]:
    out = []
    if not plat.l2_clock_hz > 0:
        out.append(Violation("l2_clock_hz", "> 0", plat.l2_clock_hz))
    ls = plat.line_size_bytes
    if not (ls >= 32 and ls & (ls - 1) == 0):
        out.append(Violation("line_size_bytes", "power of two >= 32", ls))
    if not plat.l2_capacity_baseline_mb > 0:
        out.append(Violation("l2_capacity_baseline_mb", "> 0", plat.l2_capacity_baseline_mb))
    if not dram.energy_per_access_nj > 0:
        out.append(Violation("dram_energy_per_access_nj", "> 0", dram.energy_per_access_nj))
    if not dram.latency_per_access_ns > 0:
        out.append(Violation("dram_latency_per_access_ns", "> 0", dram.latency_per_access_ns))
    return out


def parse_platform_file(text: str) -> tuple[PlatformParams, DramParams]:
    """Parse a platform/DRAM file. Every key is optional."""
    pairs = _read_pairs(text, tuple(_PLATFORM_KEYS))
    vals = {}
    for key, value in pairs.items():
        conv = _to_int if _PLATFORM_KEYS[key] is int else _to_float
        vals[key] = conv(key, value)
    dram_kw = {}
    if "dram_energy_per_access_nj" in vals:
        dram_kw["energy_per_access_nj"] = vals.pop("dram_energy_per_access_nj")
    if "dram_latency_per_access_ns" in vals:
        dram_kw["latency_per_access_ns"] = vals.pop("dram_latency_per_access_ns")
    plat, dram = PlatformParams(**vals), DramParams(**dram_kw)
    problems = validate_platform(plat, dram)
    if problems:
        raise RangeViolation(problems[0].field, "; ".join(map(str, problems)))
    return plat, dram
