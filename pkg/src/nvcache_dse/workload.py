"""Workload memory statistics and synthetic address traces."""
from __future__ import annotations

import csv
import enum
import gzip
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import ParseError

VERSION_LINE = "# nvcache-dse v1"

PROFILE_HEADER = ("name", "phase", "batch_size", "l2_reads", "l2_writes",
                  "dram_reads", "dram_writes", "exec_time_s")


class Phase(enum.Enum):
    Inference = "Inference"
    Training = "Training"
    HPC = "HPC"


class Op(enum.Enum):
    Read = "R"
    Write = "W"


class SchemaMismatch(ParseError):
    pass


class NegativeCount(ParseError):
    def __init__(self, row: int, column: str):
        super().__init__(f"row {row}: negative count in column {column!r}")
        self.row, self.column = row, column


class ZeroWrites(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadStats:
    name: str
    phase: Phase
    batch_size: int
    l2_reads: int
    l2_writes: int
    dram_reads: int = 0
    dram_writes: int = 0
    exec_time_s: Optional[float] = None

    @property
    def label(self) -> str:
        return f"{self.name}/{self.phase.value}/b{self.batch_size}"

    @property
    def dram_transactions(self) -> int:
        return self.dram_reads + self.dram_writes

    def scaled(self, k: int) -> "WorkloadStats":
        """Copy with every transaction count multiplied by ``k``."""
        return WorkloadStats(self.name, self.phase, self.batch_size,
                             self.l2_reads * k, self.l2_writes * k,
                             self.dram_reads * k, self.dram_writes * k, self.exec_time_s)


def rw_ratio(s: WorkloadStats) -> float:
    if s.l2_writes == 0:
        raise ZeroWrites(f"{s.label}: no L2 writes, read/write ratio undefined")
    return s.l2_reads / s.l2_writes


def _count(value: str, lineno: int, column: str) -> int:
    try:
        x = float(value)
    except ValueError:
        raise SchemaMismatch(f"row {lineno}: {column} is not numeric: {value!r}") from None
    if x < 0:
        raise NegativeCount(lineno, column)
    if not (math.isfinite(x) and x == int(x)):
        raise SchemaMismatch(f"row {lineno}: {column} must be a whole count, got {value!r}")
    return int(x)


def _check_version(line: str) -> None:
    if line.startswith("# nvcache-dse") and line.strip() != VERSION_LINE:
        raise SchemaMismatch(f"unsupported format version: {line.strip()!r}")


def parse_profile_csv(text: str) -> list[WorkloadStats]:
    """Parse profiler-export CSV rows into ``WorkloadStats``.

    Lines beginning with ``#`` are comments; a ``# nvcache-dse`` line must
    name version v1. ``exec_time_s`` may be left empty.
    """
    lines = []
    for raw in text.splitlines():
        if raw.lstrip().startswith("#"):
            _check_version(raw.lstrip())
            continue
        if raw.strip():
            lines.append(raw)
    if not lines:
        raise SchemaMismatch("empty profile document")
    rows = list(csv.reader(lines))
    if tuple(c.strip() for c in rows[0]) != PROFILE_HEADER:
        raise SchemaMismatch(f"expected header {','.join(PROFILE_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(PROFILE_HEADER):
            raise SchemaMismatch(f"row {lineno}: expected {len(PROFILE_HEADER)} columns")
        row = [c.strip() for c in row]
        try:
            phase = Phase(row[1])
        except ValueError:
            raise SchemaMismatch(f"row {lineno}: unknown phase {row[1]!r}") from None
        counts = {col: _count(row[i], lineno, col) for i, col in enumerate(PROFILE_HEADER)
                  if 2 <= i <= 6}
        if counts["batch_size"] < 1:
            raise SchemaMismatch(f"row {lineno}: batch_size must be >= 1")
        exec_time = None
        if row[7]:
            try:
                exec_time = float(row[7])
            except ValueError:
                raise SchemaMismatch(f"row {lineno}: exec_time_s not numeric") from None
            if not exec_time > 0:
                raise SchemaMismatch(f"row {lineno}: exec_time_s must be > 0")
        out.append(WorkloadStats(row[0], phase, exec_time_s=exec_time, **counts))
    return out


def format_profile_csv(stats: Iterable[WorkloadStats]) -> str:
    buf = io.StringIO()
    buf.write(VERSION_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for s in stats:
        w.writerow([s.name, s.phase.value, s.batch_size, s.l2_reads, s.l2_writes,
                    s.dram_reads, s.dram_writes,
                    "" if s.exec_time_s is None else repr(s.exec_time_s)])
    return buf.getvalue()


@dataclass(frozen=True)
class TraceEvent:
    op: Op
    address: int


@dataclass(frozen=True)
class SyntheticTraceSpec:
    """Two-region (hot/cold) random address stream.

    The hot region is the first ``hot_fraction * working_set_bytes`` bytes;
    each event lands there with ``hot_access_probability`` and otherwise in
    the remaining cold bytes (or in the hot region when there are none).
    """

    length: int
    working_set_bytes: int
    hot_fraction: float = 0.1
    hot_access_probability: float = 0.9
    read_probability: float = 0.8
    seed: int = 0
    line_size_bytes: int = 128

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("length must be > 0")
        if self.working_set_bytes <= 0 or self.working_set_bytes >= 2**64:
            raise ValueError("working_set_bytes must be in (0, 2**64)")
        if not 0 < self.hot_fraction <= 1:
            raise ValueError("hot_fraction must be in (0, 1]")
        for name in ("hot_access_probability", "read_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.hot_bytes < self.line_size_bytes:
            raise ValueError("hot region must hold at least one cache line")

    @property
    def hot_bytes(self) -> int:
        return int(self.hot_fraction * self.working_set_bytes)


_CHUNK = 1 << 16


def gen_trace(spec: SyntheticTraceSpec) -> Iterator[TraceEvent]:
    """Yield ``spec.length`` events, deterministic for a given seed."""
    rng = np.random.default_rng(spec.seed)
    hot = spec.hot_bytes
    cold = spec.working_set_bytes - hot
    remaining = spec.length
    while remaining:
        n = min(_CHUNK, remaining)
        remaining -= n
        is_hot = rng.random(n) < spec.hot_access_probability
        is_read = rng.random(n) < spec.read_probability
        hot_addr = rng.integers(0, hot, n, dtype=np.uint64)
        if cold > 0:
            cold_addr = rng.integers(hot, spec.working_set_bytes, n, dtype=np.uint64)
            addr = np.where(is_hot, hot_addr, cold_addr)
        else:
            addr = hot_addr
        for r, a in zip(is_read.tolist(), addr.tolist()):
            yield TraceEvent(Op.Read if r else Op.Write, a)


def format_trace_line(ev: TraceEvent) -> str:
    return f"{ev.op.value} {ev.address:#x}"


def parse_trace_line(line: str, lineno: int = 0) -> Optional[TraceEvent]:
    line = line.strip()
    if not line or line.startswith("#"):
        if line.startswith("# nvcache-dse"):
            _check_version(line)
        return None
    parts = line.split()
    if len(parts) != 2 or parts[0] not in ("R", "W"):
        raise SchemaMismatch(f"trace line {lineno}: expected 'R|W <hex-address>'")
    try:
        addr = int(parts[1], 16)
    except ValueError:
        raise SchemaMismatch(f"trace line {lineno}: bad address {parts[1]!r}") from None
    if not 0 <= addr < 2**64:
        raise SchemaMismatch(f"trace line {lineno}: address out of 64-bit range")
    return TraceEvent(Op(parts[0]), addr)


def iter_trace_lines(lines: Iterable[str]) -> Iterator[TraceEvent]:
    for lineno, line in enumerate(lines, 1):
        ev = parse_trace_line(line, lineno)
        if ev is not None:
            yield ev


def read_trace(path) -> list[TraceEvent]:
    """Load a text trace; ``.gz`` files are decompressed transparently."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return list(iter_trace_lines(fh))


def write_trace(events: Iterable[TraceEvent], fh) -> int:
    fh.write(VERSION_LINE + "\n")
    n = 0
    for ev in events:
        fh.write(format_trace_line(ev) + "\n")
        n += 1
    return n
