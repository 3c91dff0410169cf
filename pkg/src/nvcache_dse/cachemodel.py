"""Anchored cache PPA model.

Cache-level latency, energy, leakage and area come from a table of anchor
points per (technology, optimization target, access type) curve. Between
anchors each field is interpolated linearly in log(value) vs log(capacity);
requests outside a curve's anchor range are errors, never extrapolated.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from bisect import bisect_left
from dataclasses import dataclass, fields
from typing import Iterable, Iterator

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import ModelRangeError, ParseError
from .techmodel import MemoryTech


class OptTarget(enum.Enum):
    """Optimization target handed to the cache estimator.

    The first eight members form the tuner's sweep set. ``EDAP`` labels a
    curve that has already been EDAP-tuned, such as the shipped dataset.
    """

    ReadLatency = "ReadLatency"
    WriteLatency = "WriteLatency"
    ReadEnergy = "ReadEnergy"
    WriteEnergy = "WriteEnergy"
    ReadEDP = "ReadEDP"
    WriteEDP = "WriteEDP"
    Area = "Area"
    Leakage = "Leakage"
    EDAP = "EDAP"


SWEEP_TARGETS = tuple(o for o in OptTarget if o is not OptTarget.EDAP)


class AccessType(enum.Enum):
    Normal = "Normal"
    Fast = "Fast"
    Sequential = "Sequential"


@dataclass(frozen=True)
class CachePPA:
    tech: MemoryTech
    capacity_mb: float
    read_latency_ns: float
    write_latency_ns: float
    read_energy_nj: float
    write_energy_nj: float
    leakage_power_mw: float
    area_mm2: float

    def __post_init__(self):
        for f in PPA_FIELDS + ("capacity_mb",):
            v = getattr(self, f)
            ok = v >= 0 if f == "leakage_power_mw" else v > 0
            if not (ok and math.isfinite(v)):
                raise ValueError(f"CachePPA.{f} must be positive and finite, got {v!r}")

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in PPA_FIELDS)


PPA_FIELDS = tuple(f.name for f in fields(CachePPA))[2:]

ANCHOR_HEADER = ("tech", "opt", "acc", "capacity_mb", "read_lat_ns", "write_lat_ns",
                 "read_e_nj", "write_e_nj", "leak_mw", "area_mm2")

CurveKey = tuple[MemoryTech, OptTarget, AccessType]


class SchemaMismatch(ParseError):
    pass


class DuplicateCapacity(ParseError):
    def __init__(self, key: CurveKey, capacity: float):
        tech, opt, acc = key
        super().__init__(f"curve ({tech.value},{opt.value},{acc.value}) "
                         f"has two anchors at {capacity:g} MB")
        self.key, self.capacity = key, capacity


class NonMonotoneArea(ParseError):
    def __init__(self, key: CurveKey, capacity: float):
        tech, opt, acc = key
        super().__init__(f"curve ({tech.value},{opt.value},{acc.value}): area does not "
                         f"increase at {capacity:g} MB")
        self.key, self.capacity = key, capacity


class OutOfRange(ModelRangeError):
    def __init__(self, capacity: float, lo: float, hi: float):
        super().__init__(f"capacity {capacity:g} MB outside anchor range [{lo:g}, {hi:g}]")
        self.capacity, self.lo, self.hi = capacity, lo, hi


class UnknownCurve(ModelRangeError):
    def __init__(self, tech, opt, acc):
        super().__init__(f"no anchor curve for ({tech.value},{opt.value},{acc.value})")
        self.key = (tech, opt, acc)


def _check_curve(key: CurveKey, points: list[CachePPA]) -> None:
    for prev, cur in zip(points, points[1:]):
        if cur.capacity_mb == prev.capacity_mb:
            raise DuplicateCapacity(key, cur.capacity_mb)
        if not cur.area_mm2 > prev.area_mm2:
            raise NonMonotoneArea(key, cur.capacity_mb)


class AnchorCurveSet:
    """Immutable mapping from curve key to capacity-sorted anchor points."""

    def __init__(self, curves: dict[CurveKey, Iterable[CachePPA]]):
        built = {}
        for key, pts in curves.items():
            pts = sorted(pts, key=lambda p: p.capacity_mb)
            if not pts:
                raise SchemaMismatch("empty anchor curve")
            _check_curve(key, pts)
            built[key] = tuple(pts)
        self._curves = built

    @classmethod
    def from_points(cls, points: Iterable[tuple[MemoryTech, OptTarget, AccessType, CachePPA]]):
        grouped: dict[CurveKey, list[CachePPA]] = {}
        for tech, opt, acc, ppa in points:
            grouped.setdefault((tech, opt, acc), []).append(ppa)
        return cls(grouped)

    def curve(self, tech: MemoryTech, opt: OptTarget, acc: AccessType) -> tuple[CachePPA, ...]:
        try:
            return self._curves[(tech, opt, acc)]
        except KeyError:
            raise UnknownCurve(tech, opt, acc) from None

    def keys(self) -> list[CurveKey]:
        return list(self._curves)

    def techs(self) -> list[MemoryTech]:
        return [t for t in MemoryTech if any(k[0] is t for k in self._curves)]

    def opts(self) -> list[OptTarget]:
        return [o for o in OptTarget if any(k[1] is o for k in self._curves)]

    def accs(self) -> list[AccessType]:
        return [a for a in AccessType if any(k[2] is a for k in self._curves)]

    def __contains__(self, key) -> bool:
        return key in self._curves

    def __iter__(self) -> Iterator[tuple[CurveKey, tuple[CachePPA, ...]]]:
        return iter(self._curves.items())

    def __len__(self) -> int:
        return len(self._curves)


def _strip_comments(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def _enum_cell(enum_cls, value: str, lineno: int):
    try:
        if enum_cls is MemoryTech:
            return MemoryTech.parse(value)
        return enum_cls(value.strip())
    except ValueError:
        raise SchemaMismatch(f"row {lineno}: bad {enum_cls.__name__} {value!r}") from None


def load_anchor_curves(text: str) -> AnchorCurveSet:
    """Parse the anchor CSV. ``#`` starts a comment anywhere on a line."""
    lines = _strip_comments(text)
    if not lines:
        raise SchemaMismatch("empty anchor document")
    header = tuple(c.strip() for c in lines[0].split(","))
    if header != ANCHOR_HEADER:
        raise SchemaMismatch(f"expected header {','.join(ANCHOR_HEADER)}")
    points = []
    for lineno, row in enumerate(csv.reader(lines[1:]), 2):
        if len(row) != len(ANCHOR_HEADER):
            raise SchemaMismatch(f"row {lineno}: expected {len(ANCHOR_HEADER)} columns")
        tech = _enum_cell(MemoryTech, row[0], lineno)
        opt = _enum_cell(OptTarget, row[1], lineno)
        acc = _enum_cell(AccessType, row[2], lineno)
        try:
            nums = [float(c) for c in row[3:]]
            ppa = CachePPA(tech, *nums)
        except ValueError as exc:
            raise SchemaMismatch(f"row {lineno}: {exc}") from None
        points.append((tech, opt, acc, ppa))
    return AnchorCurveSet.from_points(points)


def format_anchor_curves(curves: AnchorCurveSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ANCHOR_HEADER)
    for (tech, opt, acc), pts in curves:
        for p in pts:
            w.writerow([tech.value, opt.value, acc.value, repr(p.capacity_mb),
                        *(repr(v) for v in p.values())])
    return buf.getvalue()


def _loglog(c: float, c0: float, c1: float, v0: float, v1: float) -> float:
    w = math.log(c / c0) / math.log(c1 / c0)
    if v0 <= 0 or v1 <= 0:
        # log undefined at zero leakage; fall back to linear in the weight
        v = (1 - w) * v0 + w * v1
    else:
        v = math.exp((1 - w) * math.log(v0) + w * math.log(v1))
    return min(max(v, min(v0, v1)), max(v0, v1))


def interpolate_curve(points: tuple[CachePPA, ...], capacity_mb: float) -> CachePPA:
    lo, hi = points[0].capacity_mb, points[-1].capacity_mb
    if not (math.isfinite(capacity_mb) and lo <= capacity_mb <= hi):
        raise OutOfRange(capacity_mb, lo, hi)
    caps = [p.capacity_mb for p in points]
    i = bisect_left(caps, capacity_mb)
    if caps[i] == capacity_mb:
        return points[i]
    a, b = points[i - 1], points[i]
    vals = [_loglog(capacity_mb, a.capacity_mb, b.capacity_mb, va, vb)
            for va, vb in zip(a.values(), b.values())]
    return CachePPA(a.tech, capacity_mb, *vals)


def estimate_ppa(curves: AnchorCurveSet, tech: MemoryTech, capacity_mb: float,
                 opt: OptTarget = OptTarget.EDAP,
                 acc: AccessType = AccessType.Normal) -> CachePPA:
    return interpolate_curve(curves.curve(tech, opt, acc), capacity_mb)


def area_at(curves: AnchorCurveSet, tech: MemoryTech, capacity_mb: float,
            opt: OptTarget = OptTarget.EDAP, acc: AccessType = AccessType.Normal) -> float:
    return estimate_ppa(curves, tech, capacity_mb, opt, acc).area_mm2


class AnchoredPPAModel(RegressorMixin, BaseEstimator):
    """Log-log anchored interpolant as a scikit-learn regressor.

    ``fit(X, y)`` takes anchor capacities ``X`` (n_samples, 1) in MB and the
    PPA fields ``y`` (n_samples, 6) in ``PPA_FIELDS`` order. ``predict``
    returns the same six columns for new capacities.

    Parameters
    ----------
    tech : str
        Technology label attached to the fitted anchors.
    """

    def __init__(self, tech="SRAM"):
        self.tech = tech

    def fit(self, X, y):
        X = check_array(X, ensure_2d=False).reshape(-1)
        y = check_array(y)
        if y.shape != (X.shape[0], len(PPA_FIELDS)):
            raise ValueError(f"y must have shape ({X.shape[0]}, {len(PPA_FIELDS)})")
        tech = MemoryTech.parse(self.tech)
        order = np.argsort(X, kind="stable")
        pts = [CachePPA(tech, float(X[i]), *map(float, y[i])) for i in order]
        _check_curve((tech, OptTarget.EDAP, AccessType.Normal), pts)
        self.anchors_ = tuple(pts)
        self.capacity_range_ = (pts[0].capacity_mb, pts[-1].capacity_mb)
        self.n_features_in_ = 1
        return self

    @classmethod
    def from_curve(cls, curves: AnchorCurveSet, tech: MemoryTech,
                   opt: OptTarget = OptTarget.EDAP, acc: AccessType = AccessType.Normal):
        pts = curves.curve(tech, opt, acc)
        X = np.array([[p.capacity_mb] for p in pts])
        y = np.array([p.values() for p in pts])
        return cls(tech=tech.value).fit(X, y)

    def predict(self, X):
        check_is_fitted(self, "anchors_")
        X = check_array(X, ensure_2d=False).reshape(-1)
        return np.array([interpolate_curve(self.anchors_, float(c)).values() for c in X])
