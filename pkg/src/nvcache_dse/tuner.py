"""EDAP-optimal cache configuration search.

For every (technology, capacity) pair the tuner evaluates every
(optimization target, access type) curve and keeps the configuration with the
smallest energy-delay-area product under a reference access mix.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cachemodel import (SWEEP_TARGETS, AccessType, AnchorCurveSet, CachePPA,
                         OptTarget, estimate_ppa)
from .errors import InfeasibleError, ModelRangeError
from .techmodel import MemoryTech

log = logging.getLogger(__name__)

DEFAULT_CAPS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


class EmptySweep(InfeasibleError):
    def __init__(self, tech: MemoryTech, capacity_mb: float):
        super().__init__(f"no resolvable configuration for {tech.value} at {capacity_mb:g} MB")
        self.tech, self.capacity_mb = tech, capacity_mb


@dataclass(frozen=True)
class SweepSpace:
    mems: tuple[MemoryTech, ...] = tuple(MemoryTech)
    caps_mb: tuple[float, ...] = DEFAULT_CAPS
    opts: tuple[OptTarget, ...] = SWEEP_TARGETS
    accs: tuple[AccessType, ...] = tuple(AccessType)

    def __post_init__(self):
        for name in ("mems", "caps_mb", "opts", "accs"):
            if not getattr(self, name):
                raise ValueError(f"SweepSpace.{name} must be non-empty")

    @classmethod
    def for_curves(cls, curves: AnchorCurveSet, caps_mb=DEFAULT_CAPS) -> "SweepSpace":
        """Sweep exactly the technologies, targets and access types present."""
        return cls(tuple(curves.techs()), tuple(caps_mb), tuple(curves.opts()),
                   tuple(curves.accs()))


@dataclass(frozen=True)
class ReferenceMix:
    read_fraction: float = 0.8
    reference_access_count: int = 10**6

    def __post_init__(self):
        if not 0 <= self.read_fraction <= 1:
            raise ValueError("read_fraction must be in [0, 1]")
        if self.reference_access_count <= 0:
            raise ValueError("reference_access_count must be > 0")


def edap(ppa: CachePPA, mix: ReferenceMix, include_leakage: bool = True) -> float:
    """Energy x delay x area (J * s * mm^2) of ``mix`` served by ``ppa``."""
    rho, n = mix.read_fraction, mix.reference_access_count
    delay = n * (rho * ppa.read_latency_ns + (1 - rho) * ppa.write_latency_ns) * 1e-9
    energy = n * (rho * ppa.read_energy_nj + (1 - rho) * ppa.write_energy_nj) * 1e-9
    if include_leakage:
        energy += ppa.leakage_power_mw * 1e-3 * delay
    return energy * delay * ppa.area_mm2


@dataclass(frozen=True)
class TunedConfig:
    tech: MemoryTech
    capacity_mb: float
    opt: OptTarget
    acc: AccessType
    edap_score: float
    ppa: CachePPA


@dataclass
class SweepOutcome:
    configs: list[TunedConfig] = field(default_factory=list)
    skipped: list[tuple[MemoryTech, float, OptTarget, AccessType, str]] = field(default_factory=list)
    empty: list[EmptySweep] = field(default_factory=list)


def _evaluate_point(curves, mix, include_leakage, point):
    tech, cap, opt, acc = point
    try:
        ppa = estimate_ppa(curves, tech, cap, opt, acc)
    except ModelRangeError as exc:
        return None, str(exc)
    return (edap(ppa, mix, include_leakage), ppa), None


def sweep(space: SweepSpace, curves: AnchorCurveSet, mix: ReferenceMix = ReferenceMix(),
          include_leakage: bool = True, max_workers: int = 1) -> SweepOutcome:
    points = [(t, c, o, a) for t in space.mems for c in space.caps_mb
              for o in space.opts for a in space.accs]

    def run(p):
        return _evaluate_point(curves, mix, include_leakage, p)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as ex:
            scored = list(ex.map(run, points))
    else:
        scored = [run(p) for p in points]

    out = SweepOutcome()
    best: dict[tuple[MemoryTech, float], Optional[TunedConfig]] = {
        (t, c): None for t in space.mems for c in space.caps_mb}
    # reduction in enumeration order; strict < keeps the first minimum
    for (tech, cap, opt, acc), (res, err) in zip(points, scored):
        if res is None:
            out.skipped.append((tech, cap, opt, acc, err))
            continue
        score, ppa = res
        cur = best[(tech, cap)]
        if cur is None or score < cur.edap_score:
            best[(tech, cap)] = TunedConfig(tech, cap, opt, acc, score, ppa)
    for (tech, cap), cfg in best.items():
        if cfg is None:
            err = EmptySweep(tech, cap)
            log.warning("%s", err)
            out.empty.append(err)
        else:
            out.configs.append(cfg)
    return out


def tune(space: SweepSpace, curves: AnchorCurveSet, mix: ReferenceMix = ReferenceMix(),
         include_leakage: bool = True, max_workers: int = 1) -> list[TunedConfig]:
    """Minimum-EDAP configuration per (tech, capacity), in sweep order.

    Pairs with no resolvable point are logged and left out; use ``sweep`` to
    get them back as ``EmptySweep`` records.
    """
    return sweep(space, curves, mix, include_leakage, max_workers).configs


TUNER_HEADER = ("tech", "capacity_mb", "opt", "acc", "edap", "read_lat_ns", "write_lat_ns",
                "read_e_nj", "write_e_nj", "leak_mw", "area_mm2")


def tuned_rows(configs: Sequence[TunedConfig]) -> list[list]:
    return [[c.tech.value, c.capacity_mb, c.opt.value, c.acc.value, c.edap_score,
             *c.ppa.values()] for c in configs]


def format_tuner_csv(configs: Sequence[TunedConfig]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TUNER_HEADER)
    for row in tuned_rows(configs):
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def format_tuner_json(configs: Sequence[TunedConfig], mix: ReferenceMix,
                      include_leakage: bool = True) -> str:
    doc = {
        "study": "tune",
        "parameters": {"rho": mix.read_fraction, "n_ref": mix.reference_access_count,
                       "include_leakage": include_leakage},
        "rows": [dict(zip(TUNER_HEADER, r)) for r in tuned_rows(configs)],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


class EDAPTuner(BaseEstimator):
    """Estimator wrapper around :func:`sweep`.

    ``fit(curves)`` stores the winning configurations in ``configs_``, the
    unresolvable points in ``skipped_`` and the infeasible pairs in
    ``empty_``. ``predict(X)`` maps (tech, capacity) rows to winning PPA.
    """

    def __init__(self, caps_mb=DEFAULT_CAPS, mems=None, opts=None, accs=None,
                 read_fraction=0.8, reference_access_count=10**6, include_leakage=True,
                 n_jobs=1):
        self.caps_mb = caps_mb
        self.mems = mems
        self.opts = opts
        self.accs = accs
        self.read_fraction = read_fraction
        self.reference_access_count = reference_access_count
        self.include_leakage = include_leakage
        self.n_jobs = n_jobs

    def _space(self, curves: AnchorCurveSet) -> SweepSpace:
        auto = SweepSpace.for_curves(curves, self.caps_mb)
        return SweepSpace(
            tuple(MemoryTech.parse(m) if isinstance(m, str) else m for m in self.mems)
            if self.mems else auto.mems,
            tuple(float(c) for c in self.caps_mb),
            tuple(OptTarget(o) if isinstance(o, str) else o for o in self.opts)
            if self.opts else auto.opts,
            tuple(AccessType(a) if isinstance(a, str) else a for a in self.accs)
            if self.accs else auto.accs,
        )

    def fit(self, curves: AnchorCurveSet, y=None):
        self.mix_ = ReferenceMix(self.read_fraction, self.reference_access_count)
        self.space_ = self._space(curves)
        res = sweep(self.space_, curves, self.mix_, self.include_leakage, self.n_jobs)
        self.configs_ = res.configs
        self.skipped_ = res.skipped
        self.empty_ = res.empty
        return self

    def predict(self, X):
        check_is_fitted(self, "configs_")
        lookup = {(c.tech, c.capacity_mb): c for c in self.configs_}
        out = []
        for tech, cap in X:
            tech = MemoryTech.parse(tech) if isinstance(tech, str) else tech
            try:
                out.append(lookup[(tech, float(cap))])
            except KeyError:
                raise EmptySweep(tech, float(cap)) from None
        return out
