"""Workload-level energy, delay and EDP models, and the comparison studies.

Delay is the serialized L2 transaction time (latencies rounded up to whole L2
clock cycles) plus, when enabled, a per-access DRAM latency. Leakage is
charged over the workload's measured execution time when the profile has one,
otherwise over that computed delay. Every study normalizes against SRAM at the
same workload and reports geometric means across workloads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .cachemodel import (AccessType, AnchorCurveSet, CachePPA, OptTarget, area_at,
                         estimate_ppa)
from .cachesim import SimResult, dram_reduction
from .errors import InfeasibleError
from .techmodel import DramParams, MemoryTech, PlatformParams
from .tuner import DEFAULT_CAPS, ReferenceMix, SweepSpace, sweep
from .workload import WorkloadStats

BASELINE = MemoryTech.SRAM
DEFAULT_GRID = tuple(float(c) for c in range(1, 33))
METRICS = ("dynamic", "leakage", "total", "delay", "edp")


class EmptyWorkload(ValueError):
    pass


class NoFeasibleCapacity(InfeasibleError):
    pass


@dataclass(frozen=True)
class EnergyBreakdown:
    dynamic_j: float
    leakage_j: float
    dram_j: float = 0.0

    @property
    def total_j(self) -> float:
        return self.dynamic_j + self.leakage_j + self.dram_j


@dataclass(frozen=True)
class WorkloadTechResult:
    workload: str
    tech: MemoryTech
    capacity_mb: float
    energy: EnergyBreakdown
    delay_s: float
    edp_js: float
    dram_included: bool
    dram_transactions: int = 0
    leakage_duration_s: float = 0.0


def dynamic_energy(s: WorkloadStats, ppa: CachePPA) -> float:
    return (s.l2_reads * ppa.read_energy_nj + s.l2_writes * ppa.write_energy_nj) * 1e-9


def latency_cycles(latency_ns: float, clock_hz: float) -> int:
    # round first so products like 2.0 ns * 1.5 GHz do not ceil to 4 on fp noise
    return math.ceil(round(latency_ns * clock_hz * 1e-9, 9))


def cache_delay(s: WorkloadStats, ppa: CachePPA, plat: PlatformParams = PlatformParams()) -> float:
    cyc_r = latency_cycles(ppa.read_latency_ns, plat.l2_clock_hz)
    cyc_w = latency_cycles(ppa.write_latency_ns, plat.l2_clock_hz)
    return (s.l2_reads * cyc_r + s.l2_writes * cyc_w) / plat.l2_clock_hz


def leakage_energy(ppa: CachePPA, duration_s: float) -> float:
    if duration_s < 0:
        raise ValueError("duration must be >= 0")
    return ppa.leakage_power_mw * 1e-3 * duration_s


def dram_cost(dram_transactions: int, d: DramParams = DramParams()) -> tuple[float, float]:
    """(joules, seconds) spent on ``dram_transactions`` off-chip accesses."""
    return (dram_transactions * d.energy_per_access_nj * 1e-9,
            dram_transactions * d.latency_per_access_ns * 1e-9)


def evaluate(s: WorkloadStats, ppa: CachePPA, plat: PlatformParams = PlatformParams(),
             dram: Optional[DramParams] = None,
             dram_txn_override: Optional[int] = None) -> WorkloadTechResult:
    if s.l2_reads + s.l2_writes <= 0:
        raise EmptyWorkload(f"{s.label}: no L2 transactions")
    dyn = dynamic_energy(s, ppa)
    delay = cache_delay(s, ppa, plat)
    dram_j = 0.0
    n_dram = 0
    if dram is not None:
        n_dram = s.dram_transactions if dram_txn_override is None else dram_txn_override
        dram_j, dram_s = dram_cost(n_dram, dram)
        delay += dram_s
    duration = s.exec_time_s if s.exec_time_s is not None else delay
    energy = EnergyBreakdown(dyn, leakage_energy(ppa, duration), dram_j)
    return WorkloadTechResult(s.label, ppa.tech, ppa.capacity_mb, energy, delay,
                              energy.total_j * delay, dram is not None, n_dram, duration)


@dataclass(frozen=True)
class RatioRow:
    group: float
    workload: str
    tech: MemoryTech
    capacity_mb: float
    dynamic: float
    leakage: float
    total: float
    delay: float
    edp: float


@dataclass(frozen=True)
class SummaryRow:
    """Geometric mean and spread of one metric's ratios within a group."""

    group: float
    tech: MemoryTech
    metric: str
    geomean: float
    min: float
    max: float
    log_std: float


@dataclass
class NormalizedReport:
    study: str
    parameters: dict
    results: list[WorkloadTechResult]
    rows: list[RatioRow]
    summary: list[SummaryRow]
    baseline: MemoryTech = BASELINE
    extras: dict = field(default_factory=dict)

    def mean(self, tech: MemoryTech, metric: str, group: Optional[float] = None) -> float:
        for s in self.summary:
            if s.tech is tech and s.metric == metric and (group is None or s.group == group):
                return s.geomean
        raise KeyError((tech, metric, group))

    def groups(self) -> list[float]:
        return list(dict.fromkeys(r.group for r in self.rows))

    def ratios(self, tech: MemoryTech, metric: str, group: Optional[float] = None) -> list[float]:
        return [getattr(r, metric) for r in self.rows
                if r.tech is tech and (group is None or r.group == group)]


def ratio_row(group: float, base: WorkloadTechResult, res: WorkloadTechResult) -> RatioRow:
    def q(a, b):
        return a / b if b else math.nan

    return RatioRow(group, res.workload, res.tech, res.capacity_mb,
                    q(res.energy.dynamic_j, base.energy.dynamic_j),
                    q(res.energy.leakage_j, base.energy.leakage_j),
                    q(res.energy.total_j, base.energy.total_j),
                    q(res.delay_s, base.delay_s),
                    q(res.edp_js, base.edp_js))


def summarize(rows: Sequence[RatioRow]) -> list[SummaryRow]:
    keyed: dict[tuple[float, MemoryTech], list[RatioRow]] = {}
    for r in rows:
        keyed.setdefault((r.group, r.tech), []).append(r)
    out = []
    for (group, tech), rs in keyed.items():
        for m in METRICS:
            v = np.array([getattr(r, m) for r in rs], dtype=float)
            if np.all(v > 0):
                logs = np.log(v)
                gm, sd = float(np.exp(logs.mean())), float(logs.std())
            else:
                gm = sd = math.nan
            out.append(SummaryRow(group, tech, m, gm, float(v.min()), float(v.max()), sd))
    return out


def _normalize(study: str, grouped: Sequence[tuple[float, Sequence[WorkloadTechResult]]],
               techs: Sequence[MemoryTech], parameters: dict) -> NormalizedReport:
    """Build ratio rows from per-group results listed workload-major, tech-minor."""
    results, rows = [], []
    n = len(techs)
    bi = list(techs).index(BASELINE)
    for group, res in grouped:
        results.extend(res)
        for i in range(0, len(res), n):
            chunk = res[i:i + n]
            for r in chunk:
                rows.append(ratio_row(group, chunk[bi], r))
    return NormalizedReport(study, parameters, results, rows, summarize(rows))


def _check_techs(techs: Sequence[MemoryTech]) -> list[MemoryTech]:
    techs = list(dict.fromkeys(techs))
    if BASELINE not in techs:
        raise ValueError("SRAM baseline must be among the compared technologies")
    return techs


def _params(plat: PlatformParams, dram: Optional[DramParams], **extra) -> dict:
    p = {
        "clock": plat.l2_clock_hz,
        "dram": None if dram is None else asdict(dram),
        "delay_model": "serialized L2 cycles (ceil at L2 clock) + DRAM latency if enabled",
        "leakage_duration": "exec_time_s when profiled, else computed delay",
        "rho": None,
        "tolerance": None,
    }
    p.update(extra)
    return p


def _map(fn, items, max_workers: int):
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def iso_capacity_study(workloads: Sequence[WorkloadStats], curves: AnchorCurveSet,
                       techs: Sequence[MemoryTech] = tuple(MemoryTech),
                       capacity_mb: float = 3.0, plat: PlatformParams = PlatformParams(),
                       dram: Optional[DramParams] = None,
                       opt: OptTarget = OptTarget.EDAP, acc: AccessType = AccessType.Normal,
                       max_workers: int = 1) -> NormalizedReport:
    techs = _check_techs(techs)
    ppas = {t: estimate_ppa(curves, t, capacity_mb, opt, acc) for t in techs}
    res = _map(lambda s: [evaluate(s, ppas[t], plat, dram) for t in techs], workloads,
               max_workers)
    flat = [r for rs in res for r in rs]
    return _normalize("iso-capacity", [(capacity_mb, flat)], techs,
                      _params(plat, dram, capacity_mb=capacity_mb))


def iso_area_capacity(curves: AnchorCurveSet, tech: MemoryTech, area_budget_mm2: float,
                      capacity_grid: Iterable[float] = DEFAULT_GRID, tolerance: float = 1.02,
                      opt: OptTarget = OptTarget.EDAP,
                      acc: AccessType = AccessType.Normal) -> float:
    """Largest grid capacity whose area fits ``area_budget_mm2 * tolerance``."""
    if tolerance < 1:
        raise ValueError("tolerance must be >= 1")
    limit = area_budget_mm2 * tolerance
    fits = [c for c in capacity_grid if area_at(curves, tech, c, opt, acc) <= limit]
    if not fits:
        raise NoFeasibleCapacity(f"{tech.value}: no grid capacity fits "
                                 f"{area_budget_mm2:g} mm^2 x {tolerance:g}")
    return max(fits)


def iso_area_study(workloads: Sequence[WorkloadStats], curves: AnchorCurveSet,
                   plat: PlatformParams = PlatformParams(), dram: DramParams = DramParams(),
                   sim_results: Optional[Mapping[MemoryTech, SimResult]] = None,
                   dram_reduction_pct: Optional[Mapping[MemoryTech, float]] = None,
                   techs: Sequence[MemoryTech] = tuple(MemoryTech),
                   baseline_capacity_mb: Optional[float] = None, tolerance: float = 1.02,
                   capacity_grid: Iterable[float] = DEFAULT_GRID,
                   max_workers: int = 1) -> tuple[NormalizedReport, NormalizedReport]:
    """Compare technologies at equal area, without and with DRAM costs.

    Each technology's DRAM traffic is the profiled count scaled down by its
    DRAM-access reduction, taken from ``sim_results`` (relative to the SRAM
    entry) or given directly as ``dram_reduction_pct``.
    """
    techs = _check_techs(techs)
    base_cap = plat.l2_capacity_baseline_mb if baseline_capacity_mb is None else baseline_capacity_mb
    budget = area_at(curves, BASELINE, base_cap)
    grid = tuple(capacity_grid)
    caps = {t: base_cap if t is BASELINE else iso_area_capacity(curves, t, budget, grid, tolerance)
            for t in techs}
    ppas = {t: estimate_ppa(curves, t, caps[t]) for t in techs}
    if sim_results is not None:
        red = {t: dram_reduction(sim_results[BASELINE], sim_results[t]) for t in techs}
    else:
        red = {t: 0.0 for t in techs}
        red.update(dram_reduction_pct or {})
        red[BASELINE] = red.get(BASELINE, 0.0)

    def txns(s, t):
        return round(s.dram_transactions * (1 - red[t] / 100.0))

    without = _map(lambda s: [evaluate(s, ppas[t], plat) for t in techs], workloads, max_workers)
    with_ = _map(lambda s: [evaluate(s, ppas[t], plat, dram, txns(s, t)) for t in techs],
                 workloads, max_workers)
    extra = dict(tolerance=tolerance, area_budget_mm2=budget, baseline_capacity_mb=base_cap,
                 capacities_mb={t.value: caps[t] for t in techs},
                 dram_reduction_pct={t.value: red[t] for t in techs})
    r0 = _normalize("iso-area", [(base_cap, [r for rs in without for r in rs])], techs,
                    _params(plat, None, **extra))
    r1 = _normalize("iso-area+dram", [(base_cap, [r for rs in with_ for r in rs])], techs,
                    _params(plat, dram, **extra))
    return r0, r1


def batch_sweep(family: Sequence[WorkloadStats], curves: AnchorCurveSet,
                plat: PlatformParams = PlatformParams(),
                techs: Sequence[MemoryTech] = tuple(MemoryTech), capacity_mb: float = 3.0,
                dram: Optional[DramParams] = None) -> NormalizedReport:
    """Normalized ratios per batch size for one workload; groups are batch sizes."""
    if not family:
        raise ValueError("empty batch family")
    names = {s.name for s in family}
    if len(names) != 1:
        raise ValueError(f"batch family mixes workloads: {sorted(names)}")
    techs = _check_techs(techs)
    ppas = {t: estimate_ppa(curves, t, capacity_mb) for t in techs}
    grouped = [(float(s.batch_size), [evaluate(s, ppas[t], plat, dram) for t in techs])
               for s in sorted(family, key=lambda s: s.batch_size)]
    return _normalize("batch", grouped, techs,
                      _params(plat, dram, capacity_mb=capacity_mb, workload=names.pop()))


PPA_FACTS = ("read_latency_ns", "write_latency_ns", "read_energy_nj", "write_energy_nj",
             "leakage_power_mw", "area_mm2")


def _break_even(caps: Sequence[float], nvm: Sequence[float], base: Sequence[float]):
    """Smallest capacity from which ``nvm <= base`` holds for the rest of the grid."""
    point = None
    for c, a, b in zip(reversed(caps), reversed(nvm), reversed(base)):
        if a <= b:
            point = c
        else:
            break
    return point


def scalability_study(curves: AnchorCurveSet, workloads: Sequence[WorkloadStats],
                      caps: Sequence[float] = DEFAULT_CAPS,
                      plat: PlatformParams = PlatformParams(),
                      techs: Sequence[MemoryTech] = tuple(MemoryTech),
                      mix: ReferenceMix = ReferenceMix(), include_leakage: bool = True,
                      ppa_grid: Sequence[float] = DEFAULT_GRID,
                      max_workers: int = 1) -> NormalizedReport:
    """EDAP-tune every technology per capacity, then normalize workloads to SRAM.

    Workloads are evaluated at ``caps``. The tuned PPA itself is tabulated on
    the finer ``ppa_grid``; ``extras`` carries that table, the fastest-read
    technology per grid capacity and, per MRAM flavor and PPA field, the
    break-even capacity from which it matches or beats SRAM.
    """
    techs = _check_techs(techs)
    caps = tuple(float(c) for c in caps)
    grid = tuple(float(c) for c in ppa_grid)
    all_caps = tuple(sorted(set(caps) | set(grid)))
    space = SweepSpace(tuple(techs), all_caps, tuple(curves.opts()), tuple(curves.accs()))
    outcome = sweep(space, curves, mix, include_leakage, max_workers)
    if outcome.empty:
        raise outcome.empty[0]
    tuned = {(c.tech, c.capacity_mb): c for c in outcome.configs}

    def per_cap(cap):
        return [evaluate(s, tuned[(t, cap)].ppa, plat) for s in workloads for t in techs]

    grouped = list(zip(caps, _map(per_cap, caps, max_workers)))
    report = _normalize("scalability", grouped, techs,
                        _params(plat, None, rho=mix.read_fraction, n_ref=mix.reference_access_count,
                                include_leakage=include_leakage, caps_mb=list(caps),
                                ppa_grid_mb=list(grid)))
    table = {t.value: {f: [getattr(tuned[(t, c)].ppa, f) for c in grid] for f in PPA_FACTS}
             for t in techs}
    leader = [min(techs, key=lambda t: tuned[(t, c)].ppa.read_latency_ns).value for c in grid]
    break_even = {
        t.value: {f: _break_even(grid, table[t.value][f], table[BASELINE.value][f])
                  for f in PPA_FACTS}
        for t in techs if t is not BASELINE
    }
    report.extras = {
        "ppa_grid_mb": list(grid),
        "ppa": table,
        "tuned": {t.value: [[tuned[(t, c)].opt.value, tuned[(t, c)].acc.value] for c in grid]
                  for t in techs},
        "read_latency_leader": leader,
        "break_even_mb": break_even,
    }
    return report
