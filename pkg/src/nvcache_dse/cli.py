"""Command-line front end: ``nvcache-dse <command> [options]``.

Every command writes its outputs into ``--out`` (created if missing) with
write-then-rename, echoes the parameters it used inside each report, and
fails with one JSON line on stderr plus a distinct exit code:
2 parse errors, 3 model-range errors, 4 infeasible requests.
"""
from __future__ import annotations

import argparse
import gzip
import hashlib
import io
import json
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

from . import analysis, report
from .cachemodel import (ANCHOR_HEADER, PPA_FIELDS, AccessType, OptTarget, estimate_ppa,
                         load_anchor_curves)
from .cachesim import (capacity_sweep, dram_reduction, format_sim_csv,
                       geometries_for_capacities)
from .errors import DSEError
from .techmodel import DramParams, MemoryTech, PlatformParams, parse_platform_file
from .tuner import ReferenceMix, SweepSpace, format_tuner_csv, format_tuner_json, sweep
from .workload import (Phase, SyntheticTraceSpec, gen_trace, parse_profile_csv, read_trace,
                       write_trace)

COMMANDS = ("tune", "ppa", "iso-capacity", "iso-area", "batch", "scalability", "simulate",
            "gen-trace")


def data_path(name: str) -> Path:
    return Path(str(resources.files("nvcache_dse") / "data" / name))


def threads() -> int:
    raw = os.environ.get("NVCACHE_DSE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return (os.cpu_count() or 1) if n == 0 else max(n, 1)


class Inputs:
    """Reads inputs once and remembers a digest of each for provenance."""

    def __init__(self):
        self.provenance: dict[str, str] = {}

    def digest(self, label: str, path) -> bytes:
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {label} file {path}: {exc.strerror}") from None
        self.provenance[label] = f"{path.name} sha256:{hashlib.sha256(data).hexdigest()[:16]}"
        return data

    def text(self, label: str, path) -> str:
        try:
            return self.digest(label, path).decode("utf-8")
        except UnicodeDecodeError:
            raise InputError(f"{label} file {path} is not UTF-8 text") from None


class InputError(DSEError):
    exit_code = 2


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _grid(text: str) -> list[float]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            return [float(c) for c in range(int(lo), int(hi) + 1)]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
    return _floats(text)


def _techs(text: str) -> list[MemoryTech]:
    try:
        return [MemoryTech.parse(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _tech(text: str) -> MemoryTech:
    return _techs(text)[0]


def _enum_list(cls):
    def conv(text):
        try:
            return [cls(t.strip()) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"unknown {cls.__name__} in {text!r}")
    return conv


def _reductions(text: str) -> dict[MemoryTech, float]:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            tech, pct = part.split("=")
            out[MemoryTech.parse(tech)] = float(pct)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected TECH=PERCENT, got {part!r}")
    return out


class _Parser(argparse.ArgumentParser):
    """Usage errors follow the same one-line JSON contract as runtime errors."""

    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": f"{self.prog}: {message}",
                          "exit_code": 2}), file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--curves", default=str(data_path("anchors.csv")),
                        help="anchor CSV (default: shipped dataset)")
    common.add_argument("--profiles", default=str(data_path("profiles.csv")),
                        help="workload profile CSV (default: shipped dataset)")
    common.add_argument("--platform", default=None, help="platform/DRAM key=value file")
    common.add_argument("--clock-hz", type=float, default=None)
    common.add_argument("--dram-energy-nj", type=float, default=None)
    common.add_argument("--dram-latency-ns", type=float, default=None)
    common.add_argument("--rho", type=float, default=0.8, help="tuner read fraction")
    common.add_argument("--n-ref", type=int, default=10**6, help="tuner reference access count")
    common.add_argument("--seed", type=int, default=0)

    p = _Parser(prog="nvcache-dse",
                description="SRAM / STT-MRAM / SOT-MRAM L2 cache design-space exploration")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("tune", parents=[common], help="EDAP-optimal configuration per tech/capacity")
    s.add_argument("--caps", type=_floats, default=[1, 2, 4, 8, 16, 32])
    s.add_argument("--techs", type=_techs, default=None)
    s.add_argument("--opts", type=_enum_list(OptTarget), default=None,
                   help="default: every target present in the curves")
    s.add_argument("--accs", type=_enum_list(AccessType), default=None)
    s.add_argument("--exclude-leakage", action="store_true")

    s = sub.add_parser("ppa", parents=[common], help="query the anchored PPA model")
    s.add_argument("--tech", type=_tech, required=True)
    s.add_argument("--caps", type=_floats, required=True)
    s.add_argument("--opt", type=OptTarget, default=OptTarget.EDAP)
    s.add_argument("--acc", type=AccessType, default=AccessType.Normal)

    s = sub.add_parser("iso-capacity", parents=[common], help="compare technologies at one capacity")
    s.add_argument("--capacity", type=float, default=None, help="default: platform baseline")
    s.add_argument("--with-dram", action="store_true")

    s = sub.add_parser("iso-area", parents=[common], help="compare technologies at equal area")
    s.add_argument("--budget-from", default="SRAM:3", help="TECH:MB whose area is the budget")
    s.add_argument("--budget-mm2", type=float, default=None, help="explicit area budget")
    s.add_argument("--tolerance", type=float, default=1.02)
    s.add_argument("--grid", type=_grid, default=list(analysis.DEFAULT_GRID),
                   help="candidate capacities, e.g. 1..32 or 1,2,4")
    s.add_argument("--reduction", type=_reductions, default=None,
                   help="DRAM reduction per tech, e.g. STT_MRAM=14.6,SOT_MRAM=19.8")
    s.add_argument("--trace", default=None, help="derive DRAM reductions by simulating this trace")
    s.add_argument("--line", type=int, default=None)

    s = sub.add_parser("batch", parents=[common], help="batch-size sweep for one workload")
    s.set_defaults(profiles=str(data_path("alexnet_batch.csv")))
    s.add_argument("--workload", default="AlexNet")
    s.add_argument("--phase", type=Phase, default=None, help="Inference, Training or HPC")
    s.add_argument("--capacity", type=float, default=None)

    s = sub.add_parser("scalability", parents=[common], help="per-capacity tuned comparison")
    s.add_argument("--caps", type=_floats, default=[1, 2, 4, 8, 16, 32])
    s.add_argument("--grid", type=_grid, default=list(analysis.DEFAULT_GRID),
                   help="capacities for the PPA scaling table")

    s = sub.add_parser("simulate", parents=[common], help="LRU capacity sweep over a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--caps", type=_floats, default=[3, 6, 12, 24])
    s.add_argument("--line", type=int, default=None)
    s.add_argument("--ways", type=int, default=16, help="target associativity at the smallest capacity")
    s.add_argument("--warmup", type=int, default=0, help="events excluded from the counts")

    s = sub.add_parser("gen-trace", parents=[common], help="write a synthetic hot/cold trace")
    s.add_argument("--length", type=int, default=200_000)
    s.add_argument("--working-set-mb", type=float, default=16.0)
    s.add_argument("--hot-fraction", type=float, default=0.25)
    s.add_argument("--hot-prob", type=float, default=0.9)
    s.add_argument("--read-prob", type=float, default=0.8)
    s.add_argument("--line", type=int, default=None)
    s.add_argument("--name", default="trace.txt", help="output file name inside --out (.gz compresses)")
    return p


def _platform(args, inputs: Inputs) -> tuple[PlatformParams, DramParams]:
    if args.platform:
        plat, dram = parse_platform_file(inputs.text("platform", args.platform))
    else:
        plat, dram = PlatformParams(), DramParams()
    if args.clock_hz is not None:
        plat = PlatformParams(args.clock_hz, plat.line_size_bytes, plat.l2_capacity_baseline_mb)
    if args.dram_energy_nj is not None or args.dram_latency_ns is not None:
        dram = DramParams(args.dram_energy_nj or dram.energy_per_access_nj,
                          args.dram_latency_ns or dram.latency_per_access_ns)
    if not (plat.l2_clock_hz > 0 and dram.energy_per_access_nj > 0 and dram.latency_per_access_ns > 0):
        raise InputError("clock and DRAM costs must be > 0")
    return plat, dram


def _emit_study(out: Path, stem: str, rep, provenance: dict) -> list[Path]:
    files = {
        f"{stem}.json": report.report_to_json(rep, provenance),
        f"{stem}.csv": report.report_to_csv(rep),
    }
    for m in analysis.METRICS:
        files[f"{stem}_plot_{m}.csv"] = report.plot_data(rep, m)
    paths = []
    for name, text in files.items():
        write_atomic(out / name, text)
        paths.append(out / name)
    return paths


def cmd_tune(args, inputs, out):
    curves = load_anchor_curves(inputs.text("curves", args.curves))
    auto = SweepSpace.for_curves(curves, args.caps)
    space = SweepSpace(tuple(args.techs or auto.mems), tuple(args.caps),
                       tuple(args.opts or auto.opts), tuple(args.accs or auto.accs))
    mix = ReferenceMix(args.rho, args.n_ref)
    res = sweep(space, curves, mix, not args.exclude_leakage, threads())
    for err in res.empty:
        print(json.dumps({"warning": err.kind, "message": str(err)}), file=sys.stderr)
    if not res.configs:
        raise res.empty[0]
    write_atomic(out / "tune.csv", format_tuner_csv(res.configs))
    doc = json.loads(format_tuner_json(res.configs, mix, not args.exclude_leakage))
    doc["provenance"] = inputs.provenance
    doc["parameters"]["empty_pairs"] = [[e.tech.value, e.capacity_mb] for e in res.empty]
    write_atomic(out / "tune.json", report.dumps(doc))


def cmd_ppa(args, inputs, out):
    curves = load_anchor_curves(inputs.text("curves", args.curves))
    lines = [",".join(ANCHOR_HEADER)]
    for cap in args.caps:
        p = estimate_ppa(curves, args.tech, cap, args.opt, args.acc)
        lines.append(",".join([args.tech.value, args.opt.value, args.acc.value, f"{cap:g}",
                               *(repr(getattr(p, f)) for f in PPA_FIELDS)]))
    write_atomic(out / "ppa.csv", "\n".join(lines) + "\n")


def cmd_iso_capacity(args, inputs, out):
    plat, dram = _platform(args, inputs)
    curves = load_anchor_curves(inputs.text("curves", args.curves))
    workloads = parse_profile_csv(inputs.text("profiles", args.profiles))
    cap = plat.l2_capacity_baseline_mb if args.capacity is None else args.capacity
    rep = analysis.iso_capacity_study(workloads, curves, capacity_mb=cap, plat=plat,
                                      dram=dram if args.with_dram else None,
                                      max_workers=threads())
    _emit_study(out, "iso_capacity", rep, inputs.provenance)


def _budget(args, curves) -> tuple[float, MemoryTech, float]:
    tech_s, _, cap_s = args.budget_from.partition(":")
    try:
        tech, cap = MemoryTech.parse(tech_s), float(cap_s)
    except ValueError:
        raise InputError(f"--budget-from expects TECH:MB, got {args.budget_from!r}") from None
    budget = args.budget_mm2 if args.budget_mm2 is not None else analysis.area_at(curves, tech, cap)
    return budget, tech, cap


def cmd_iso_area(args, inputs, out):
    plat, dram = _platform(args, inputs)
    curves = load_anchor_curves(inputs.text("curves", args.curves))
    budget, btech, bcap = _budget(args, curves)
    caps = {}
    for t in curves.techs():
        caps[t] = bcap if t is btech else analysis.iso_area_capacity(
            curves, t, budget, args.grid, args.tolerance)
    lines = ["tech,capacity_mb,area_mm2,budget_mm2,tolerance"]
    for t, c in caps.items():
        lines.append(f"{t.value},{c:g},{analysis.area_at(curves, t, c)!r},{budget!r},{args.tolerance!r}")
    write_atomic(out / "iso_area_capacity.csv", "\n".join(lines) + "\n")

    sims = None
    if args.trace:
        trace = read_trace(args.trace)
        inputs.digest("trace", args.trace)
        order = sorted(caps, key=lambda t: caps[t])
        geoms = geometries_for_capacities([caps[t] for t in order],
                                          args.line or plat.line_size_bytes)
        results = capacity_sweep(trace, geoms, max_workers=threads())
        sims = dict(zip(order, results))
        write_atomic(out / "iso_area_sim.csv", format_sim_csv(geoms, results))

    if MemoryTech.SRAM not in caps or btech is not MemoryTech.SRAM:
        return
    workloads = parse_profile_csv(inputs.text("profiles", args.profiles))
    r0, r1 = analysis.iso_area_study(workloads, curves, plat, dram, sim_results=sims,
                                     dram_reduction_pct=args.reduction, techs=list(caps),
                                     baseline_capacity_mb=bcap, tolerance=args.tolerance,
                                     capacity_grid=args.grid, max_workers=threads())
    _emit_study(out, "iso_area", r0, inputs.provenance)
    _emit_study(out, "iso_area_dram", r1, inputs.provenance)


def cmd_batch(args, inputs, out):
    plat, dram = _platform(args, inputs)
    curves = load_anchor_curves(inputs.text("curves", args.curves))
    workloads = parse_profile_csv(inputs.text("profiles", args.profiles))
    cap = plat.l2_capacity_baseline_mb if args.capacity is None else args.capacity
    phases = [args.phase] if args.phase else list(Phase)
    wrote = False
    for phase in phases:
        family = [s for s in workloads if s.name == args.workload and s.phase is phase]
        if not family:
            continue
        rep = analysis.batch_sweep(family, curves, plat, capacity_mb=cap)
        rep.parameters["phase"] = phase.value
        _emit_study(out, f"batch_{args.workload}_{phase.value}".lower(), rep, inputs.provenance)
        wrote = True
    if not wrote:
        raise InputError(f"no rows for workload {args.workload!r}")


def cmd_scalability(args, inputs, out):
    plat, _ = _platform(args, inputs)
    curves = load_anchor_curves(inputs.text("curves", args.curves))
    workloads = parse_profile_csv(inputs.text("profiles", args.profiles))
    rep = analysis.scalability_study(curves, workloads, args.caps, plat,
                                     mix=ReferenceMix(args.rho, args.n_ref),
                                     ppa_grid=args.grid, max_workers=threads())
    _emit_study(out, "scalability", rep, inputs.provenance)
    for f in analysis.PPA_FACTS:
        write_atomic(out / f"scalability_ppa_{f}.csv", report.ppa_plot_data(rep, f))


def cmd_simulate(args, inputs, out):
    plat, _ = _platform(args, inputs)
    inputs.digest("trace", args.trace)
    trace = read_trace(args.trace)
    geoms = geometries_for_capacities(args.caps, args.line or plat.line_size_bytes, args.ways)
    results = capacity_sweep(trace, geoms, args.warmup, threads())
    write_atomic(out / "simulate.csv", format_sim_csv(geoms, results))
    if results[0].dram_transactions > 0:
        red = [dram_reduction(results[0], r) for r in results]
        doc = {"study": "simulate", "parameters": {"warmup": args.warmup, "caps_mb": args.caps},
               "provenance": inputs.provenance,
               "rows": [{"capacity_mb": g.capacity_mb, "ways": g.ways, "dram_reduction_pct": x}
                        for g, x in zip(geoms, red)]}
        write_atomic(out / "simulate.json", report.dumps(doc))


def cmd_gen_trace(args, inputs, out):
    plat, _ = _platform(args, inputs)
    spec = SyntheticTraceSpec(args.length, int(args.working_set_mb * (1 << 20)), args.hot_fraction,
                              args.hot_prob, args.read_prob, args.seed,
                              args.line or plat.line_size_bytes)
    path = out / args.name
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        if path.suffix == ".gz":
            with open(tmp, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw,
                                                       mtime=0) as gz:
                with io.TextIOWrapper(gz, encoding="utf-8", newline="\n") as fh:
                    write_trace(gen_trace(spec), fh)
        else:
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                write_trace(gen_trace(spec), fh)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


HANDLERS = {
    "tune": cmd_tune, "ppa": cmd_ppa, "iso-capacity": cmd_iso_capacity, "iso-area": cmd_iso_area,
    "batch": cmd_batch, "scalability": cmd_scalability, "simulate": cmd_simulate,
    "gen-trace": cmd_gen_trace,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    inputs = Inputs()
    try:
        HANDLERS[args.command](args, inputs, Path(args.out))
    except DSEError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc), "exit_code": exc.exit_code}),
              file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 2}),
              file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
