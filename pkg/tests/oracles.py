"""Reference implementations used only by the tests.

They deliberately share no code with the package paths they check.
"""
import math
import random

from nvcache_dse.cachemodel import AccessType, AnchorCurveSet, CachePPA, OptTarget
from nvcache_dse.techmodel import MemoryTech


def reference_lru(trace, capacity_bytes, ways, line_size):
    """Flat recency list: one global list of resident lines, most recent last."""
    num_sets = capacity_bytes // (ways * line_size)
    resident = []  # [line, dirty]
    acc = hits = wb = 0
    for ev in trace:
        line = ev.address // line_size
        s = line % num_sets
        write = ev.op.value == "W"
        acc += 1
        found = None
        for i, (ln, _) in enumerate(resident):
            if ln == line:
                found = i
                break
        if found is not None:
            hits += 1
            ln, dirty = resident.pop(found)
            resident.append([ln, dirty or write])
            continue
        same_set = [i for i, (ln, _) in enumerate(resident) if ln % num_sets == s]
        if len(same_set) >= ways:
            victim = resident.pop(same_set[0])
            if victim[1]:
                wb += 1
        resident.append([line, write])
    misses = acc - hits
    return dict(accesses=acc, hits=hits, misses=misses, writebacks=wb,
                dram_transactions=misses + wb)


def brute_force_edap(ppa, rho, n_ref, include_leakage=True):
    t = n_ref * (rho * ppa.read_latency_ns + (1 - rho) * ppa.write_latency_ns) / 1e9
    e = n_ref * (rho * ppa.read_energy_nj + (1 - rho) * ppa.write_energy_nj) / 1e9
    if include_leakage:
        e += ppa.leakage_power_mw / 1e3 * t
    return e * t * ppa.area_mm2


def brute_force_tune(points, rho, n_ref):
    """points: dict (tech, cap) -> list of (opt, acc, ppa) in enumeration order."""
    out = {}
    for key, cands in points.items():
        scores = [brute_force_edap(p, rho, n_ref) for _, _, p in cands]
        best = min(scores)
        i = scores.index(best)  # first minimum
        out[key] = (cands[i][0], cands[i][1], best)
    return out


def random_curve_set(rng: random.Random, caps, techs=tuple(MemoryTech),
                     opts=tuple(o for o in OptTarget if o is not OptTarget.EDAP),
                     accs=tuple(AccessType)):
    """Random anchor curves with positive fields and strictly increasing area."""
    curves = {}
    for t in techs:
        for o in opts:
            for a in accs:
                area = rng.uniform(0.1, 2.0)
                pts = []
                for c in caps:
                    area *= rng.uniform(1.05, 2.5)
                    pts.append(CachePPA(t, float(c), rng.uniform(0.5, 20), rng.uniform(0.5, 20),
                                        rng.uniform(0.05, 3), rng.uniform(0.05, 3),
                                        rng.uniform(10, 20000), area))
                curves[(t, o, a)] = pts
    return AnchorCurveSet(curves)


def geometric_mid(a, b):
    return math.sqrt(a * b)


def random_sim_instance(rng: random.Random, max_lines=64, max_events=10_000):
    """Random (trace, capacity_bytes, ways, line_size) over at most ``max_lines`` lines.

    Lengths are log-uniform so short and long traces both occur.
    """
    from nvcache_dse.workload import Op, TraceEvent

    line = rng.choice([16, 64, 128])
    sets = rng.choice([1, 2, 4, 8])
    ways = rng.randint(1, 8)
    n_lines = rng.randint(1, max_lines)
    length = int(math.exp(rng.uniform(0, math.log(max_events))))
    p_write = rng.random()
    universe = rng.sample(range(4 * max_lines), n_lines)
    trace = [TraceEvent(Op.Write if rng.random() < p_write else Op.Read,
                        rng.choice(universe) * line + rng.randrange(line))
             for _ in range(length)]
    return trace, sets * ways * line, ways, line
