import pytest
from hypothesis import assume, given, settings, strategies as st

from nvcache_dse.analysis import (DEFAULT_GRID, EmptyWorkload, NoFeasibleCapacity, batch_sweep,
                                  cache_delay, dram_cost, dynamic_energy, evaluate,
                                  iso_area_capacity, iso_area_study, iso_capacity_study,
                                  latency_cycles, leakage_energy, scalability_study)
from nvcache_dse.cachemodel import CachePPA, estimate_ppa
from nvcache_dse.cachesim import SimResult
from nvcache_dse.techmodel import DramParams, MemoryTech, PlatformParams
from nvcache_dse.workload import Phase, WorkloadStats, rw_ratio

SRAM, STT, SOT = MemoryTech.SRAM, MemoryTech.STT_MRAM, MemoryTech.SOT_MRAM
PLAT = PlatformParams()


def stats(nr, nw, **kw):
    return WorkloadStats("w", Phase.Inference, 1, nr, nw, **kw)


@pytest.fixture(scope="module")
def table(curves):
    return {key: estimate_ppa(curves, *key) for key in
            [(SRAM, 3), (STT, 3), (STT, 7), (SOT, 3), (SOT, 10)]}


def test_dynamic_energy(table):
    assert dynamic_energy(stats(10**9, 10**8), table[(SRAM, 3)]) == pytest.approx(0.382, rel=1e-12)
    assert dynamic_energy(stats(0, 0), table[(SRAM, 3)]) == 0
    assert dynamic_energy(stats(2, 6), table[(SOT, 3)]) == \
        pytest.approx(2 * dynamic_energy(stats(1, 3), table[(SOT, 3)]), rel=1e-15)


@pytest.mark.parametrize("ns,cycles", [(2.91, 5), (1.53, 3), (9.31, 14), (2.98, 5), (3.71, 6),
                                        (1.38, 3)])
def test_latency_cycles(ns, cycles):
    assert latency_cycles(ns, 1.481e9) == cycles


def test_exact_cycle_products_do_not_round_up():
    assert latency_cycles(2.0, 1.5e9) == 3
    assert latency_cycles(1.0, 1e9) == 1


def test_cache_delay(table):
    assert cache_delay(stats(0, 0), table[(SRAM, 3)]) == 0
    assert cache_delay(stats(1481, 0), table[(SRAM, 3)]) == pytest.approx(5e-6, rel=1e-12)
    assert cache_delay(stats(0, 1481), table[(STT, 3)]) == pytest.approx(14e-6, rel=1e-12)


def test_leakage_energy(table):
    assert leakage_energy(table[(SRAM, 3)], 1.0) == pytest.approx(6.442, rel=1e-12)
    assert leakage_energy(table[(SRAM, 3)], 0.0) == 0
    ratio = leakage_energy(table[(SRAM, 3)], 2.0) / leakage_energy(table[(SOT, 3)], 2.0)
    assert ratio == pytest.approx(6442 / 527, rel=1e-12)
    with pytest.raises(ValueError):
        leakage_energy(table[(SRAM, 3)], -1)


def test_dram_cost():
    assert dram_cost(0) == (0, 0)
    e, t = dram_cost(10**6)
    assert e == pytest.approx(0.07, rel=1e-12) and t == pytest.approx(0.1, rel=1e-12)
    e3, t3 = dram_cost(3 * 10**6)
    assert e3 == pytest.approx(3 * e, rel=1e-12) and t3 == pytest.approx(3 * t, rel=1e-12)


def test_evaluate_closed_model(table):
    s = stats(10**6, 10**5)
    r = evaluate(s, table[(STT, 3)])
    assert r.leakage_duration_s == r.delay_s == cache_delay(s, table[(STT, 3)])
    assert r.energy.dram_j == 0 and not r.dram_included
    assert r.edp_js == r.energy.total_j * r.delay_s


def test_evaluate_fixed_duration(table):
    s = stats(10**6, 10**5, exec_time_s=1.0)
    sot, sram = evaluate(s, table[(SOT, 3)]), evaluate(s, table[(SRAM, 3)])
    assert sot.energy.leakage_j == pytest.approx(0.527, rel=1e-12)
    assert sram.energy.leakage_j == pytest.approx(6.442, rel=1e-12)
    assert sram.energy.leakage_j / sot.energy.leakage_j == pytest.approx(12.2239, abs=1e-4)
    # exec time never enters the EDP delay
    assert sot.delay_s == cache_delay(s, table[(SOT, 3)])


def test_dram_strictly_adds(table):
    s = stats(10**6, 10**5, dram_reads=5000, dram_writes=100)
    off, on = evaluate(s, table[(STT, 7)]), evaluate(s, table[(STT, 7)], dram=DramParams())
    assert on.energy.total_j > off.energy.total_j and on.delay_s > off.delay_s
    assert on.dram_transactions == 5100
    assert evaluate(s, table[(STT, 7)], dram=DramParams(), dram_txn_override=0).delay_s == \
        off.delay_s


def test_evaluate_rejects_empty(table):
    with pytest.raises(EmptyWorkload):
        evaluate(stats(0, 0), table[(SRAM, 3)])


def test_iso_capacity_directions(curves, workloads):
    rep = iso_capacity_study(workloads, curves)
    for row in rep.rows:
        if row.tech is SRAM:
            assert (row.dynamic, row.leakage, row.total, row.delay, row.edp) == (1, 1, 1, 1, 1)
    sram = {r.workload: r for r in rep.results if r.tech is SRAM}
    leak_frac = {w: r.energy.leakage_j / r.energy.total_j for w, r in sram.items()}
    rw = {s.label: rw_ratio(s) for s in workloads}
    for row in rep.rows:
        if row.tech is SRAM:
            continue
        if rw[row.workload] > 1:
            assert row.dynamic > 1
        if leak_frac[row.workload] > 0.9:
            assert row.total < 1
    assert len(rep.summary) == 3 * 5


def test_iso_area_capacity_examples(curves):
    grid10 = [float(c) for c in range(1, 11)]
    assert iso_area_capacity(curves, STT, 5.53, grid10, 1.0) == 7
    assert iso_area_capacity(curves, SOT, 5.53, tolerance=1.02) == 10
    with pytest.raises(NoFeasibleCapacity):
        iso_area_capacity(curves, SOT, 0.1)
    with pytest.raises(ValueError):
        iso_area_capacity(curves, SOT, 5.53, tolerance=0.99)


def test_iso_area_zero_reduction_is_common_shift(curves, workloads):
    without, with_ = iso_area_study(workloads, curves)
    assert without.parameters["capacities_mb"] == {"SRAM": 3.0, "STT_MRAM": 7.0, "SOT_MRAM": 10.0}
    n = 3
    for i in range(0, len(with_.results), n):
        chunk_w = with_.results[i:i + n]
        chunk_o = without.results[i:i + n]
        dram_j = {r.energy.dram_j for r in chunk_w}
        dt = [a.delay_s - b.delay_s for a, b in zip(chunk_w, chunk_o)]
        assert len(dram_j) == 1
        assert max(dt) - min(dt) <= 1e-12 * max(dt)


def test_iso_area_published_reductions(curves, workloads):
    _, with_ = iso_area_study(workloads, curves,
                              dram_reduction_pct={STT: 14.6, SOT: 19.8})
    assert with_.mean(SOT, "edp") < with_.mean(STT, "edp") < 1
    assert with_.parameters["tolerance"] == 1.02


def test_iso_area_from_sim_results(curves, workloads):
    sims = {SRAM: SimResult(dram_transactions=1000), STT: SimResult(dram_transactions=854),
            SOT: SimResult(dram_transactions=802)}
    _, a = iso_area_study(workloads, curves, sim_results=sims)
    _, b = iso_area_study(workloads, curves, dram_reduction_pct={STT: 14.6, SOT: 19.8})
    assert a.rows == b.rows


def test_batch_single_size(curves):
    rep = batch_sweep([stats(10**6, 10**5)], curves)
    assert rep.groups() == [1.0]
    assert len(rep.rows) == 3


def test_batch_rising_read_share_helps_stt(curves):
    fam = [WorkloadStats("X", Phase.Training, b, 10**8 * r // (r + 1), 10**8 // (r + 1))
           for b, r in [(1, 2), (4, 4), (16, 8), (64, 16), (256, 26)]]
    rep = batch_sweep(fam, curves)
    edp = [rep.mean(STT, "edp", g) for g in rep.groups()]
    assert all(a > b for a, b in zip(edp, edp[1:]))


def test_batch_identical_stats(curves):
    fam = [WorkloadStats("X", Phase.Inference, b, 10**7, 10**6) for b in (1, 8, 64)]
    rep = batch_sweep(fam, curves)
    for t in MemoryTech:
        assert len({rep.mean(t, "edp", g) for g in rep.groups()}) == 1


def test_batch_rejects_mixed_family(curves):
    with pytest.raises(ValueError):
        batch_sweep([WorkloadStats("A", Phase.HPC, 1, 1, 1),
                     WorkloadStats("B", Phase.HPC, 2, 1, 1)], curves)


def test_shipped_batch_family(curves, batch_family):
    train = [s for s in batch_family if s.phase is Phase.Training]
    rep = batch_sweep(train, curves)
    ratios = [rw_ratio(s) for s in sorted(train, key=lambda s: s.batch_size)]
    edp = [rep.mean(STT, "edp", g) for g in rep.groups()]
    assert ratios == sorted(ratios)
    assert edp == sorted(edp, reverse=True)


@pytest.fixture(scope="module")
def scal(curves, workloads):
    return scalability_study(curves, workloads)


def test_scalability_read_latency(scal):
    grid = scal.extras["ppa_grid_mb"]
    lead = dict(zip(grid, scal.extras["read_latency_leader"]))
    assert all(lead[c] == "SRAM" for c in grid if c <= 3)
    assert all(lead[c] != "SRAM" for c in grid if c >= 4)


def test_scalability_break_even(scal):
    assert scal.extras["break_even_mb"]["SOT_MRAM"]["read_energy_nj"] == 7.0


def test_scalability_edp_non_increasing(scal):
    for t in (STT, SOT):
        edp = [scal.mean(t, "edp", g) for g in scal.groups()]
        assert edp == sorted(edp, reverse=True)
    assert scal.groups() == [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
    assert set(DEFAULT_GRID) == set(scal.extras["ppa_grid_mb"])


def test_scalability_dispersion(scal):
    for s in scal.summary:
        assert s.min <= s.geomean <= s.max
        assert s.log_std >= 0


# property checks on random PPAs and workloads

pos = st.floats(0.01, 100.0)
ppa_st = st.builds(CachePPA, st.just(STT), st.just(3.0), pos, pos, pos, pos,
                   st.floats(1.0, 1e4), pos)
count = st.integers(0, 10**9)


@settings(max_examples=300)
@given(ppa_st, count, count, st.integers(0, 10**7), st.one_of(st.none(), st.floats(1e-3, 10)))
def test_energy_additivity(ppa, nr, nw, nd, t):
    assume(nr + nw > 0)
    r = evaluate(stats(nr, nw, dram_reads=nd, exec_time_s=t), ppa, dram=DramParams())
    e = r.energy
    assert e.total_j == e.dynamic_j + e.leakage_j + e.dram_j
    assert r.edp_js == e.total_j * r.delay_s


@settings(max_examples=300)
@given(ppa_st, st.integers(1, 10**9), count, st.integers(1, 1000))
def test_linearity(ppa, nr, nw, k):
    s = stats(nr, nw)
    a, b = evaluate(s, ppa), evaluate(s.scaled(k), ppa)
    assert b.energy.dynamic_j == pytest.approx(k * a.energy.dynamic_j, rel=1e-12)
    assert b.delay_s == pytest.approx(k * a.delay_s, rel=1e-12)
    assert b.energy.total_j == pytest.approx(k * a.energy.total_j, rel=1e-12)
    assert b.edp_js == pytest.approx(k * k * a.edp_js, rel=1e-12)


@settings(max_examples=300)
@given(ppa_st, ppa_st, st.integers(1, 10**9), count, st.floats(1e-3, 10))
def test_bracketing(nvm, base, nr, nw, t):
    s = stats(nr, nw, exec_time_s=t)
    a, b = evaluate(s, nvm), evaluate(s, base)
    dyn = a.energy.dynamic_j / b.energy.dynamic_j
    leak = a.energy.leakage_j / b.energy.leakage_j
    total = a.energy.total_j / b.energy.total_j
    eps = 1e-12
    assert min(dyn, leak) * (1 - eps) <= total <= max(dyn, leak) * (1 + eps)


@settings(max_examples=200)
@given(ppa_st, st.integers(1, 10**8), count, st.integers(1, 10**6), st.integers(1, 10**6),
       st.floats(1, 200), st.floats(1, 200), st.floats(1.01, 10))
def test_monotone_dram_sensitivity(ppa, nr, nw, fewer, extra, e_nj, t_ns, grow):
    # identical cache terms; the NVM side has strictly fewer DRAM transactions
    base = CachePPA(SRAM, ppa.capacity_mb, *ppa.values())
    s = stats(nr, nw)

    def ratio(d):
        return (evaluate(s, ppa, dram=d, dram_txn_override=fewer).edp_js /
                evaluate(s, base, dram=d, dram_txn_override=fewer + extra).edp_js)

    assert ratio(DramParams(e_nj * grow, t_ns)) < ratio(DramParams(e_nj, t_ns))
    assert ratio(DramParams(e_nj, t_ns * grow)) < ratio(DramParams(e_nj, t_ns))


def test_baseline_ratios_exactly_one_randomized(curves):
    import random
    rng = random.Random(5)
    ws = [WorkloadStats(f"w{i}", Phase.HPC, 1, rng.randint(1, 10**9), rng.randint(0, 10**9),
                        exec_time_s=rng.choice([None, rng.uniform(0.01, 5)]))
          for i in range(50)]
    for cap in (1, 3, 7.5, 20):
        rep = iso_capacity_study(ws, curves, capacity_mb=cap)
        for row in rep.rows:
            if row.tech is SRAM:
                assert {row.dynamic, row.leakage, row.total, row.delay, row.edp} == {1.0}
