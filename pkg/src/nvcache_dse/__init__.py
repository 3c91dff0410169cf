"""Design-space exploration for SRAM, STT-MRAM and SOT-MRAM last-level GPU caches."""
from .analysis import (EnergyBreakdown, NormalizedReport, WorkloadTechResult, batch_sweep,
                       cache_delay, dram_cost, dynamic_energy, evaluate, iso_area_capacity,
                       iso_area_study, iso_capacity_study, leakage_energy, scalability_study)
from .cachemodel import (AccessType, AnchorCurveSet, AnchoredPPAModel, CachePPA, OptTarget,
                         area_at, estimate_ppa, load_anchor_curves)
from .cachesim import CacheGeometry, SimResult, capacity_sweep, dram_reduction, simulate
from .techmodel import (BitcellParams, DramParams, MemoryTech, PlatformParams,
                        parse_bitcell_file, validate_bitcell)
from .tuner import EDAPTuner, ReferenceMix, SweepSpace, TunedConfig, edap, tune
from .workload import (SyntheticTraceSpec, TraceEvent, WorkloadStats, gen_trace,
                       parse_profile_csv, rw_ratio)

__version__ = "0.1.0"
