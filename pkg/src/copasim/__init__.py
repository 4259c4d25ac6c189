"""copasim: a design-space simulator for composable (COPA) GPU memory systems.

Generates deterministic synthetic DL/HPC memory traces, simulates them
through a configurable L2 / UHB-link / memory-side-L3 / HBM hierarchy with
a limiter-based timing model, attributes execution time to bottleneck
components, validates package-level feasibility, and reproduces the
standard design-space sweeps.
"""
from .arch import (CacheLevelSpec, CopaDesign, DramAttach, DramSpec,
                   GpuCoreConfig, Integration, UhbLinkSpec, load_design,
                   preset, PRESET_NAMES, validate)
from .cachesim import (SimOptions, TrafficReport, oracle_simulate, simulate,
                       simulate_llc_ladder, traffic_reduction)
from .energy import EnergyParams, EnergyReport, memory_energy
from .errors import ContractError, CopaError, PresetError, ValidationError
from .packaging import (DieSpec, FeasibilityReport, TechParams,
                        check_feasibility, hbm_resources, l3_budget,
                        link_power, uhb_area_3d, uhb_edge_2p5d)
from .perf import (IdealFlags, KernelTiming, PerfParams, SimResult,
                   TimeBreakdown, attribute, kernel_time, run, speedup)
from .sweeps import (SweepSpec, SweepResult, WorkloadRef, compare_designs,
                     default_suite, geomean, run_sweep, scale_out,
                     sweep_dram_bw, sweep_l3_link_bw, sweep_llc)
from .workloads import (DlModelSpec, KernelDescriptor, LayerSpec, TensorAccess,
                        Trace, dl_preset, expand, footprint, gen_dl_trace,
                        gen_hpc_trace, hpc_preset_trace, load_trace,
                        reference_batches, save_trace)

__version__ = "0.1.0"
