"""Limiter-based timing model and idealization-based bottleneck attribution.

Each kernel's time is the maximum over per-resource transfer/compute times
(roofline style) plus a fixed launch overhead; kernels execute back to
back.  Attribution compares the baseline against selectively idealized
re-timings of the same traffic: first DRAM bandwidth, then the rest of the
memory system, then SM utilization and launch overhead.  The idealization
order is fixed (DRAM -> other memory -> SM idle); a different order would
redistribute overlapped time between segments.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .arch import CopaDesign
from .cachesim import KernelTraffic, SimOptions, TrafficReport, simulate
from .errors import ContractError
from .workloads import KernelDescriptor, Trace

LIMITERS = ("math", "l2", "link", "l3", "dram", "latency", "launch")


@dataclass(frozen=True)
class PerfParams:
    """Free parameters of the timing model.

    ``sm_work_capacity`` is the work-unit count that saturates the SMs;
    ``memory_concurrency`` the outstanding misses the machine can overlap.
    Both default per SM and scale with the core.
    """

    sm_work_capacity_per_sm: int = 32
    memory_concurrency_per_sm: int = 256

    def sm_work_capacity(self, design: CopaDesign) -> int:
        return self.sm_work_capacity_per_sm * design.core.sm_count

    def memory_concurrency(self, design: CopaDesign) -> int:
        return self.memory_concurrency_per_sm * design.core.sm_count


DEFAULT_PERF_PARAMS = PerfParams()


@dataclass(frozen=True)
class IdealFlags:
    dram_bw: bool = False      # treat DRAM bandwidth as infinite
    mem_other: bool = False    # infinite L2/L3/link bandwidth, zero latency
    full_util: bool = False    # force u = 1 and drop launch overhead


@dataclass
class KernelTiming:
    t_math: float
    t_l2: float
    t_link_read: float
    t_link_write: float
    t_l3: float
    t_dram: float
    t_latency_floor: float
    t_launch: float
    t_total: float
    limiter: str


@dataclass
class TimeBreakdown:
    math: float
    sm_idle: float
    mem_other: float
    dram_bw: float

    @property
    def total(self) -> float:
        return self.math + self.sm_idle + self.mem_other + self.dram_bw

    def to_json_dict(self) -> dict:
        return {"math_s": self.math, "sm_idle_s": self.sm_idle,
                "mem_other_s": self.mem_other, "dram_bw_s": self.dram_bw,
                "total_s": self.total}


@dataclass
class SimResult:
    kernel_timings: list
    total_seconds: float
    traffic: TrafficReport
    achieved_bandwidth: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "total_seconds": self.total_seconds,
            "achieved_bandwidth_gbs": self.achieved_bandwidth,
            "kernels": [vars(t).copy() for t in self.kernel_timings],
        }


def _xfer_time(nbytes: float, bandwidth: float, what: str) -> float:
    if nbytes == 0:
        return 0.0
    if bandwidth == math.inf:
        return 0.0
    if bandwidth <= 0:
        raise ContractError(f"{what}: moving {nbytes} bytes over zero bandwidth")
    return nbytes / bandwidth


def kernel_time(kernel: KernelDescriptor, traffic: KernelTraffic,
                design: CopaDesign, params: PerfParams = DEFAULT_PERF_PARAMS,
                ideal: IdealFlags = IdealFlags()) -> KernelTiming:
    """Limiter-model time for one kernel given its traffic under a design."""
    core = design.core
    ls = design.line_size

    u = 1.0
    if not ideal.full_util:
        u = min(1.0, kernel.parallelism / params.sm_work_capacity(design))
    t_math = 0.0
    for precision, flops in kernel.flops.items():
        if flops:
            t_math += flops / (core.peak_flops(precision) * u)

    if ideal.mem_other:
        t_l2 = t_link_r = t_link_w = t_l3 = t_lat = 0.0
    else:
        t_l2 = _xfer_time(traffic.l2.accesses * ls, design.l2.read_bandwidth, "L2")
        t_link_r = t_link_w = 0.0
        if design.msm_present and design.uhb is not None:
            t_link_r = _xfer_time(traffic.link_to_l3.read_bytes,
                                  design.uhb.read_bandwidth, "link read")
            t_link_w = _xfer_time(traffic.link_to_l3.write_bytes,
                                  design.uhb.write_bandwidth, "link write")
        t_l3 = 0.0
        if design.l3 is not None and traffic.l3.accesses:
            t_l3 = _xfer_time(traffic.l3.accesses * ls, design.l3.read_bandwidth, "L3")
        t_lat = (traffic.l2.misses * design.downstream_round_trip_ns() * 1e-9
                 / params.memory_concurrency(design))

    dram_bw = design.dram.total_bandwidth
    if ideal.dram_bw:
        dram_bw = math.inf
    t_dram = _xfer_time(traffic.dram.total, dram_bw, "DRAM")

    t_launch = 0.0 if ideal.full_util else core.kernel_launch_overhead_us * 1e-6

    components = (t_math, t_l2, max(t_link_r, t_link_w), t_l3, t_dram, t_lat)
    names = ("math", "l2", "link", "l3", "dram", "latency")
    peak = max(components)
    limiter = "launch" if peak == 0.0 else names[components.index(peak)]
    return KernelTiming(
        t_math=t_math, t_l2=t_l2, t_link_read=t_link_r, t_link_write=t_link_w,
        t_l3=t_l3, t_dram=t_dram, t_latency_floor=t_lat, t_launch=t_launch,
        t_total=peak + t_launch, limiter=limiter,
    )


def time_traffic(trace: Trace, traffic: TrafficReport, design: CopaDesign,
                 params: PerfParams = DEFAULT_PERF_PARAMS,
                 ideal: IdealFlags = IdealFlags()) -> SimResult:
    """Time every kernel of an already-simulated trace."""
    timings = []
    total = 0.0
    for kernel, kt in zip(trace.kernels, traffic.kernels):
        t = kernel_time(kernel, kt, design, params, ideal)
        timings.append(t)
        total += t.t_total
    achieved = {}
    if total > 0:
        achieved = {
            "l2": traffic.totals.l2.accesses * design.line_size / total / 1e9,
            "link_read": traffic.totals.link_to_l3.read_bytes / total / 1e9,
            "link_write": traffic.totals.link_to_l3.write_bytes / total / 1e9,
            "dram": traffic.totals.dram.total / total / 1e9,
        }
    return SimResult(timings, total, traffic, achieved)


def run(trace: Trace, design: CopaDesign, params: PerfParams = DEFAULT_PERF_PARAMS,
        options: SimOptions | None = None, ideal: IdealFlags = IdealFlags()) -> SimResult:
    """Simulate traffic, then time every kernel."""
    traffic = simulate(trace, design, options)
    return time_traffic(trace, traffic, design, params, ideal)


def attribute(trace: Trace, design: CopaDesign,
              params: PerfParams = DEFAULT_PERF_PARAMS,
              options: SimOptions | None = None) -> TimeBreakdown:
    """Four-run bottleneck attribution; segments sum to the baseline exactly.

    R0 baseline; R1 idealizes DRAM bandwidth; R2 additionally idealizes the
    rest of the memory system; R3 additionally forces full utilization and
    free launches.  Segments are consecutive differences.
    """
    traffic = simulate(trace, design, options)
    r0 = time_traffic(trace, traffic, design, params).total_seconds
    r1 = time_traffic(trace, traffic, design, params,
                      IdealFlags(dram_bw=True)).total_seconds
    r2 = time_traffic(trace, traffic, design, params,
                      IdealFlags(dram_bw=True, mem_other=True)).total_seconds
    r3 = time_traffic(trace, traffic, design, params,
                      IdealFlags(dram_bw=True, mem_other=True, full_util=True)
                      ).total_seconds
    return TimeBreakdown(math=r3, sm_idle=r2 - r3, mem_other=r1 - r2, dram_bw=r0 - r1)


def speedup(result_a: SimResult, result_b: SimResult) -> float:
    """Ratio of a's runtime to b's (how much faster b is than a)."""
    if result_b.total_seconds == 0:
        raise ContractError("cannot compute speedup against zero runtime")
    return result_a.total_seconds / result_b.total_seconds


def result_to_json(result: SimResult, breakdown: TimeBreakdown | None = None,
                   energy=None) -> str:
    doc = result.to_json_dict()
    doc["traffic"] = result.traffic.to_json_dict()
    if breakdown is not None:
        doc["attribution"] = breakdown.to_json_dict()
    if energy is not None:
        doc["energy"] = energy.to_json_dict()
    return json.dumps(doc, indent=2)
