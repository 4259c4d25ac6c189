"""Sweep harness: orchestrates the sensitivity experiments as parameter
sweeps over (workload suite x design variants) and aggregates normalized,
geomean speedups per batch regime."""
from __future__ import annotations

import json
import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import workloads
from .arch import (CopaDesign, preset, with_dram_bw_multiplier, with_link_bw,
                   with_llc_capacity)
from .cachesim import simulate_llc_ladder, traffic_reduction
from .energy import EnergyParams, memory_energy
from .errors import ContractError, ValidationError
from .perf import DEFAULT_PERF_PARAMS, PerfParams, run, time_traffic
from .units import MB, parse_bytes
from .workloads import Trace

REGIMES = ("train_lb", "train_sb", "infer_lb", "infer_sb", "hpc")

AXES = ("dram_bw_multiplier", "llc_capacity", "l3_link_bw", "named_designs",
        "gpu_count")

DEFAULT_DRAM_POINTS = (0.5, 0.75, 1, 1.5, 2, 3, math.inf)
DEFAULT_LLC_POINTS_MB = (60, 120, 240, 480, 960, 1920, 3840, "perfect")
DEFAULT_LINK_POINTS = ((0.5, 0.5), (1, 1), (2, 2), (4, 4), math.inf)
DEFAULT_DESIGN_POINTS = ("GPU-N", "HBM+L3", "HBML+L3", "HBM+L3L", "HBML+L3L",
                         "HBMLL+L3L")
DEFAULT_SCALE_POINTS = (1, 2, 4, "HBML+L3")

_TRAIN_PRESETS = ("resnet", "ssd", "maskrcnn", "gnmt", "transformer", "ncf")
_INFER_PRESETS = ("resnet", "mobilenet", "ssd", "gnmt")


def geomean(values) -> float:
    """exp(mean(log values)); all values must be positive."""
    vals = list(values)
    if not vals:
        raise ContractError("geomean of an empty sequence")
    total = 0.0
    for v in vals:
        if v <= 0:
            raise ContractError(f"geomean requires positive values, got {v}")
        total += math.log(v)
    return math.exp(total / len(vals))


@dataclass(frozen=True)
class WorkloadRef:
    """A regeneratable workload: a DL (preset, mode, batch) or an HPC preset."""

    kind: str  # dl | hpc
    preset: str
    regime: str
    mode: str = "training"
    batch: int = 1
    seed: int = 7

    @property
    def label(self) -> str:
        if self.kind == "hpc":
            return self.preset
        return f"{self.preset}-{'train' if self.mode == 'training' else 'infer'}"

    def trace(self, batch: int | None = None) -> Trace:
        return _materialize(self, self.batch if batch is None else batch)


_TRACE_CACHE: dict = {}
_TRACE_LOCK = threading.Lock()


def _materialize(ref: WorkloadRef, batch: int) -> Trace:
    key = (ref.kind, ref.preset, ref.mode, batch, ref.seed)
    with _TRACE_LOCK:
        hit = _TRACE_CACHE.get(key)
    if hit is not None:
        return hit
    if ref.kind == "hpc":
        trace = workloads.hpc_preset_trace(ref.preset, ref.seed)
    else:
        model = workloads.dl_preset(ref.preset, ref.mode)
        trace = workloads.gen_dl_trace(model, batch, ref.seed)
    with _TRACE_LOCK:
        if len(_TRACE_CACHE) > 256:
            _TRACE_CACHE.clear()
        _TRACE_CACHE[key] = trace
    return trace


def default_suite(regimes=REGIMES, seed: int = 7) -> list:
    """The calibrated workload suite grouped by batch regime."""
    suite = []
    for regime in regimes:
        if regime == "hpc":
            for name in workloads.HPC_PRESET_NAMES:
                suite.append(WorkloadRef("hpc", name, "hpc", seed=seed))
            continue
        mode = "training" if regime.startswith("train") else "inference"
        names = _TRAIN_PRESETS if mode == "training" else _INFER_PRESETS
        for name in names:
            sb, lb = workloads.reference_batches(name, mode)
            batch = lb if regime.endswith("_lb") else sb
            suite.append(WorkloadRef("dl", name, regime, mode, batch, seed))
    return suite


@dataclass
class SweepSpec:
    suite: list
    base_design: CopaDesign
    axis: str
    points: tuple = ()
    perf_params: PerfParams = DEFAULT_PERF_PARAMS
    energy_params: EnergyParams = field(default_factory=EnergyParams)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValidationError(f"unknown sweep axis {self.axis!r}")
        if not self.suite:
            raise ValidationError("sweep needs a non-empty suite")


@dataclass
class SweepRow:
    workload: str
    regime: str
    axis_value: str
    speedup: float
    traffic_reduction: float | None
    dram_gb: float
    energy_ratio: float | None


@dataclass
class SweepResult:
    axis: str
    point_labels: list
    rows: list

    def geomeans(self) -> dict:
        """{regime: {point: geomean speedup}}, plus an 'all' regime."""
        groups: dict = {}
        for row in self.rows:
            groups.setdefault((row.regime, row.axis_value), []).append(row.speedup)
            groups.setdefault(("all", row.axis_value), []).append(row.speedup)
        out: dict = {}
        for (regime, point), vals in groups.items():
            out.setdefault(regime, {})[point] = geomean(vals)
        return out

    def speedups(self, regime: str | None = None) -> dict:
        """{(workload, point): speedup}, optionally filtered by regime."""
        return {(r.workload, r.axis_value): r.speedup for r in self.rows
                if regime is None or r.regime == regime}

    def to_csv(self) -> str:
        def num(x):
            return "" if x is None else f"{x:.9g}"

        lines = ["workload,regime,axis_value,speedup,traffic_reduction,dram_gb,energy_ratio"]
        for r in self.rows:
            lines.append(
                f"{r.workload},{r.regime},{r.axis_value},{num(r.speedup)},"
                f"{num(r.traffic_reduction)},{num(r.dram_gb)},{num(r.energy_ratio)}"
            )
        return "\n".join(lines) + "\n"


def _row(ref, label, base_result, result, base_traffic, energy_params):
    red = None
    if base_traffic is not None:
        red = traffic_reduction(base_traffic, result.traffic)
    energy = memory_energy(result.traffic, energy_params)
    return SweepRow(
        workload=ref.label,
        regime=ref.regime,
        axis_value=label,
        speedup=base_result.total_seconds / result.total_seconds,
        traffic_reduction=red,
        dram_gb=result.traffic.dram_total_bytes / 1e9,
        energy_ratio=energy.ratio_vs_no_l3,
    )


def _map_suite(suite, fn, jobs: int = 1):
    if jobs <= 1:
        return [fn(ref) for ref in suite]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, suite))


def _point_label(axis, point) -> str:
    if point == math.inf or point == "inf":
        return "inf"
    if axis == "llc_capacity":
        if isinstance(point, str):
            return point
        return f"{int(point) // MB}MB"
    if axis == "l3_link_bw":
        r, w = point
        return f"{r:g}+{w:g}"
    if axis == "gpu_count" and isinstance(point, int):
        return f"{point}x"
    if isinstance(point, float) and point == int(point):
        return f"{int(point)}"
    return f"{point}" if not isinstance(point, float) else f"{point:g}"


def sweep_dram_bw(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Speedup versus DRAM bandwidth multiplier (traffic is unchanged)."""
    points = spec.points or DEFAULT_DRAM_POINTS
    labels = [_point_label(spec.axis, p) for p in points]
    designs = [with_dram_bw_multiplier(spec.base_design, p) for p in points]

    def one(ref):
        trace = ref.trace()
        base = run(trace, spec.base_design, spec.perf_params)
        rows = []
        for label, design in zip(labels, designs):
            res = time_traffic(trace, base.traffic, design, spec.perf_params)
            rows.append(_row(ref, label, base, res, base.traffic,
                             spec.energy_params))
        return rows

    rows = [r for chunk in _map_suite(spec.suite, one, jobs) for r in chunk]
    return SweepResult(spec.axis, labels, rows)


def sweep_llc(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Speedup and DRAM-traffic reduction versus LLC capacity.

    Runs the LLC fully associative so the classical LRU stack property
    makes traffic monotone along the axis; the baseline point is the base
    design's own capacity.
    """
    if spec.base_design.msm_present:
        raise ContractError("the LLC sweep resizes the L2 of an MSM-less design")
    points = list(spec.points or DEFAULT_LLC_POINTS_MB)
    caps = []
    for p in points:
        if p == "perfect" or p == math.inf:
            caps.append(math.inf)
        else:
            c = parse_bytes(p) if isinstance(p, str) else int(p)
            caps.append(c * MB if c < (1 << 20) else c)
    labels = [_point_label(spec.axis, "perfect" if c == math.inf else c)
              for c in caps]
    base_cap = spec.base_design.l2.capacity_bytes
    try:
        base_idx = caps.index(base_cap)
    except ValueError:
        caps.insert(0, base_cap)
        labels.insert(0, _point_label(spec.axis, base_cap))
        base_idx = 0
    designs = [with_llc_capacity(spec.base_design, c) for c in caps]

    def one(ref):
        trace = ref.trace()
        reports = simulate_llc_ladder(trace, caps)
        base = time_traffic(trace, reports[base_idx], designs[base_idx],
                            spec.perf_params)
        rows = []
        for label, design, report in zip(labels, designs, reports):
            res = time_traffic(trace, report, design, spec.perf_params)
            rows.append(_row(ref, label, base, res, reports[base_idx],
                             spec.energy_params))
        return rows

    rows = [r for chunk in _map_suite(spec.suite, one, jobs) for r in chunk]
    return SweepResult(spec.axis, labels, rows)


def sweep_l3_link_bw(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Speedup versus UHB link bandwidth, in multiples of the baseline DRAM
    bandwidth per direction."""
    if not spec.base_design.msm_present or spec.base_design.l3 is None:
        raise ContractError("the link sweep needs a base design with an L3")
    points = spec.points or DEFAULT_LINK_POINTS
    norm = []
    for p in points:
        if p == math.inf or p == "inf":
            norm.append((math.inf, math.inf))
        elif isinstance(p, (tuple, list)):
            norm.append((float(p[0]), float(p[1])))
        else:
            norm.append((float(p), float(p)))
    labels = ["inf" if r == math.inf else f"{r:g}+{w:g}" for r, w in norm]
    designs = [with_link_bw(spec.base_design, r, w) for r, w in norm]

    def one(ref):
        trace = ref.trace()
        base = run(trace, spec.base_design, spec.perf_params)
        rows = []
        for label, design in zip(labels, designs):
            res = time_traffic(trace, base.traffic, design, spec.perf_params)
            rows.append(_row(ref, label, base, res, base.traffic,
                             spec.energy_params))
        return rows

    rows = [r for chunk in _map_suite(spec.suite, one, jobs) for r in chunk]
    return SweepResult(spec.axis, labels, rows)


def compare_designs(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Named designs versus the base design, per workload and regime."""
    points = spec.points or DEFAULT_DESIGN_POINTS
    designs = [preset(name) for name in points]
    labels = list(points)

    def one(ref):
        trace = ref.trace()
        base = run(trace, spec.base_design, spec.perf_params)
        rows = []
        for label, design in zip(labels, designs):
            res = run(trace, design, spec.perf_params)
            rows.append(_row(ref, label, base, res, base.traffic,
                             spec.energy_params))
        return rows

    rows = [r for chunk in _map_suite(spec.suite, one, jobs) for r in chunk]
    return SweepResult(spec.axis, labels, rows)


def scale_out(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Fixed-global-batch scaling: N base GPUs at per-GPU batch G/N versus
    COPA designs at N=1.  Integer points are GPU counts; string points are
    design names evaluated on the full batch."""
    points = spec.points or DEFAULT_SCALE_POINTS
    labels = [_point_label(spec.axis, p) for p in points]

    def one(ref):
        if ref.kind != "dl" or ref.mode != "training":
            raise ContractError("scale-out sweeps run on training workloads")
        global_batch = ref.batch
        trace = ref.trace()
        base = run(trace, spec.base_design, spec.perf_params)
        rows = []
        for label, point in zip(labels, points):
            if isinstance(point, str):
                res = run(trace, preset(point), spec.perf_params)
                row = _row(ref, label, base, res, base.traffic, spec.energy_params)
            else:
                n = int(point)
                per_gpu = global_batch / n
                batch = max(1, round(per_gpu))
                if batch * n != global_batch:
                    warnings.warn(
                        f"{ref.label}: global batch {global_batch} not divisible "
                        f"by {n}; using per-GPU batch {batch}"
                    )
                res = run(ref.trace(batch), spec.base_design, spec.perf_params)
                row = _row(ref, label, base, res, None, spec.energy_params)
                # N GPUs run their G/N batches concurrently, so global
                # iteration time is runtime(batch G/N); fixed-global-batch
                # throughput speedup is t(G) / t(G/N).
                row.speedup = base.total_seconds / res.total_seconds
            rows.append(row)
        return rows

    rows = [r for chunk in _map_suite(spec.suite, one, jobs) for r in chunk]
    return SweepResult(spec.axis, labels, rows)


_SWEEP_FNS = {
    "dram_bw_multiplier": sweep_dram_bw,
    "llc_capacity": sweep_llc,
    "l3_link_bw": sweep_l3_link_bw,
    "named_designs": compare_designs,
    "gpu_count": scale_out,
}


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    return _SWEEP_FNS[spec.axis](spec, jobs)


# ---------------------------------------------------------------------------
# Sweep-spec documents (CLI surface)
# ---------------------------------------------------------------------------

_NAMED_SUITES = {
    "default-all": REGIMES,
    "default-dl": ("train_lb", "train_sb", "infer_lb", "infer_sb"),
    "default-train": ("train_lb", "train_sb"),
    "default-train-lb": ("train_lb",),
    "default-infer": ("infer_lb", "infer_sb"),
    "default-hpc": ("hpc",),
}


def suite_from_doc(doc, seed: int = 7) -> list:
    if isinstance(doc, str):
        regimes = _NAMED_SUITES.get(doc)
        if regimes is None:
            raise ValidationError(
                f"unknown suite {doc!r} (valid: {', '.join(_NAMED_SUITES)})"
            )
        return default_suite(regimes, seed=seed)
    suite = []
    for i, entry in enumerate(doc):
        if "hpc" in entry and isinstance(entry["hpc"], dict):
            h = entry["hpc"]
            name = entry.get("name", f"hpc-{i}")
            spec = workloads.HpcPresetSpec(
                int(parse_bytes(h["working_set"])), float(h["reuse_fraction"]),
                float(h["flop_byte_ratio"]), int(h["kernels"]))
            workloads.HPC_PRESETS.setdefault(name, spec)
            suite.append(WorkloadRef("hpc", name, entry.get("regime", "hpc"),
                                     seed=entry.get("seed", seed)))
            continue
        preset_name = entry["preset"]
        if preset_name in workloads.HPC_PRESETS:
            suite.append(WorkloadRef("hpc", preset_name,
                                     entry.get("regime", "hpc"),
                                     seed=entry.get("seed", seed)))
        else:
            mode = entry.get("mode", "training")
            batch = int(entry["batch"])
            regime = entry.get("regime") or _infer_regime(preset_name, mode, batch)
            suite.append(WorkloadRef("dl", preset_name, regime, mode, batch,
                                     entry.get("seed", seed)))
    return suite


def _infer_regime(name, mode, batch):
    sb, lb = workloads.reference_batches(name, mode)
    tag = "train" if mode == "training" else "infer"
    return f"{tag}_lb" if batch >= lb else f"{tag}_sb"


def sweep_spec_from_json(doc, design_resolver) -> SweepSpec:
    """Build a SweepSpec from a parsed JSON document.

    ``design_resolver`` maps a name-or-path to a CopaDesign.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    seed = int(doc.get("seed", 7))
    suite = suite_from_doc(doc.get("suite", "default-all"), seed=seed)
    base = design_resolver(doc.get("base_design", "GPU-N"))
    axis = doc.get("axis")
    if axis not in AXES:
        raise ValidationError(f"axis must be one of {AXES}, got {axis!r}")
    points = doc.get("points")
    norm_points: tuple = ()
    if points:
        out = []
        for p in points:
            if p == "inf":
                out.append(math.inf)
            elif isinstance(p, list):
                out.append(tuple(p))
            else:
                out.append(p)
        norm_points = tuple(out)
    return SweepSpec(suite=suite, base_design=base, axis=axis, points=norm_points)


def summary_dict(results: dict) -> dict:
    """Geomean summary across several sweeps: {sweep name: SweepResult}."""
    return {
        name: {"axis": res.axis, "points": res.point_labels,
               "geomean_speedup": res.geomeans()}
        for name, res in sorted(results.items())
    }
