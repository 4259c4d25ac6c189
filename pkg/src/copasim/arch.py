"""Architecture configuration: design types, validation and named presets.

A :class:`CopaDesign` describes one point in the composable-GPU design
space: the GPU module (GPM) core and its L2, an optional memory-system
module (MSM) carrying a memory-side L3 behind an on-package UHB link, and
the HBM attach.  Leaf types enforce their own local invariants at
construction; cross-field design rules live in :func:`validate` so that
deliberately broken designs can still be constructed and inspected.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import PresetError, ValidationError
from .units import MB, is_power_of_two, parse_bytes, parse_rate

FULLY_ASSOCIATIVE = "full"

#: Default cache geometry for both L2 and L3.
DEFAULT_LINE_SIZE = 256
DEFAULT_ASSOCIATIVITY = 8

# GPU-N ships six HBM sites; per-site figures are derived from its totals
# so that 10 and 14 sites land on the published 4.5/6.3 TB/s scale-ups.
GPU_N_DRAM_BW = 2687e9
GPU_N_DRAM_GB = 100.0
GPU_N_HBM_SITES = 6

# UHB link sizing: 2xRD + 2xWR of the baseline DRAM bandwidth, with the
# L2-to-L3 round trip at half the DRAM access latency.
UHB_RD_BW = 2 * GPU_N_DRAM_BW
UHB_WR_BW = 2 * GPU_N_DRAM_BW
UHB_RTT_NS = 120.0
L3_ACCESS_NS = 60.0
DRAM_LATENCY_NS = 360.0

L3_CAP_3D = 960 * MB
L3_CAP_2P5D = 1920 * MB
HBM_SITES_3D = 6
HBM_SITES_2P5D = 14


class Integration(str, Enum):
    MONOLITHIC = "monolithic"
    STACKED_3D = "stacked_3d"
    PLANAR_2P5D = "planar_2p5d"


class DramAttach(str, Enum):
    ON_GPM = "on_gpm"
    ON_MSM = "on_msm"


@dataclass(frozen=True)
class GpuCoreConfig:
    sm_count: int
    frequency_ghz: float
    peak_fp32_tflops: float
    peak_fp16_tflops: float
    kernel_launch_overhead_us: float = 2.0

    def __post_init__(self):
        if self.sm_count <= 0:
            raise ValidationError("sm_count must be positive")
        if self.frequency_ghz <= 0:
            raise ValidationError("frequency must be positive")
        if not (self.peak_fp16_tflops >= self.peak_fp32_tflops > 0):
            raise ValidationError("require peak_fp16 >= peak_fp32 > 0")
        if self.kernel_launch_overhead_us < 0:
            raise ValidationError("kernel_launch_overhead must be >= 0")

    def peak_flops(self, precision: str) -> float:
        if precision == "fp16":
            return self.peak_fp16_tflops * 1e12
        if precision == "fp32":
            return self.peak_fp32_tflops * 1e12
        raise ValidationError(f"unknown precision {precision!r}")


@dataclass(frozen=True)
class CacheLevelSpec:
    """One cache level.

    ``capacity_bytes`` may be ``inf`` (idealized) or 0 (a wired but empty
    level that passes traffic straight through).  ``associativity`` is a
    way count or the sentinel ``"full"``.
    """

    capacity_bytes: float
    line_size: int = DEFAULT_LINE_SIZE
    associativity: int | str = DEFAULT_ASSOCIATIVITY
    read_bandwidth: float = 20e12
    write_bandwidth: float = 20e12
    access_latency_ns: float = 30.0

    def __post_init__(self):
        if not is_power_of_two(self.line_size):
            raise ValidationError(f"line_size {self.line_size} is not a power of two")
        assoc = self.associativity
        if assoc != FULLY_ASSOCIATIVE and (not isinstance(assoc, int) or assoc < 1):
            raise ValidationError(f"associativity must be >= 1 or 'full', got {assoc!r}")
        cap = self.capacity_bytes
        if cap != math.inf and cap != 0:
            if cap <= 0 or cap != int(cap):
                raise ValidationError("capacity must be a non-negative byte count")
            unit = self.line_size if assoc == FULLY_ASSOCIATIVE else self.line_size * assoc
            if int(cap) % unit:
                raise ValidationError(
                    f"capacity {int(cap)} is not a multiple of line_size x associativity ({unit})"
                )
        if self.read_bandwidth <= 0 or self.write_bandwidth <= 0:
            raise ValidationError("cache bandwidths must be positive")
        if self.access_latency_ns < 0:
            raise ValidationError("access latency must be >= 0")

    @property
    def is_fully_associative(self) -> bool:
        return self.associativity == FULLY_ASSOCIATIVE

    @property
    def num_sets(self) -> int:
        if self.is_fully_associative or self.capacity_bytes in (0, math.inf):
            return 1
        return int(self.capacity_bytes) // (self.line_size * self.associativity)


@dataclass(frozen=True)
class UhbLinkSpec:
    read_bandwidth: float = UHB_RD_BW
    write_bandwidth: float = UHB_WR_BW
    round_trip_latency_ns: float = UHB_RTT_NS
    energy_per_bit_pj: float = 0.3
    toggle_rate: float = 0.25

    def __post_init__(self):
        if self.read_bandwidth < 0 or self.write_bandwidth < 0:
            raise ValidationError("link bandwidths must be >= 0")
        if self.round_trip_latency_ns < 0:
            raise ValidationError("round_trip_latency must be >= 0")
        if not (0 < self.toggle_rate <= 1):
            raise ValidationError("toggle_rate must be in (0, 1]")


@dataclass(frozen=True)
class DramSpec:
    hbm_sites: int
    bandwidth_per_site: float  # bytes/s
    capacity_per_site_gb: float
    access_latency_ns: float = DRAM_LATENCY_NS

    def __post_init__(self):
        if self.hbm_sites < 0:
            raise ValidationError("hbm_sites must be >= 0")
        if self.bandwidth_per_site < 0 or self.capacity_per_site_gb < 0:
            raise ValidationError("per-site DRAM resources must be >= 0")

    @property
    def total_bandwidth(self) -> float:
        return self.hbm_sites * self.bandwidth_per_site

    @property
    def total_capacity_gb(self) -> float:
        return self.hbm_sites * self.capacity_per_site_gb


@dataclass(frozen=True)
class CopaDesign:
    name: str
    integration: Integration
    core: GpuCoreConfig
    l2: CacheLevelSpec
    msm_present: bool
    l3: CacheLevelSpec | None
    uhb: UhbLinkSpec | None
    dram: DramSpec
    dram_attach: DramAttach

    @property
    def line_size(self) -> int:
        return self.l2.line_size

    def downstream_round_trip_ns(self) -> float:
        """Latency seen by an L2 miss: link + L3 with an MSM, else DRAM."""
        if self.msm_present and self.uhb is not None:
            l3_ns = self.l3.access_latency_ns if self.l3 is not None else 0.0
            return self.uhb.round_trip_latency_ns + l3_ns
        return self.dram.access_latency_ns

    def to_json_dict(self) -> dict:
        def num(x):
            return "inf" if x == math.inf else x

        def cache(c):
            if c is None:
                return None
            return {
                "capacity": num(c.capacity_bytes),
                "line_size": c.line_size,
                "associativity": c.associativity,
                "read_bandwidth": num(c.read_bandwidth),
                "write_bandwidth": num(c.write_bandwidth),
                "access_latency_ns": c.access_latency_ns,
            }

        return {
            "name": self.name,
            "integration": self.integration.value,
            "core": {
                "sm_count": self.core.sm_count,
                "frequency_ghz": self.core.frequency_ghz,
                "peak_fp32_tflops": self.core.peak_fp32_tflops,
                "peak_fp16_tflops": self.core.peak_fp16_tflops,
                "kernel_launch_overhead_us": self.core.kernel_launch_overhead_us,
            },
            "l2": cache(self.l2),
            "msm_present": self.msm_present,
            "l3": cache(self.l3),
            "uhb": None
            if self.uhb is None
            else {
                "read_bandwidth": num(self.uhb.read_bandwidth),
                "write_bandwidth": num(self.uhb.write_bandwidth),
                "round_trip_latency_ns": self.uhb.round_trip_latency_ns,
                "energy_per_bit_pj": self.uhb.energy_per_bit_pj,
                "toggle_rate": self.uhb.toggle_rate,
            },
            "dram": {
                "hbm_sites": self.dram.hbm_sites,
                "bandwidth_per_site": num(self.dram.bandwidth_per_site),
                "capacity_per_site_gb": self.dram.capacity_per_site_gb,
                "access_latency_ns": self.dram.access_latency_ns,
            },
            "dram_attach": self.dram_attach.value,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def validate(design: CopaDesign) -> list[str]:
    """Return every violated design rule (an empty list means valid)."""
    v = []
    if not design.msm_present:
        if design.l3 is not None:
            v.append("L3 requires MSM")
        if design.uhb is not None:
            v.append("UHB link requires MSM")
        if design.dram_attach is not DramAttach.ON_GPM:
            v.append("without an MSM the DRAM must attach on the GPM")
    else:
        if design.uhb is None:
            v.append("MSM requires a UHB link")
        if design.integration is Integration.MONOLITHIC:
            v.append("MSM requires 2.5D or 3D integration, not monolithic")
        if design.dram_attach is not DramAttach.ON_MSM:
            v.append("with an MSM the memory controllers sit on the MSM")
        if design.uhb is not None and (
            design.uhb.read_bandwidth == 0 or design.uhb.write_bandwidth == 0
        ):
            v.append("UHB link bandwidth must be positive when the link is present")

    l3_cap = design.l3.capacity_bytes if design.l3 is not None else 0
    if design.integration is Integration.STACKED_3D:
        if l3_cap > L3_CAP_3D:
            v.append(
                f"3D integration limits the L3 to {L3_CAP_3D // MB}MB on a single "
                f"bonded MSM die (got {l3_cap / MB:.0f}MB)"
            )
        if design.dram.hbm_sites > HBM_SITES_3D:
            v.append(
                f"3D integration adds no die edge: at most {HBM_SITES_3D} HBM sites "
                f"(got {design.dram.hbm_sites})"
            )
    elif design.integration is Integration.PLANAR_2P5D:
        if l3_cap > L3_CAP_2P5D:
            v.append(
                f"2.5D integration limits the L3 to {L3_CAP_2P5D // MB}MB across two "
                f"MSM dies (got {l3_cap / MB:.0f}MB)"
            )
        if design.dram.hbm_sites > HBM_SITES_2P5D:
            v.append(
                f"2.5D integration supports at most {HBM_SITES_2P5D} HBM sites "
                f"(got {design.dram.hbm_sites})"
            )

    if design.l3 is not None and design.l3.line_size != design.l2.line_size:
        v.append("L2 and L3 line sizes must match")
    return v


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _core_gpu_n():
    return GpuCoreConfig(134, 1.4, 24.2, 779.0)


def _l2(capacity, associativity=DEFAULT_ASSOCIATIVITY):
    return CacheLevelSpec(capacity, DEFAULT_LINE_SIZE, associativity)


def _l3(capacity):
    # The MSM SRAM is provisioned to the aggregate link bandwidth.
    return CacheLevelSpec(
        capacity,
        DEFAULT_LINE_SIZE,
        DEFAULT_ASSOCIATIVITY,
        read_bandwidth=UHB_RD_BW + UHB_WR_BW,
        write_bandwidth=UHB_RD_BW + UHB_WR_BW,
        access_latency_ns=L3_ACCESS_NS,
    )


def _dram(sites, bw_per_site=GPU_N_DRAM_BW / GPU_N_HBM_SITES,
          cap_per_site=GPU_N_DRAM_GB / GPU_N_HBM_SITES):
    return DramSpec(sites, bw_per_site, cap_per_site)


def _uhb(energy_pj):
    return UhbLinkSpec(energy_per_bit_pj=energy_pj)


def _monolithic(name, core, l2_cap_mb, dram_sites, dram_bw, dram_gb, l2_assoc=16):
    return CopaDesign(
        name=name,
        integration=Integration.MONOLITHIC,
        core=core,
        l2=_l2(l2_cap_mb * MB, l2_assoc),
        msm_present=False,
        l3=None,
        uhb=None,
        dram=DramSpec(dram_sites, dram_bw / dram_sites, dram_gb / dram_sites),
        dram_attach=DramAttach.ON_GPM,
    )


def _copa(name, integration, l3_cap_mb, sites, energy_pj):
    return CopaDesign(
        name=name,
        integration=integration,
        core=_core_gpu_n(),
        l2=_l2(60 * MB),
        msm_present=True,
        l3=_l3(l3_cap_mb * MB),
        uhb=_uhb(energy_pj),
        dram=_dram(sites),
        dram_attach=DramAttach.ON_MSM,
    )


def _build_presets():
    g3d, g25 = Integration.STACKED_3D, Integration.PLANAR_2P5D
    perfect = CopaDesign(
        name="PerfectL2",
        integration=Integration.MONOLITHIC,
        core=_core_gpu_n(),
        l2=CacheLevelSpec(math.inf, DEFAULT_LINE_SIZE, FULLY_ASSOCIATIVE),
        msm_present=False,
        l3=None,
        uhb=None,
        dram=DramSpec(GPU_N_HBM_SITES, math.inf, GPU_N_DRAM_GB / GPU_N_HBM_SITES),
        dram_attach=DramAttach.ON_GPM,
    )
    return {
        "V100": _monolithic("V100", GpuCoreConfig(80, 1.4, 15.7, 125.0), 6, 4, 900e9, 16.0),
        "A100": _monolithic("A100", GpuCoreConfig(108, 1.4, 19.5, 312.0), 40, 5, 1555e9, 40.0),
        "GPU-N": _monolithic("GPU-N", _core_gpu_n(), 60, 6, GPU_N_DRAM_BW, GPU_N_DRAM_GB),
        "HBM+L3": _copa("HBM+L3", g3d, 960, 6, 0.05),
        "HBML+L3": _copa("HBML+L3", g25, 960, 10, 0.3),
        "HBM+L3L": _copa("HBM+L3L", g25, 1920, 6, 0.3),
        "HBML+L3L": _copa("HBML+L3L", g25, 1920, 10, 0.3),
        "HBMLL+L3L": _copa("HBMLL+L3L", g25, 1920, 14, 0.3),
        "PerfectL2": perfect,
    }


_PRESETS = _build_presets()
PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> CopaDesign:
    """Return a named design (V100, A100, GPU-N, the COPA variants, PerfectL2)."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise PresetError(name, PRESET_NAMES) from None


def with_dram_bw_multiplier(design: CopaDesign, multiplier: float) -> CopaDesign:
    """Scale total DRAM bandwidth; ``inf`` idealizes it."""
    if multiplier != math.inf and multiplier <= 0:
        raise ValidationError("DRAM bandwidth multiplier must be positive or inf")
    bw = math.inf if multiplier == math.inf else design.dram.bandwidth_per_site * multiplier
    return replace(
        design,
        name=f"{design.name}@dram x{multiplier}",
        dram=replace(design.dram, bandwidth_per_site=bw),
    )


def with_llc_capacity(design: CopaDesign, capacity_bytes, fully_associative=True) -> CopaDesign:
    """Resize the last-level cache of an MSM-less design (its L2)."""
    if design.msm_present:
        raise ValidationError("LLC resizing applies to designs without an MSM")
    assoc = FULLY_ASSOCIATIVE if (fully_associative or capacity_bytes == math.inf) \
        else design.l2.associativity
    l2 = replace(design.l2, capacity_bytes=capacity_bytes, associativity=assoc)
    label = "inf" if capacity_bytes == math.inf else f"{capacity_bytes / MB:g}MB"
    return replace(design, name=f"{design.name}@llc {label}", l2=l2)


def with_link_bw(design: CopaDesign, read_mult: float, write_mult: float) -> CopaDesign:
    """Set UHB read/write bandwidth as multiples of baseline DRAM bandwidth."""
    if design.uhb is None:
        raise ValidationError("design has no UHB link")
    base = GPU_N_DRAM_BW
    rd = math.inf if read_mult == math.inf else read_mult * base
    wr = math.inf if write_mult == math.inf else write_mult * base
    uhb = replace(design.uhb, read_bandwidth=rd, write_bandwidth=wr)
    l3 = design.l3
    if l3 is not None and rd != math.inf and wr != math.inf:
        l3 = replace(l3, read_bandwidth=rd + wr, write_bandwidth=rd + wr)
    elif l3 is not None:
        l3 = replace(l3, read_bandwidth=math.inf, write_bandwidth=math.inf)
    return replace(design, name=f"{design.name}@link {read_mult}+{write_mult}",
                   uhb=uhb, l3=l3)


# ---------------------------------------------------------------------------
# Loading and serialization
# ---------------------------------------------------------------------------

def _expect(doc, key, path, typ=None):
    if key not in doc:
        raise ValidationError(f"{path}{key}: missing required field")
    val = doc[key]
    if typ is not None and not isinstance(val, typ):
        raise ValidationError(f"{path}{key}: expected {typ}, got {type(val).__name__}")
    return val


def _load_cache(doc, path):
    if doc is None:
        return None
    cap = parse_bytes(_expect(doc, "capacity", path))
    assoc = doc.get("associativity", DEFAULT_ASSOCIATIVITY)
    if assoc != FULLY_ASSOCIATIVE and not isinstance(assoc, int):
        raise ValidationError(f"{path}associativity: expected way count or 'full'")
    try:
        return CacheLevelSpec(
            capacity_bytes=cap,
            line_size=doc.get("line_size", DEFAULT_LINE_SIZE),
            associativity=assoc,
            read_bandwidth=parse_rate(doc.get("read_bandwidth", 20e12)),
            write_bandwidth=parse_rate(doc.get("write_bandwidth", 20e12)),
            access_latency_ns=float(doc.get("access_latency_ns", 30.0)),
        )
    except ValidationError as e:
        raise ValidationError(f"{path}{e}") from None


def load_design(document, strict: bool = True) -> CopaDesign:
    """Parse and validate a design document (JSON text or dict).

    With ``strict`` (the default) design-rule violations raise; otherwise
    the design is returned for the caller to inspect via :func:`validate`.
    Schema errors always raise, with the offending field path.
    """
    if isinstance(document, str):
        document = json.loads(document)
    if not isinstance(document, dict):
        raise ValidationError("design document must be a JSON object")

    integration = _expect(document, "integration", "")
    try:
        integration = Integration(integration)
    except ValueError:
        raise ValidationError(
            f"integration: expected one of {[i.value for i in Integration]}, got {integration!r}"
        ) from None

    core_doc = _expect(document, "core", "", dict)
    try:
        core = GpuCoreConfig(
            sm_count=_expect(core_doc, "sm_count", "core.", int),
            frequency_ghz=float(_expect(core_doc, "frequency_ghz", "core.")),
            peak_fp32_tflops=float(_expect(core_doc, "peak_fp32_tflops", "core.")),
            peak_fp16_tflops=float(_expect(core_doc, "peak_fp16_tflops", "core.")),
            kernel_launch_overhead_us=float(core_doc.get("kernel_launch_overhead_us", 2.0)),
        )
    except ValidationError as e:
        if "core." in str(e):
            raise
        raise ValidationError(f"core.{e}") from None

    uhb_doc = document.get("uhb")
    uhb = None
    if uhb_doc is not None:
        uhb = UhbLinkSpec(
            read_bandwidth=parse_rate(_expect(uhb_doc, "read_bandwidth", "uhb.")),
            write_bandwidth=parse_rate(_expect(uhb_doc, "write_bandwidth", "uhb.")),
            round_trip_latency_ns=float(uhb_doc.get("round_trip_latency_ns", UHB_RTT_NS)),
            energy_per_bit_pj=float(uhb_doc.get("energy_per_bit_pj", 0.3)),
            toggle_rate=float(uhb_doc.get("toggle_rate", 0.25)),
        )

    dram_doc = _expect(document, "dram", "", dict)
    dram = DramSpec(
        hbm_sites=_expect(dram_doc, "hbm_sites", "dram.", int),
        bandwidth_per_site=parse_rate(_expect(dram_doc, "bandwidth_per_site", "dram.")),
        capacity_per_site_gb=float(_expect(dram_doc, "capacity_per_site_gb", "dram.")),
        access_latency_ns=float(dram_doc.get("access_latency_ns", DRAM_LATENCY_NS)),
    )

    attach = document.get("dram_attach", "on_gpm")
    try:
        attach = DramAttach(attach)
    except ValueError:
        raise ValidationError(
            f"dram_attach: expected one of {[a.value for a in DramAttach]}, got {attach!r}"
        ) from None

    design = CopaDesign(
        name=str(_expect(document, "name", "")),
        integration=integration,
        core=core,
        l2=_load_cache(_expect(document, "l2", "", dict), "l2."),
        msm_present=bool(_expect(document, "msm_present", "")),
        l3=_load_cache(document.get("l3"), "l3."),
        uhb=uhb,
        dram=dram,
        dram_attach=attach,
    )
    if strict:
        violations = validate(design)
        if violations:
            raise ValidationError("; ".join(violations))
    return design
