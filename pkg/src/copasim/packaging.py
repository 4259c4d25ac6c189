"""Package-level cost arithmetic: UHB link area/edge/power, HBM scaling,
L3 area budgets and whole-design feasibility checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .arch import CopaDesign, DramSpec, Integration
from .errors import ContractError

#: SRAM density assumed for the MSM: 960MB of L3 on an 826mm2 die.
L3_MB_PER_MM2 = 960.0 / 826.0

#: Depth of the 2.5D beachfront PHY; calibrated so a maximal 14.7TB/s link
#: costs about 6% of a reticle-limited die.
PHY_DEPTH_MM = 0.863

#: Silicon-area overhead budgets for the UHB interfaces.
AREA_BUDGET = {Integration.STACKED_3D: 0.04, Integration.PLANAR_2P5D: 0.06}

#: Fraction of the (square) GPM perimeter assignable to UHB links: two of
#: the four edges.
UHB_EDGE_FRACTION = 0.5

_REL_EPS = 1e-9


@dataclass(frozen=True)
class TechParams:
    """Interconnect technology assumptions.

    ``bw_density`` is GB/s per mm of die edge for 2.5D and GB/s per mm2 of
    bonded area for 3D.
    """

    tech: Integration
    bw_density: float
    energy_per_bit_pj: float
    signaling_rate_gbps: float | None = None

    @classmethod
    def planar_2p5d(cls) -> "TechParams":
        return cls(Integration.PLANAR_2P5D, 256.0, 0.3, 20.0)

    @classmethod
    def stacked_3d(cls) -> "TechParams":
        return cls(Integration.STACKED_3D, 512.0, 0.05, None)

    @classmethod
    def for_integration(cls, integration: Integration) -> "TechParams":
        if integration is Integration.STACKED_3D:
            return cls.stacked_3d()
        return cls.planar_2p5d()


@dataclass(frozen=True)
class DieSpec:
    area_mm2: float
    l3_density_mb_per_mm2: float = L3_MB_PER_MM2

    @property
    def edge_length_mm(self) -> float:
        """Perimeter of a square die."""
        return 4.0 * math.sqrt(self.area_mm2)


@dataclass
class FeasibilityReport:
    uhb_area_mm2: float
    uhb_area_fraction: float
    uhb_edge_mm: float
    link_power_w: float
    l3_area_required_mm2: float
    violations: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "uhb_area_mm2": self.uhb_area_mm2,
            "uhb_area_fraction": self.uhb_area_fraction,
            "uhb_edge_mm": self.uhb_edge_mm,
            "link_power_w": self.link_power_w,
            "l3_area_required_mm2": self.l3_area_required_mm2,
            "violations": list(self.violations),
            "feasible": self.feasible,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def uhb_area_3d(bandwidth_tbs: float, tech: TechParams) -> float:
    """Bonded-area cost (mm2) of a 3D UHB link of the given bandwidth."""
    if tech.tech is not Integration.STACKED_3D:
        raise ContractError("uhb_area_3d requires 3D technology parameters")
    if bandwidth_tbs < 0:
        raise ContractError("bandwidth must be >= 0")
    return bandwidth_tbs * 1e3 / tech.bw_density


def uhb_edge_2p5d(bandwidth_tbs: float, tech: TechParams) -> float:
    """Die-edge length (mm) consumed by a 2.5D UHB link."""
    if tech.tech is not Integration.PLANAR_2P5D:
        raise ContractError("uhb_edge_2p5d requires 2.5D technology parameters")
    if bandwidth_tbs < 0:
        raise ContractError("bandwidth must be >= 0")
    return bandwidth_tbs * 1e3 / tech.bw_density


def link_power(bandwidth_tbs: float, tech: TechParams, toggle_rate: float) -> float:
    """Link power in watts at full utilization with the given toggle rate."""
    if not (0 < toggle_rate <= 1):
        raise ContractError("toggle_rate must be in (0, 1]")
    if bandwidth_tbs < 0:
        raise ContractError("bandwidth must be >= 0")
    bits_per_s = bandwidth_tbs * 1e12 * 8
    return bits_per_s * tech.energy_per_bit_pj * 1e-12 * toggle_rate


def hbm_resources(sites: int, per_site: DramSpec) -> tuple[float, float]:
    """Total (bandwidth GB/s, capacity GB) for a site count."""
    if sites < 0:
        raise ContractError("sites must be >= 0")
    return (sites * per_site.bandwidth_per_site / 1e9,
            sites * per_site.capacity_per_site_gb)


def l3_budget(msm_area_mm2: float, die: DieSpec) -> float:
    """L3 capacity (MB) that fits in the given MSM silicon area."""
    if msm_area_mm2 < 0:
        raise ContractError("area must be >= 0")
    return msm_area_mm2 * die.l3_density_mb_per_mm2


def msm_die_count(integration: Integration) -> int:
    """MSM dies per package: one bonded die in 3D, two planar dies in 2.5D."""
    return 2 if integration is Integration.PLANAR_2P5D else 1


def check_feasibility(
    design: CopaDesign,
    tech: TechParams | None = None,
    gpm_die: DieSpec | None = None,
    msm_die: DieSpec | None = None,
    area_budget: float | None = None,
    edge_fraction: float = UHB_EDGE_FRACTION,
) -> FeasibilityReport:
    """Check a design against packaging budgets; violations are data."""
    gpm_die = gpm_die or DieSpec(826.0)
    if tech is None:
        tech = TechParams.for_integration(design.integration)
    msm_die = msm_die or DieSpec(gpm_die.area_mm2, gpm_die.l3_density_mb_per_mm2)

    violations: list[str] = []
    uhb_area = 0.0
    uhb_edge = 0.0
    power = 0.0
    l3_area = 0.0

    if design.msm_present:
        link_bw_tbs = 0.0
        if design.uhb is not None:
            total = design.uhb.read_bandwidth + design.uhb.write_bandwidth
            link_bw_tbs = 0.0 if total == math.inf else total / 1e12
        if design.uhb is None or link_bw_tbs == 0.0:
            if design.uhb is None or (design.uhb.read_bandwidth + design.uhb.write_bandwidth) == 0:
                violations.append("MSM present but link bandwidth is zero")

        if tech.tech is Integration.STACKED_3D:
            uhb_area = uhb_area_3d(link_bw_tbs, tech)
        else:
            uhb_edge = uhb_edge_2p5d(link_bw_tbs, tech)
            uhb_area = uhb_edge * PHY_DEPTH_MM
            edge_budget = edge_fraction * gpm_die.edge_length_mm
            if uhb_edge > edge_budget * (1 + _REL_EPS):
                violations.append(
                    f"UHB link needs {uhb_edge:.1f}mm of GPM edge but only "
                    f"{edge_budget:.1f}mm is assignable"
                )

        budget = AREA_BUDGET[tech.tech] if area_budget is None else area_budget
        fraction = uhb_area / gpm_die.area_mm2
        if fraction > budget * (1 + _REL_EPS):
            violations.append(
                f"UHB interface area is {fraction:.1%} of the GPM, over the "
                f"{budget:.0%} budget"
            )

        if design.l3 is not None and design.l3.capacity_bytes not in (0, math.inf):
            cap_mb = design.l3.capacity_bytes / (1 << 20)
            l3_area = cap_mb / msm_die.l3_density_mb_per_mm2
            msm_total = msm_die.area_mm2 * msm_die_count(design.integration)
            if l3_area > msm_total * (1 + _REL_EPS):
                violations.append(
                    f"L3 exceeds MSM area budget: needs {l3_area:.0f}mm2, "
                    f"have {msm_total:.0f}mm2"
                )

        if design.uhb is not None and link_bw_tbs > 0:
            power = link_power(link_bw_tbs, tech, design.uhb.toggle_rate)

    limit = {Integration.STACKED_3D: 6, Integration.PLANAR_2P5D: 14}.get(design.integration)
    if limit is not None and design.dram.hbm_sites > limit:
        violations.append(
            f"{design.integration.value} supports at most {limit} HBM sites "
            f"(got {design.dram.hbm_sites})"
        )

    return FeasibilityReport(
        uhb_area_mm2=uhb_area,
        uhb_area_fraction=uhb_area / gpm_die.area_mm2,
        uhb_edge_mm=uhb_edge,
        link_power_w=power,
        l3_area_required_mm2=l3_area,
        violations=violations,
    )
