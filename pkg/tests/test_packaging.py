import dataclasses

import pytest

from copasim.arch import preset
from copasim.errors import ContractError
from copasim.packaging import (DieSpec, TechParams, check_feasibility,
                               hbm_resources, l3_budget, link_power,
                               uhb_area_3d, uhb_edge_2p5d)
from copasim.units import MB

TECH_3D = TechParams.stacked_3d()
TECH_25D = TechParams.planar_2p5d()


def test_tech_param_defaults():
    assert (TECH_25D.bw_density, TECH_25D.energy_per_bit_pj,
            TECH_25D.signaling_rate_gbps) == (256.0, 0.3, 20.0)
    assert (TECH_3D.bw_density, TECH_3D.energy_per_bit_pj) == (512.0, 0.05)


def test_uhb_area_3d():
    area = uhb_area_3d(14.7, TECH_3D)
    assert area == pytest.approx(28.71, abs=0.1)
    assert area / 826.0 < 0.04
    assert uhb_area_3d(0, TECH_3D) == 0.0
    # linearity, hand-computed 7350/512
    assert uhb_area_3d(7.35, TECH_3D) == pytest.approx(14.355, abs=0.01)
    with pytest.raises(ContractError):
        uhb_area_3d(14.7, TECH_25D)


def test_uhb_edge_2p5d():
    edge = uhb_edge_2p5d(14.7, TECH_25D)
    assert edge == pytest.approx(57.42, abs=0.01)
    # fits within two full edges of a square 826mm2 die
    assert edge <= 2 * (826.0 ** 0.5) + 1e-9
    assert uhb_edge_2p5d(0, TECH_25D) == 0.0
    assert uhb_edge_2p5d(2.56, TECH_25D) == pytest.approx(10.0)
    with pytest.raises(ContractError):
        uhb_edge_2p5d(1.0, TECH_3D)


def test_link_power():
    assert link_power(14.7, TECH_25D, 0.25) == pytest.approx(8.82)
    assert link_power(14.7, TECH_25D, 0.25) < 9.0
    assert link_power(14.7, TECH_3D, 0.25) == pytest.approx(1.47)
    assert link_power(14.7, TECH_3D, 0.25) < 2.0
    assert link_power(0, TECH_25D, 0.25) == 0.0
    with pytest.raises(ContractError):
        link_power(1.0, TECH_25D, 0.0)


def test_hbm_resources():
    per_site = preset("GPU-N").dram
    assert hbm_resources(6, per_site) == (pytest.approx(2687.0, rel=1e-9),
                                          pytest.approx(100.0, rel=1e-9))
    bw10, gb10 = hbm_resources(10, per_site)
    assert bw10 == pytest.approx(4500.0, rel=0.01)
    assert gb10 == pytest.approx(167.0, rel=0.01)
    bw14, gb14 = hbm_resources(14, per_site)
    assert bw14 == pytest.approx(6300.0, rel=0.01)
    assert gb14 == pytest.approx(233.0, rel=0.01)
    assert hbm_resources(0, per_site) == (0.0, 0.0)


def test_l3_budget():
    die = DieSpec(826.0)
    assert l3_budget(826.0, die) == pytest.approx(960.0)
    assert l3_budget(1652.0, die) == pytest.approx(1920.0)
    assert l3_budget(0.0, die) == 0.0


def test_die_edge_model():
    assert DieSpec(826.0).edge_length_mm == pytest.approx(4 * 826.0 ** 0.5)


def test_feasibility_hbm_l3_3d():
    rep = check_feasibility(preset("HBM+L3"), TECH_3D, DieSpec(826.0),
                            DieSpec(826.0))
    assert rep.violations == []
    assert rep.uhb_area_fraction < 0.04
    assert rep.l3_area_required_mm2 == pytest.approx(826.0, rel=1e-6)
    assert rep.link_power_w > 0


def test_feasibility_all_presets_clean():
    for name in ("HBM+L3", "HBML+L3", "HBM+L3L", "HBML+L3L", "HBMLL+L3L",
                 "GPU-N", "PerfectL2"):
        rep = check_feasibility(preset(name))
        assert rep.violations == [], (name, rep.violations)


def test_feasibility_oversized_l3_on_single_die():
    d = preset("HBM+L3")
    big = dataclasses.replace(
        d, l3=dataclasses.replace(d.l3, capacity_bytes=1920 * MB))
    rep = check_feasibility(big, TECH_3D, DieSpec(826.0), DieSpec(826.0))
    assert any("L3 exceeds MSM area budget" in v for v in rep.violations)


def test_feasibility_zero_link_bandwidth():
    d = preset("HBM+L3")
    dead = dataclasses.replace(
        d, uhb=dataclasses.replace(d.uhb, read_bandwidth=0.0, write_bandwidth=0.0))
    rep = check_feasibility(dead)
    assert any("link bandwidth is zero" in v for v in rep.violations)


def test_feasibility_hbm_site_limits():
    d = preset("HBM+L3")
    crowded = dataclasses.replace(
        d, dram=dataclasses.replace(d.dram, hbm_sites=10))
    rep = check_feasibility(crowded)
    assert any("HBM sites" in v for v in rep.violations)


def test_linearity_properties():
    for bw in (0.5, 1.0, 3.3, 10.0):
        assert uhb_area_3d(bw, TECH_3D) == pytest.approx(bw * 1e3 / 512.0)
        assert uhb_edge_2p5d(bw, TECH_25D) == pytest.approx(bw * 1e3 / 256.0)
        assert uhb_area_3d(2 * bw, TECH_3D) == pytest.approx(
            2 * uhb_area_3d(bw, TECH_3D))
        assert link_power(bw, TECH_25D, 0.5) >= 0.0
