import dataclasses
import math

import pytest

from copasim import arch
from copasim.arch import (CacheLevelSpec, DramAttach, Integration, load_design,
                          preset, PRESET_NAMES, validate)
from copasim.errors import PresetError, ValidationError
from copasim.units import MB

# Golden configuration table the presets must match field-for-field.
GOLDEN = {
    # name: (sms, ghz, fp32, fp16, l2_mb, dram_gbs, dram_gb)
    "V100": (80, 1.4, 15.7, 125.0, 6, 900, 16),
    "A100": (108, 1.4, 19.5, 312.0, 40, 1555, 40),
    "GPU-N": (134, 1.4, 24.2, 779.0, 60, 2687, 100),
}

GOLDEN_COPA = {
    # name: (llc_mb, dram_tbs, dram_gb, integration, sites)
    "HBM+L3": (960, 2.687, 100, Integration.STACKED_3D, 6),
    "HBML+L3": (960, 4.478, 166.7, Integration.PLANAR_2P5D, 10),
    "HBM+L3L": (1920, 2.687, 100, Integration.PLANAR_2P5D, 6),
    "HBML+L3L": (1920, 4.478, 166.7, Integration.PLANAR_2P5D, 10),
    "HBMLL+L3L": (1920, 6.27, 233.3, Integration.PLANAR_2P5D, 14),
}


@pytest.mark.parametrize("name", GOLDEN)
def test_monolithic_presets_match_tables(name):
    sms, ghz, fp32, fp16, l2_mb, dram_gbs, dram_gb = GOLDEN[name]
    d = preset(name)
    assert d.core.sm_count == sms
    assert d.core.frequency_ghz == ghz
    assert d.core.peak_fp32_tflops == fp32
    assert d.core.peak_fp16_tflops == fp16
    assert d.l2.capacity_bytes == l2_mb * MB
    assert d.dram.total_bandwidth == pytest.approx(dram_gbs * 1e9, rel=1e-12)
    assert d.dram.total_capacity_gb == pytest.approx(dram_gb, rel=1e-12)
    assert not d.msm_present and d.l3 is None and d.uhb is None
    assert d.dram_attach is DramAttach.ON_GPM


@pytest.mark.parametrize("name", GOLDEN_COPA)
def test_copa_presets_match_tables(name):
    llc_mb, dram_tbs, dram_gb, integration, sites = GOLDEN_COPA[name]
    d = preset(name)
    assert d.l3.capacity_bytes == llc_mb * MB
    assert d.l2.capacity_bytes == 60 * MB
    assert d.dram.total_bandwidth == pytest.approx(dram_tbs * 1e12, rel=0.01)
    assert d.dram.total_capacity_gb == pytest.approx(dram_gb, rel=0.01)
    assert d.integration is integration
    assert d.dram.hbm_sites == sites
    assert d.msm_present and d.uhb is not None
    assert d.dram_attach is DramAttach.ON_MSM
    # 2xRD + 2xWR of the baseline DRAM bandwidth, 10.7TB/s total
    assert d.uhb.read_bandwidth == pytest.approx(2 * 2687e9)
    assert d.uhb.write_bandwidth == pytest.approx(2 * 2687e9)


def test_perfect_l2_flags_infinite():
    d = preset("PerfectL2")
    assert d.l2.capacity_bytes == math.inf
    assert d.dram.total_bandwidth == math.inf
    assert d.core == preset("GPU-N").core


def test_every_preset_validates_clean():
    for name in PRESET_NAMES:
        assert validate(preset(name)) == [], name
    assert len(PRESET_NAMES) == 9


def test_unknown_preset():
    with pytest.raises(PresetError) as e:
        preset("GPU-X")
    assert "no such preset" in str(e.value)
    assert "GPU-N" in str(e.value)


def test_l3_round_trip_latency_is_half_of_dram():
    d = preset("HBM+L3")
    assert d.downstream_round_trip_ns() == pytest.approx(
        d.dram.access_latency_ns / 2)
    assert preset("GPU-N").downstream_round_trip_ns() == 360.0


def test_serialize_load_round_trip():
    for name in PRESET_NAMES:
        d = preset(name)
        assert load_design(d.to_json()) == dataclasses.replace(d)


def test_load_rejects_l3_without_msm():
    doc = preset("HBM+L3").to_json_dict()
    doc["msm_present"] = False
    with pytest.raises(ValidationError, match="L3 requires MSM"):
        load_design(doc)


def test_load_rejects_3d_with_14_sites():
    doc = preset("HBM+L3").to_json_dict()
    doc["dram"]["hbm_sites"] = 14
    with pytest.raises(ValidationError, match="die edge"):
        load_design(doc)


def test_load_reports_field_path_on_schema_error():
    doc = preset("GPU-N").to_json_dict()
    del doc["core"]["sm_count"]
    with pytest.raises(ValidationError, match="core.sm_count"):
        load_design(doc)


def test_load_parses_suffixed_units():
    doc = preset("GPU-N").to_json_dict()
    doc["l2"]["capacity"] = "60MB"
    doc["dram"]["bandwidth_per_site"] = "447.833333333GB/s"
    d = load_design(doc)
    assert d.l2.capacity_bytes == 60 * MB
    assert d.dram.total_bandwidth == pytest.approx(2687e9, rel=1e-6)


def test_validate_collects_every_violation():
    d = preset("HBM+L3")
    bad = dataclasses.replace(
        d,
        integration=Integration.STACKED_3D,
        l3=dataclasses.replace(d.l3, capacity_bytes=1920 * MB),
        dram=dataclasses.replace(d.dram, hbm_sites=14),
    )
    v = validate(bad)
    assert len(v) == 2
    assert any("960MB" in msg for msg in v)
    assert any("HBM sites" in msg for msg in v)


def test_validate_monolithic_with_link():
    d = preset("GPU-N")
    bad = dataclasses.replace(d, uhb=preset("HBM+L3").uhb)
    v = validate(bad)
    assert v == ["UHB link requires MSM"]


def test_cache_spec_invariants():
    with pytest.raises(ValidationError, match="power of two"):
        CacheLevelSpec(60 * MB, line_size=100)
    with pytest.raises(ValidationError, match="multiple"):
        CacheLevelSpec(60 * MB + 256, line_size=256, associativity=8)
    # fully-associative only needs line multiples; zero is a wired-but-empty level
    CacheLevelSpec(256 * 3, line_size=256, associativity="full")
    CacheLevelSpec(0)


def test_dram_bw_multiplier_helper():
    d = preset("GPU-N")
    assert arch.with_dram_bw_multiplier(d, 2).dram.total_bandwidth == \
        pytest.approx(2 * 2687e9)
    assert arch.with_dram_bw_multiplier(d, math.inf).dram.total_bandwidth == math.inf
    with pytest.raises(ValidationError):
        arch.with_dram_bw_multiplier(d, 0)


def test_validate_single_violation_for_oversized_3d_l3():
    d = preset("HBM+L3")
    bad = dataclasses.replace(
        d, l3=dataclasses.replace(d.l3, capacity_bytes=1920 * MB))
    v = validate(bad)
    assert len(v) == 1 and "960MB" in v[0]
