import numpy as np
import pytest

from copasim import workloads as wl
from copasim.errors import ContractError, PresetError, ValidationError
from copasim.units import MB
from conftest import make_trace

GB = 1 << 30

# (preset, mode, batch, target footprint bytes); +-10% acceptance windows.
FOOTPRINT_TARGETS = [
    ("resnet", "training", 12, 989 * MB),
    ("resnet", "training", 128, 6 * GB),
    ("ssd", "training", 4, 559 * MB),
    ("ssd", "training", 128, int(7.9 * GB)),
    ("maskrcnn", "training", 1, int(2.1 * GB)),
    ("maskrcnn", "training", 6, int(9.9 * GB)),
    ("gnmt", "training", 32, 3 * GB),
    ("gnmt", "training", 256, int(8.3 * GB)),
    ("transformer", "training", 640, int(4.5 * GB)),
    ("transformer", "training", 5120, int(7.9 * GB)),
    ("ncf", "training", 65526, 657 * MB),
    ("ncf", "training", 1048576, int(4.5 * GB)),
    ("resnet", "inference", 1, 49 * MB),
    ("resnet", "inference", 232, int(1.1 * GB)),
    ("mobilenet", "inference", 1, 16 * MB),
    ("mobilenet", "inference", 704, 2 * GB),
    ("ssd", "inference", 1, 24 * MB),
    ("ssd", "inference", 288, 2 * GB),
    ("gnmt", "inference", 1, 300 * MB),
    ("gnmt", "inference", 128, 961 * MB),
]


@pytest.mark.parametrize("name,mode,batch,target", FOOTPRINT_TARGETS)
def test_footprint_calibration(name, mode, batch, target):
    trace = wl.gen_dl_trace(wl.dl_preset(name, mode), batch, seed=7)
    assert 0.9 * target <= trace.footprint <= 1.1 * target


def test_gnmt_small_batch_inference_window():
    trace = wl.gen_dl_trace(wl.dl_preset("gnmt", "inference"), 1, seed=7)
    assert 270 * MB <= trace.footprint <= 330 * MB


def test_resnet_large_batch_training_window():
    trace = wl.gen_dl_trace(wl.dl_preset("resnet", "training"), 128, seed=7)
    assert 5.4 * GB <= trace.footprint <= 6.6 * GB


def test_generation_is_deterministic():
    model = wl.dl_preset("gnmt", "training")
    a = wl.trace_to_jsonl(wl.gen_dl_trace(model, 32, seed=3))
    b = wl.trace_to_jsonl(wl.gen_dl_trace(model, 32, seed=3))
    assert a == b
    c = wl.trace_to_jsonl(wl.gen_dl_trace(model, 32, seed=4))
    assert a != c


def test_footprint_monotone_in_batch():
    for name in ("resnet", "transformer", "ncf"):
        model = wl.dl_preset(name, "training")
        fps = [wl.gen_dl_trace(model, b, 1).footprint for b in (1, 4, 16, 64)]
        assert fps == sorted(fps)
        assert fps[-1] > fps[0]


def test_inference_smaller_than_training():
    for name in ("resnet", "ssd", "gnmt", "mobilenet"):
        for batch in (1, 32, 256):
            ft = wl.gen_dl_trace(wl.dl_preset(name, "training"), batch, 1).footprint
            fi = wl.gen_dl_trace(wl.dl_preset(name, "inference"), batch, 1).footprint
            assert fi < ft, (name, batch)


def test_training_emits_backward_and_optimizer_kernels():
    model = wl.dl_preset("resnet", "training")
    n = len(model.layers)
    gemm = sum(1 for l in model.layers if l.weight_bytes > 0)
    trace = wl.gen_dl_trace(model, 4, 0)
    # forward + loss + backward + per-gemm weight-grad + optimizer
    assert len(trace.kernels) == n + 1 + n + gemm + 1
    infer = wl.gen_dl_trace(wl.dl_preset("resnet", "inference"), 4, 0)
    assert len(infer.kernels) == n


def test_batch_contract():
    with pytest.raises(ContractError):
        wl.gen_dl_trace(wl.dl_preset("resnet", "training"), 0, 1)


def test_unknown_preset():
    with pytest.raises(PresetError):
        wl.dl_preset("alexnet")


def test_footprint_union_semantics():
    # the same megabyte touched twice counts once
    t = make_trace([[(0, 0, MB)], [(0, 0, MB)]])
    assert wl.footprint(t) == MB
    # two disjoint megabyte tensors
    t2 = make_trace([[(0, 0, MB), (1, 2 * MB, MB)]])
    assert wl.footprint(t2) == 2 * MB


def test_disjoint_tensor_invariant():
    with pytest.raises(ValidationError, match="overlap"):
        make_trace([[(0, 0, MB), (1, MB // 2, MB)]])


def test_expand_sequential():
    t = make_trace([[(0, 0, 4 * 256)]])
    stream = list(wl.expand(t.kernels[0], 256))
    assert stream == [(0, "read"), (1, "read"), (2, "read"), (3, "read")]


def test_expand_repetitions():
    a = wl.TensorAccess(0, 0, 4 * 256, repetitions=2)
    once = wl.expand_access(wl.TensorAccess(0, 0, 4 * 256), 256)
    twice = wl.expand_access(a, 256)
    assert twice.shape[0] == 2 * once.shape[0]
    assert list(twice) == list(once) * 2


def test_expand_pseudo_random_deterministic():
    a = wl.TensorAccess(0, 0, 64 * 256, order="pseudo_random", seed=99)
    x = wl.expand_access(a, 256)
    y = wl.expand_access(a, 256)
    assert np.array_equal(x, y)
    assert sorted(x) == list(range(64))
    assert not np.array_equal(x, np.arange(64))


def test_expand_strided_covers_range():
    a = wl.TensorAccess(0, 0, 10 * 256, order="strided", stride=3)
    x = wl.expand_access(a, 256)
    assert sorted(x) == list(range(10))
    assert list(x[:4]) == [0, 3, 6, 9]


def test_expand_requires_power_of_two_line():
    t = make_trace([[(0, 0, MB)]])
    with pytest.raises(ContractError):
        list(wl.expand(t.kernels[0], 100))


def test_hpc_footprint_and_contract():
    t = wl.gen_hpc_trace(40 * MB, 0.9, 10.0, 8, 0)
    assert abs(t.footprint - 40 * MB) <= 2 * MB
    assert len(t.kernels) == 8
    with pytest.raises(ContractError):
        wl.gen_hpc_trace(40 * MB, 0.9, 10.0, 0, 0)
    with pytest.raises(ContractError):
        wl.gen_hpc_trace(0, 0.9, 10.0, 4, 0)


def test_hpc_presets_build():
    for name in wl.HPC_PRESET_NAMES:
        t = wl.hpc_preset_trace(name, 0)
        spec = wl.HPC_PRESETS[name]
        assert abs(t.footprint - spec.working_set) <= spec.working_set * 0.02


def test_jsonl_round_trip(tmp_path):
    trace = wl.gen_dl_trace(wl.dl_preset("ncf", "training"), 64, 5)
    path = tmp_path / "t.jsonl"
    wl.save_trace(trace, path)
    loaded = wl.load_trace(path)
    assert loaded == trace
    assert wl.trace_to_jsonl(loaded) == wl.trace_to_jsonl(trace)


def test_linear_dependency_enforced():
    k0 = wl.KernelDescriptor(0, {"fp16": 1}, 1, (wl.TensorAccess(0, 0, 256),), -1)
    k2 = wl.KernelDescriptor(2, {"fp16": 1}, 1, (wl.TensorAccess(1, 4096, 256),), 1)
    with pytest.raises(ValidationError, match="linear"):
        wl.Trace("bad", 1, (k0, k2), 256)
