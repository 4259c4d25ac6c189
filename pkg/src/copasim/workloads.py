"""Deterministic synthetic trace generation for DL and HPC workloads.

Traces are stored as kernel descriptors whose tensor accesses expand
lazily into line-granular address streams; raw address logs at multi-GB
footprints would be impractically large.

The DL presets are calibrated to published per-workload memory footprints
at a small-batch and a large-batch operating point.  A model is a chain of
alternating GEMM-like and elementwise-like layers; weights and activations
are sized by a two-point linear fit (weights are batch-independent,
activations scale with batch), which makes the generated footprints land
on the calibration targets by construction.  Per-layer FLOP counts and
parallelism widths are plausible round numbers chosen so that the suite
reproduces the expected bandwidth/capacity sensitivity trends; they are
not claims about the real networks.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, PresetError, ValidationError
from .units import MB, is_power_of_two

DEFAULT_TRACE_LINE_SIZE = 256

#: FLOPs per DRAM byte at which math and DRAM time balance on the
#: reference core (fp16 and fp32 respectively).  Used only to pick
#: per-layer FLOP counts.
FP16_BALANCE = 290.0
FP32_BALANCE = 9.0

GEMM_INTENSITY = 1.5
ELEM_INTENSITY = 0.2
#: Inference chains run fused elementwise stages, so their non-GEMM
#: kernels carry more arithmetic per byte than training's.
ELEM_INTENSITY_INFER = 0.45
OPT_INTENSITY = 0.15

#: Work units that saturate the reference core (134 SMs x 32).
_SM_SATURATION = 134 * 32

#: Inference-layer width: a single sample exposes ~30% of the machine.
INFER_WIDTH = 1300

_ALLOC_ALIGN = 4096

READ, WRITE, READ_WRITE = "read", "write", "read_write"
_DIRECTIONS = (READ, WRITE, READ_WRITE)


# ---------------------------------------------------------------------------
# Trace data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorAccess:
    tensor_id: int
    base_address: int
    extent: int
    direction: str = READ
    order: str = "sequential"  # sequential | strided | pseudo_random
    stride: int = 0            # lines, for strided order
    seed: int = 0              # for pseudo_random order
    repetitions: int = 1

    def __post_init__(self):
        if self.extent <= 0:
            raise ValidationError("access extent must be positive")
        if self.direction not in _DIRECTIONS:
            raise ValidationError(f"bad direction {self.direction!r}")
        if self.order not in ("sequential", "strided", "pseudo_random"):
            raise ValidationError(f"bad order {self.order!r}")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")

    @property
    def is_write(self) -> bool:
        return self.direction != READ

    def line_range(self, line_size: int) -> tuple[int, int]:
        first = self.base_address // line_size
        last = -(-(self.base_address + self.extent) // line_size)
        return first, last


@dataclass(frozen=True)
class KernelDescriptor:
    kernel_id: int
    flops: dict = field(default_factory=dict)  # precision -> FLOP count
    parallelism: int = 1
    accesses: tuple = ()
    dependency: int = -1

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValidationError("parallelism must be >= 1")
        if not self.accesses and not any(self.flops.values()):
            raise ValidationError("kernel needs accesses or nonzero flops")


@dataclass(frozen=True)
class Trace:
    name: str
    batch_size: int
    kernels: tuple
    line_size: int = DEFAULT_TRACE_LINE_SIZE

    def __post_init__(self):
        _check_disjoint_tensors(self.kernels)
        prev = -1
        for k in self.kernels:
            if k.dependency != prev:
                raise ValidationError("kernels must form a linear dependency chain")
            prev = k.kernel_id

    @property
    def footprint(self) -> int:
        return footprint(self)

    def max_line(self) -> int:
        """One past the largest line index touched."""
        top = 0
        for k in self.kernels:
            for a in k.accesses:
                top = max(top, a.line_range(self.line_size)[1])
        return top

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(trace_to_jsonl(self).encode())
        return h.hexdigest()[:16]


def _check_disjoint_tensors(kernels):
    ranges: dict[int, list[int]] = {}
    for k in kernels:
        for a in k.accesses:
            lo, hi = a.base_address, a.base_address + a.extent
            r = ranges.setdefault(a.tensor_id, [lo, hi])
            r[0] = min(r[0], lo)
            r[1] = max(r[1], hi)
    spans = sorted(ranges.items(), key=lambda kv: kv[1][0])
    for (id_a, ra), (id_b, rb) in zip(spans, spans[1:]):
        if rb[0] < ra[1]:
            raise ValidationError(f"tensors {id_a} and {id_b} overlap in the address space")


def footprint(trace: Trace) -> int:
    """Bytes in the union of all line-aligned touched ranges."""
    ls = trace.line_size
    intervals = []
    for k in trace.kernels:
        for a in k.accesses:
            intervals.append(a.line_range(ls))
    intervals.sort()
    lines = 0
    cur_lo = cur_hi = None
    for lo, hi in intervals:
        if cur_hi is None:
            cur_lo, cur_hi = lo, hi
        elif lo <= cur_hi:
            cur_hi = max(cur_hi, hi)
        else:
            lines += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
    if cur_hi is not None:
        lines += cur_hi - cur_lo
    return lines * ls


# ---------------------------------------------------------------------------
# Expansion
# ---------------------------------------------------------------------------

def expand_access(access: TensorAccess, line_size: int) -> np.ndarray:
    """Line indices of one access in visit order (int64)."""
    first, last = access.line_range(line_size)
    n = last - first
    if access.order == "sequential":
        once = np.arange(first, last, dtype=np.int64)
    elif access.order == "strided":
        stride = max(1, min(access.stride, n))
        idx = np.arange(n, dtype=np.int64)
        once = first + np.concatenate([idx[o::stride] for o in range(stride)])
    else:  # pseudo_random
        rng = np.random.default_rng(access.seed)
        once = first + rng.permutation(n).astype(np.int64)
    if access.repetitions > 1:
        once = np.tile(once, access.repetitions)
    return once


def expand(kernel: KernelDescriptor, line_size: int):
    """Yield (line_address, direction) in order, as the hierarchy sees them."""
    if not is_power_of_two(line_size):
        raise ContractError("line_size must be a power of two")
    for access in kernel.accesses:
        for line in expand_access(access, line_size):
            yield int(line), access.direction


# ---------------------------------------------------------------------------
# DL model presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    weight_bytes: int
    activation_bytes_per_sample: int
    flops_per_sample: int
    precision: str = "fp16"
    reuse_class: str = "weights_reused_across_batch"
    width: int = 1  # work units per sample


@dataclass(frozen=True)
class DlModelSpec:
    name: str
    layers: tuple
    mode: str  # training | inference
    input_bytes_per_sample: int = 0
    work_unit: int = 1
    weight_order: str = "sequential"  # pseudo_random for embedding-style models

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("model needs at least one layer")
        if self.mode not in ("training", "inference"):
            raise ValidationError(f"bad mode {self.mode!r}")


@dataclass(frozen=True)
class _DlCalibration:
    """Footprint targets (MB) at (small batch, large batch) per mode."""
    layers: int
    train_batches: tuple | None
    train_footprints_mb: tuple | None
    infer_batches: tuple | None
    infer_footprints_mb: tuple | None
    train_width: int
    work_unit: int = 1
    embedding: bool = False


# Footprint calibration table: per-model (batch, footprint-MB) anchors at a
# small-batch and a large-batch operating point.
_DL_CALIBRATION = {
    "resnet": _DlCalibration(54, (12, 128), (989, 6144), (1, 232), (49, 1126.4), 37),
    "ssd": _DlCalibration(48, (4, 128), (559, 8089.6), (1, 288), (24, 2048), 37),
    "maskrcnn": _DlCalibration(64, (1, 6), (2150.4, 10137.6), None, None, 786),
    "gnmt": _DlCalibration(24, (32, 256), (3072, 8499.2), (1, 128), (300, 961), 18),
    "transformer": _DlCalibration(24, (640, 5120), (4608, 8089.6), None, None, 1),
    "ncf": _DlCalibration(8, (65526, 1048576), (657, 4608), None, None, 1,
                          work_unit=256, embedding=True),
    "mobilenet": _DlCalibration(28, None, None, (1, 704), (16, 2048), 7),
}

DL_PRESET_NAMES = tuple(_DL_CALIBRATION)


def _two_point_fit(batches, footprints_mb):
    """Weights (batch-independent) and per-sample activation bytes."""
    (b0, b1), (f0, f1) = batches, footprints_mb
    act_mb = (f1 - f0) / (b1 - b0)
    weight_mb = f0 - b0 * act_mb
    if weight_mb <= 0 or act_mb <= 0:
        raise ValidationError("footprint calibration is not realizable")
    return weight_mb, act_mb


def _model_params(cal: _DlCalibration, mode: str):
    """Total (weight bytes, activation bytes/sample) of the layer chain.

    Training allocates weights + gradients and activations + activation
    gradients, so the chain totals are half of the fitted footprint
    coefficients; inference allocates each once.
    """
    if mode == "training":
        if cal.train_batches is not None:
            w_mb, a_mb = _two_point_fit(cal.train_batches, cal.train_footprints_mb)
            return int(round(w_mb * MB / 2)), int(round(a_mb * MB / 2))
        w_mb, a_mb = _two_point_fit(cal.infer_batches, cal.infer_footprints_mb)
        return int(round(w_mb * MB)), int(round(a_mb * MB))
    if cal.infer_batches is not None:
        w_mb, a_mb = _two_point_fit(cal.infer_batches, cal.infer_footprints_mb)
        return int(round(w_mb * MB)), int(round(a_mb * MB))
    w_mb, a_mb = _two_point_fit(cal.train_batches, cal.train_footprints_mb)
    return int(round(w_mb * MB / 2)), int(round(a_mb * MB / 2))


def _split(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def dl_preset(name: str, mode: str = "training") -> DlModelSpec:
    """Build the layer chain for a named model in the given mode."""
    if name not in _DL_CALIBRATION:
        raise PresetError(name, DL_PRESET_NAMES)
    if mode not in ("training", "inference"):
        raise ValidationError(f"bad mode {mode!r}")
    cal = _DL_CALIBRATION[name]
    w_total, a_total = _model_params(cal, mode)
    n = cal.layers
    acts = _split(a_total, n + 1)  # a[0] is the input
    gemm_layers = [i for i in range(n) if i % 2 == 0]
    weights = _split(w_total, len(gemm_layers))

    if mode == "training":
        width = cal.train_width
    else:
        width = INFER_WIDTH

    layers = []
    wi = 0
    for i in range(n):
        gemm = i % 2 == 0
        a_in, a_out = acts[i], acts[i + 1]
        w = weights[wi] if gemm else 0
        if gemm:
            wi += 1
        # Intensity anchored to the kernel's own traffic at the calibration
        # batch (a write costs a fetch plus an eventual writeback).
        ref_batch = _reference_batch(cal, mode)
        elem_intensity = ELEM_INTENSITY if mode == "training" else ELEM_INTENSITY_INFER
        intensity = GEMM_INTENSITY if gemm else elem_intensity
        flops = int(round(intensity * FP16_BALANCE * (a_in + 2 * a_out + w / ref_batch)))
        layers.append(
            LayerSpec(
                weight_bytes=w,
                activation_bytes_per_sample=a_out,
                flops_per_sample=flops,
                precision="fp16",
                reuse_class="weights_reused_across_batch" if gemm else "activations_streamed",
                width=width,
            )
        )
    return DlModelSpec(
        name=name,
        layers=tuple(layers),
        mode=mode,
        input_bytes_per_sample=acts[0],
        work_unit=cal.work_unit,
        weight_order="pseudo_random" if cal.embedding else "sequential",
    )


def _reference_batch(cal: _DlCalibration, mode: str) -> int:
    if mode == "training" and cal.train_batches is not None:
        return cal.train_batches[1]
    if cal.infer_batches is not None:
        return cal.infer_batches[1]
    return cal.train_batches[1]


def reference_batches(name: str, mode: str = "training") -> tuple[int, int]:
    """(small, large) calibration batches for a preset/mode."""
    cal = _DL_CALIBRATION.get(name)
    if cal is None:
        raise PresetError(name, DL_PRESET_NAMES)
    pair = cal.train_batches if mode == "training" else cal.infer_batches
    if pair is None:
        pair = cal.infer_batches if mode == "training" else cal.train_batches
    return pair


# ---------------------------------------------------------------------------
# DL trace generation
# ---------------------------------------------------------------------------

class _Allocator:
    def __init__(self):
        self.cursor = 0
        self.next_id = 0

    def alloc(self, nbytes: int):
        tid = self.next_id
        self.next_id += 1
        base = self.cursor
        self.cursor += -(-nbytes // _ALLOC_ALIGN) * _ALLOC_ALIGN
        return tid, base, nbytes


def _acc(tensor, direction, order="sequential", seed=0, repetitions=1):
    tid, base, extent = tensor
    return TensorAccess(tid, base, extent, direction, order, 0, seed, repetitions)


def gen_dl_trace(model: DlModelSpec, batch: int, seed: int) -> Trace:
    """One end-to-end iteration of a DL model at the given batch size.

    Training emits forward kernels in layer order, then a loss kernel,
    then backward and weight-gradient kernels in reverse order, then an
    optimizer step.  Weights are re-read across kernels; activations
    written by layer i are read by layer i+1 and again by layer i's
    weight-gradient kernel.
    """
    if batch < 1:
        raise ContractError("batch must be >= 1")
    alloc = _Allocator()
    n = len(model.layers)
    training = model.mode == "training"

    weights = {}
    for i, layer in enumerate(model.layers):
        if layer.weight_bytes > 0:
            weights[i] = alloc.alloc(layer.weight_bytes)
    acts = [alloc.alloc(max(1, model.input_bytes_per_sample * batch))]
    for layer in model.layers:
        acts.append(alloc.alloc(max(1, layer.activation_bytes_per_sample * batch)))
    if training:
        grad_acts = [alloc.alloc(t[2]) for t in acts]
        grad_w = {i: alloc.alloc(t[2]) for i, t in weights.items()}

    kernels = []

    def emit(flops, parallelism, accesses):
        kid = len(kernels)
        kernels.append(
            KernelDescriptor(kid, flops, parallelism, tuple(accesses), kid - 1)
        )

    def par(layer):
        return max(1, -(-batch * layer.width // model.work_unit))

    w_seed = seed * 1000003 + 17
    for i, layer in enumerate(model.layers):
        accesses = []
        if i in weights:
            accesses.append(_acc(weights[i], READ, model.weight_order, w_seed + i))
        accesses += [_acc(acts[i], READ), _acc(acts[i + 1], WRITE)]
        emit({"fp16": layer.flops_per_sample * batch}, par(layer), accesses)

    if training:
        last = model.layers[-1]
        loss_flops = int(ELEM_INTENSITY * FP16_BALANCE * 3 * acts[n][2])
        emit({"fp16": max(1, loss_flops)}, par(last),
             [_acc(acts[n], READ), _acc(grad_acts[n], WRITE)])

        for i in range(n - 1, -1, -1):
            layer = model.layers[i]
            accesses = []
            if i in weights:
                accesses.append(_acc(weights[i], READ, model.weight_order, w_seed + i))
            else:
                accesses.append(_acc(acts[i + 1], READ))
            accesses += [_acc(grad_acts[i + 1], READ), _acc(grad_acts[i], WRITE)]
            emit({"fp16": layer.flops_per_sample * batch}, par(layer), accesses)
            if i in weights:
                emit({"fp16": layer.flops_per_sample * batch}, par(layer),
                     [_acc(acts[i], READ), _acc(grad_acts[i + 1], READ),
                      _acc(grad_w[i], WRITE)])

        w_total = sum(t[2] for t in weights.values())
        opt_flops = int(OPT_INTENSITY * FP32_BALANCE * 3 * w_total)
        opt_accesses = [_acc(grad_w[i], READ) for i in sorted(grad_w)]
        opt_accesses += [_acc(weights[i], READ_WRITE) for i in sorted(weights)]
        emit({"fp32": max(1, opt_flops)}, 1 << 20, opt_accesses)

    mode_tag = "train" if training else "infer"
    return Trace(
        name=f"{model.name}-{mode_tag}-b{batch}-s{seed}",
        batch_size=batch,
        kernels=tuple(kernels),
        line_size=DEFAULT_TRACE_LINE_SIZE,
    )


# ---------------------------------------------------------------------------
# HPC trace generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HpcPresetSpec:
    working_set: int
    reuse_fraction: float
    flop_byte_ratio: float
    kernels: int


# Streaming kernels over a hot (re-read) region plus a cold segment per
# kernel.  Working sets are sized so that a contemporary-GPU-class L2
# captures most of the reuse, leaving these workloads largely insensitive
# to DRAM bandwidth; one large pure-streaming entry keeps the suite honest.
HPC_PRESETS = {
    "jacobi27": HpcPresetSpec(48 * MB, 0.94, 14.0, 10),
    "cg-solve": HpcPresetSpec(40 * MB, 0.90, 10.0, 8),
    "md-cutoff": HpcPresetSpec(24 * MB, 0.97, 36.0, 10),
    "fft-batch": HpcPresetSpec(56 * MB, 0.85, 12.0, 8),
    "amr-advect": HpcPresetSpec(96 * MB, 0.75, 9.0, 8),
    "lbm-stream": HpcPresetSpec(1536 * MB, 0.0, 7.0, 6),
}

HPC_PRESET_NAMES = tuple(HPC_PRESETS)

_HPC_HOT_REPS = 2
_HPC_WIDTH = 8192


def gen_hpc_trace(working_set: int, reuse_fraction: float, flop_byte_ratio: float,
                  kernels: int, seed: int, name: str | None = None) -> Trace:
    """Streaming HPC-style kernels over a shared hot region.

    Each kernel re-reads the hot region (``reuse_fraction`` of the working
    set) twice and streams through its own slice of the remaining cold
    bytes; FLOPs are fp32 at the given arithmetic intensity.
    """
    if working_set <= 0:
        raise ContractError("working_set must be positive")
    if kernels < 1:
        raise ContractError("kernels must be >= 1")
    if not (0 <= reuse_fraction <= 1):
        raise ContractError("reuse_fraction must be in [0, 1]")

    alloc = _Allocator()
    hot_bytes = int(working_set * reuse_fraction)
    cold_bytes = working_set - hot_bytes
    hot = alloc.alloc(hot_bytes) if hot_bytes > 0 else None
    cold_chunks = []
    for sz in _split(cold_bytes, kernels):
        if sz > 0:
            cold_chunks.append(alloc.alloc(sz))
        else:
            cold_chunks.append(None)

    out = []
    for k in range(kernels):
        accesses = []
        touched = 0
        if hot is not None:
            accesses.append(_acc(hot, READ, repetitions=_HPC_HOT_REPS))
            touched += hot[2] * _HPC_HOT_REPS
        if cold_chunks[k] is not None:
            accesses.append(_acc(cold_chunks[k], READ))
            touched += cold_chunks[k][2]
        flops = max(1, int(round(flop_byte_ratio * touched)))
        out.append(
            KernelDescriptor(k, {"fp32": flops}, _HPC_WIDTH, tuple(accesses), k - 1)
        )
    return Trace(
        name=name or f"hpc-ws{working_set // MB}MB-s{seed}",
        batch_size=1,
        kernels=tuple(out),
        line_size=DEFAULT_TRACE_LINE_SIZE,
    )


def hpc_preset_trace(name: str, seed: int = 0) -> Trace:
    spec = HPC_PRESETS.get(name)
    if spec is None:
        raise PresetError(name, HPC_PRESET_NAMES)
    return gen_hpc_trace(spec.working_set, spec.reuse_fraction, spec.flop_byte_ratio,
                         spec.kernels, seed, name=f"{name}-s{seed}")


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------

_SCHEMA_VERSION = 1


def trace_to_jsonl(trace: Trace) -> str:
    lines = [json.dumps({
        "name": trace.name,
        "batch_size": trace.batch_size,
        "line_size": trace.line_size,
        "schema_version": _SCHEMA_VERSION,
    }, sort_keys=True)]
    for k in trace.kernels:
        lines.append(json.dumps({
            "kernel_id": k.kernel_id,
            "flops": k.flops,
            "parallelism": k.parallelism,
            "dependency": k.dependency,
            "accesses": [{
                "tensor_id": a.tensor_id,
                "base": a.base_address,
                "extent": a.extent,
                "direction": a.direction,
                "order": a.order,
                "stride": a.stride,
                "seed": a.seed,
                "repetitions": a.repetitions,
            } for a in k.accesses],
        }, sort_keys=True))
    return "\n".join(lines) + "\n"


def trace_from_jsonl(text: str) -> Trace:
    rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValidationError("empty trace file")
    header = rows[0]
    if header.get("schema_version") != _SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported trace schema_version {header.get('schema_version')!r}")
    kernels = []
    for row in rows[1:]:
        accesses = tuple(
            TensorAccess(a["tensor_id"], a["base"], a["extent"], a["direction"],
                         a["order"], a.get("stride", 0), a.get("seed", 0),
                         a.get("repetitions", 1))
            for a in row["accesses"]
        )
        kernels.append(KernelDescriptor(
            row["kernel_id"], dict(row["flops"]), row["parallelism"], accesses,
            row["dependency"],
        ))
    return Trace(header["name"], header["batch_size"], tuple(kernels),
                 header["line_size"])


def save_trace(trace: Trace, path) -> None:
    with open(path, "w") as f:
        f.write(trace_to_jsonl(trace))


def load_trace(path) -> Trace:
    with open(path) as f:
        return trace_from_jsonl(f.read())
