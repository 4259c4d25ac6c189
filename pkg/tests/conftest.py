import numpy as np
import pytest

from copasim import workloads as wl


def make_trace(accesses_per_kernel, line_size=256, name="t", batch=1,
               flops=None, parallelism=64):
    """Build a trace from [[(tensor_id, base, extent, direction, order,
    stride, seed, reps), ...], ...] tuples (short forms allowed)."""
    kernels = []
    for i, group in enumerate(accesses_per_kernel):
        accs = []
        for spec in group:
            spec = tuple(spec) + ("read", "sequential", 0, 0, 1)[len(spec) - 3:]
            accs.append(wl.TensorAccess(*spec))
        kernels.append(wl.KernelDescriptor(
            i, dict(flops or {"fp16": 1000}), parallelism, tuple(accs), i - 1))
    return wl.Trace(name, batch, tuple(kernels), line_size)


def random_trace(rng, max_kernels=4, max_accesses=3, max_extent=1 << 18,
                 line_size=256, orders=("sequential", "pseudo_random", "strided")):
    """A small randomized trace with disjoint tensors."""
    n_kernels = int(rng.integers(1, max_kernels + 1))
    tensor_slots = []
    base = 0
    for t in range(n_kernels * max_accesses):
        extent = int(rng.integers(line_size, max_extent))
        tensor_slots.append((t, base, extent))
        base += ((extent + 4095) // 4096) * 4096
    kernels = []
    slot = 0
    for i in range(n_kernels):
        accs = []
        for _ in range(int(rng.integers(1, max_accesses + 1))):
            t, b, e = tensor_slots[slot % len(tensor_slots)]
            slot += 1
            accs.append(wl.TensorAccess(
                t, b, e,
                direction=str(rng.choice(["read", "write", "read_write"])),
                order=str(rng.choice(list(orders))),
                stride=int(rng.integers(1, 9)),
                seed=int(rng.integers(0, 2**31)),
                repetitions=int(rng.integers(1, 3)),
            ))
        kernels.append(wl.KernelDescriptor(i, {"fp16": 1000}, 64, tuple(accs), i - 1))
    return wl.Trace("rand", 1, tuple(kernels), line_size)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240731)
