"""Functional simulation of the L2 -> (switch) -> UHB link -> L3 -> DRAM
path, producing per-level and per-boundary traffic counts.

``simulate`` is the production path (numba engines); ``oracle_simulate``
is an independent brute-force fully-associative LRU reference kept in
plain Python for testing.  Both apply the same policy: LRU, write-allocate
+ write-back at both levels, L2 dirty victims installed into the L3
(fetching on an L3 miss), NINE between levels.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

from . import engines
from .arch import CacheLevelSpec, CopaDesign
from .errors import ContractError
from .workloads import Trace, expand_access

ORACLE_MAX_ACCESSES = 1_000_000


@dataclass
class LevelCounters:
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    writebacks: int = 0

    def __iadd__(self, other):
        self.accesses += other.accesses
        self.hits += other.hits
        self.misses += other.misses
        self.writebacks += other.writebacks
        return self


@dataclass
class BoundaryBytes:
    read_bytes: int = 0
    write_bytes: int = 0

    @property
    def total(self) -> int:
        return self.read_bytes + self.write_bytes

    def __iadd__(self, other):
        self.read_bytes += other.read_bytes
        self.write_bytes += other.write_bytes
        return self


@dataclass
class KernelTraffic:
    kernel_id: int
    l2: LevelCounters = field(default_factory=LevelCounters)
    l3: LevelCounters = field(default_factory=LevelCounters)
    l2_down: BoundaryBytes = field(default_factory=BoundaryBytes)
    link_to_l3: BoundaryBytes = field(default_factory=BoundaryBytes)
    l3_down: BoundaryBytes = field(default_factory=BoundaryBytes)
    dram: BoundaryBytes = field(default_factory=BoundaryBytes)

    def merge(self, other):
        self.l2 += other.l2
        self.l3 += other.l3
        self.l2_down += other.l2_down
        self.link_to_l3 += other.link_to_l3
        self.l3_down += other.l3_down
        self.dram += other.dram


@dataclass
class TrafficReport:
    msm_present: bool
    line_size: int
    kernels: list
    totals: KernelTraffic

    @property
    def dram_read_bytes(self) -> int:
        return self.totals.dram.read_bytes

    @property
    def dram_write_bytes(self) -> int:
        return self.totals.dram.write_bytes

    @property
    def dram_total_bytes(self) -> int:
        return self.totals.dram.total

    def to_json_dict(self) -> dict:
        def kt(k):
            return {
                "kernel_id": k.kernel_id,
                "l2": vars(k.l2).copy(),
                "l3": vars(k.l3).copy(),
                "l2_down": vars(k.l2_down).copy(),
                "link_to_l3": vars(k.link_to_l3).copy(),
                "l3_down": vars(k.l3_down).copy(),
                "dram": vars(k.dram).copy(),
            }

        return {
            "msm_present": self.msm_present,
            "line_size": self.line_size,
            "totals": kt(self.totals),
            "kernels": [kt(k) for k in self.kernels],
        }

    def to_csv(self) -> str:
        rows = ["kernel_id,l2_acc,l2_hit,l3_acc,l3_hit,dram_rd_bytes,dram_wr_bytes"]
        for k in self.kernels:
            rows.append(
                f"{k.kernel_id},{k.l2.accesses},{k.l2.hits},{k.l3.accesses},"
                f"{k.l3.hits},{k.dram.read_bytes},{k.dram.write_bytes}"
            )
        return "\n".join(rows) + "\n"


def traffic_reduction(report_a: TrafficReport, report_b: TrafficReport) -> float | None:
    """1 - DRAM bytes of b over a; None when the baseline moved no bytes."""
    base = report_a.dram_total_bytes
    if base == 0:
        return None
    return 1.0 - report_b.dram_total_bytes / base


@dataclass(frozen=True)
class SimOptions:
    #: 0 selects plain low-order-bit set indexing; a positive value XOR-folds
    #: the line address by that shift before indexing.
    xor_fold_shift: int = 0


def _fill_kernel_traffic(kt: KernelTraffic, out, has_l3: bool, ls: int):
    kt.l2.accesses += int(out[engines.L2_ACC])
    kt.l2.hits += int(out[engines.L2_HIT])
    kt.l2.misses += int(out[engines.L2_MISS])
    kt.l2.writebacks += int(out[engines.L2_WB])
    rd = int(out[engines.L2_MISS]) * ls
    wr = int(out[engines.L2_WB]) * ls
    kt.l2_down.read_bytes += rd
    kt.l2_down.write_bytes += wr
    if has_l3:
        kt.link_to_l3.read_bytes += rd
        kt.link_to_l3.write_bytes += wr
        kt.l3.accesses += int(out[engines.L3_ACC])
        kt.l3.hits += int(out[engines.L3_HIT])
        kt.l3.misses += int(out[engines.L3_MISS])
        kt.l3.writebacks += int(out[engines.L3_WB])
        kt.l3_down.read_bytes += int(out[engines.L3_MISS]) * ls
        kt.l3_down.write_bytes += int(out[engines.L3_WB]) * ls
        kt.dram.read_bytes += int(out[engines.L3_MISS]) * ls
        kt.dram.write_bytes += int(out[engines.L3_WB]) * ls
    else:
        kt.dram.read_bytes += rd
        kt.dram.write_bytes += wr


class _Level:
    """Engine state for one cache level."""

    def __init__(self, spec: CacheLevelSpec, max_line: int, options: SimOptions):
        cap = spec.capacity_bytes
        self.dummy = engines.dummy_level()
        if cap == math.inf:
            self.kind = engines.INFINITE
            flag, dirty = engines.make_inf_state(max_line)
            self.args = (self.dummy[0], 1, 1, 0, self.dummy[4], self.dummy[5],
                         flag, dirty, self.dummy[8])
        elif spec.is_fully_associative:
            self.kind = engines.FULL_ASSOC
            cap_lines = int(cap) // spec.line_size
            nxt, prv, flag, dirty, meta = engines.make_fa_state(max_line, cap_lines)
            self.args = (self.dummy[0], 1, 1, 0, nxt, prv, flag, dirty, meta)
        else:
            self.kind = engines.SET_ASSOC
            nsets = spec.num_sets
            state = engines.make_set_state(nsets, spec.associativity)
            self.args = (state, nsets, spec.associativity, options.xor_fold_shift,
                         self.dummy[4], self.dummy[5], self.dummy[6], self.dummy[7],
                         self.dummy[8])


def _effective_l3(design: CopaDesign) -> CacheLevelSpec | None:
    """The L3 the engine sees: a zero-capacity level is a pass-through."""
    if not design.msm_present or design.l3 is None:
        return None
    if design.l3.capacity_bytes == 0:
        return None
    return design.l3


def simulate(trace: Trace, design: CopaDesign, options: SimOptions | None = None,
              use_cache: bool = True) -> TrafficReport:
    """Run the access stream of ``trace`` through ``design``'s hierarchy."""
    options = options or SimOptions()
    if trace.line_size != design.line_size:
        raise ContractError(
            f"trace line size {trace.line_size} != design line size {design.line_size}"
        )
    key = None
    if use_cache:
        key = (trace.digest(), _geometry_key(design), options)
        cached = _cache_get(key)
        if cached is not None:
            return cached

    ls = trace.line_size
    max_line = trace.max_line()
    if max_line >= engines.MAX_LINE_INDEX:
        raise ContractError(
            f"trace touches {max_line} lines; the engine supports up to "
            f"{engines.MAX_LINE_INDEX} (use a larger line size)"
        )
    l2 = _Level(design.l2, max_line, options)
    l3_spec = _effective_l3(design)
    has_l3 = l3_spec is not None
    l3 = _Level(l3_spec, max_line, options) if has_l3 else None
    l3_kind = l3.kind if has_l3 else engines.SET_ASSOC
    l3_args = l3.args if has_l3 else engines.dummy_level()

    ticks = np.array([1, 1], dtype=np.int64)
    out = np.zeros(8, dtype=np.int64)
    kernels = []
    msm = design.msm_present
    for kernel in trace.kernels:
        kt = KernelTraffic(kernel.kernel_id)
        for access in kernel.accesses:
            lines = expand_access(access, ls)
            wrs = np.full(lines.shape[0], 1 if access.is_write else 0, dtype=np.uint8)
            out[:] = 0
            engines.run_chain(lines, wrs, l2.kind, *l2.args,
                              has_l3, l3_kind, *l3_args, ticks, out)
            _fill_kernel_traffic(kt, out, has_l3, ls)
        if msm and not has_l3:
            # Pass-through MSM (no or zero-byte L3): traffic crosses the link
            # unchanged and the DRAM boundary mirrors the L2 one.
            kt.link_to_l3 = replace(kt.l2_down)
            kt.l3_down = replace(kt.l2_down)
        kernels.append(kt)

    totals = KernelTraffic(-1)
    for kt in kernels:
        totals.merge(kt)
    report = TrafficReport(msm, ls, kernels, totals)
    if key is not None:
        _cache_put(key, report)
    return report


def simulate_llc_ladder(trace: Trace, capacities_bytes: list,
                        line_size: int | None = None) -> list[TrafficReport]:
    """Fully-associative LRU reports for several LLC capacities in one pass.

    ``inf`` entries model an unbounded cache.  Returned reports are
    field-for-field what ``simulate`` would produce for a single-level
    fully-associative design of each capacity.
    """
    ls = line_size or trace.line_size
    if ls != trace.line_size:
        raise ContractError("line size mismatch")
    max_line = trace.max_line()
    requested = []
    for c in capacities_bytes:
        lines_c = max_line + 1 if c == math.inf else int(c) // ls
        if lines_c < 1:
            raise ContractError(f"ladder capacity {c} holds no cache line")
        requested.append(lines_c)
    unique = sorted(set(requested))
    slot = {c: k for k, c in enumerate(unique)}
    cap_lines = unique
    caps, nxt, prv, band, dmask, markers, meta = engines.make_ladder_state(
        max_line, cap_lines)
    nk = len(cap_lines)
    out = np.zeros(1 + 2 * nk, dtype=np.int64)
    reports = [TrafficReport(False, ls, [], KernelTraffic(-1)) for _ in range(nk)]
    for kernel in trace.kernels:
        kts = [KernelTraffic(kernel.kernel_id) for _ in range(nk)]
        for access in kernel.accesses:
            lines = expand_access(access, ls)
            wrs = np.full(lines.shape[0], 1 if access.is_write else 0, dtype=np.uint8)
            out[:] = 0
            engines.fa_ladder(lines, wrs, caps, nxt, prv, band, dmask, markers,
                              meta, out)
            acc = int(out[0])
            for k in range(nk):
                kt = kts[k]
                miss = int(out[1 + k])
                wb = int(out[1 + nk + k])
                kt.l2.accesses += acc
                kt.l2.misses += miss
                kt.l2.hits += acc - miss
                kt.l2.writebacks += wb
                kt.l2_down.read_bytes += miss * ls
                kt.l2_down.write_bytes += wb * ls
                kt.dram.read_bytes += miss * ls
                kt.dram.write_bytes += wb * ls
        for k in range(nk):
            reports[k].kernels.append(kts[k])
            reports[k].totals.merge(kts[k])
    # Map the deduplicated, sorted simulations back to the request order.
    return [reports[slot[c]] for c in requested]


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

class _OracleLru:
    """Explicit recency-list LRU level (OrderedDict: LRU first)."""

    def __init__(self, cap_lines):
        self.cap = cap_lines  # may be math.inf
        self.lines = OrderedDict()  # line -> dirty

    def access(self, line, wrt):
        """Returns (hit, evicted_line, evicted_dirty)."""
        if line in self.lines:
            self.lines[line] |= wrt
            self.lines.move_to_end(line)
            return True, None, False
        ev_line, ev_dirty = None, False
        if self.cap != math.inf and len(self.lines) >= self.cap:
            ev_line, ev_dirty = self.lines.popitem(last=False)
        self.lines[line] = wrt
        return False, ev_line, ev_dirty


def oracle_simulate(trace: Trace, capacities: list, return_state: bool = False):
    """Brute-force fully-associative LRU reference simulation.

    ``capacities`` is ``[l2_bytes]`` or ``[l2_bytes, l3_bytes]``; entries
    may be ``inf``.  Limited to one million expanded accesses.
    """
    if not 1 <= len(capacities) <= 2:
        raise ContractError("capacities must name one or two levels")
    ls = trace.line_size
    total = 0
    for k in trace.kernels:
        for a in k.accesses:
            first, last = a.line_range(ls)
            total += (last - first) * a.repetitions
    if total > ORACLE_MAX_ACCESSES:
        raise ContractError(
            f"trace too large for the oracle ({total} accesses > {ORACLE_MAX_ACCESSES})"
        )

    def cap_lines(c):
        return math.inf if c == math.inf else int(c) // ls

    l2 = _OracleLru(cap_lines(capacities[0]))
    has_l3 = len(capacities) == 2 and capacities[1] != 0
    l3 = _OracleLru(cap_lines(capacities[1])) if has_l3 else None
    msm = len(capacities) == 2

    def l3_input(kt, line, wrt):
        kt.l3.accesses += 1
        hit, ev, evd = l3.access(line, wrt)
        if hit:
            kt.l3.hits += 1
        else:
            kt.l3.misses += 1
            kt.l3_down.read_bytes += ls
            kt.dram.read_bytes += ls
            if evd:
                kt.l3.writebacks += 1
                kt.l3_down.write_bytes += ls
                kt.dram.write_bytes += ls

    kernels = []
    for kernel in trace.kernels:
        kt = KernelTraffic(kernel.kernel_id)
        for access in kernel.accesses:
            wrt = access.is_write
            for line in expand_access(access, ls):
                line = int(line)
                kt.l2.accesses += 1
                hit, ev, evd = l2.access(line, wrt)
                if hit:
                    kt.l2.hits += 1
                    continue
                kt.l2.misses += 1
                kt.l2_down.read_bytes += ls
                if evd:
                    kt.l2.writebacks += 1
                    kt.l2_down.write_bytes += ls
                    if has_l3:
                        l3_input(kt, ev, True)
                    else:
                        kt.dram.write_bytes += ls
                if has_l3:
                    l3_input(kt, line, False)
                else:
                    kt.dram.read_bytes += ls
        if msm:
            kt.link_to_l3 = replace(kt.l2_down)
            if not has_l3:
                kt.l3_down = replace(kt.l2_down)
        kernels.append(kt)

    totals = KernelTraffic(-1)
    for kt in kernels:
        totals.merge(kt)
    report = TrafficReport(msm, ls, kernels, totals)
    if return_state:
        return report, (l2, l3)
    return report


# ---------------------------------------------------------------------------
# Traffic memoization (geometry-keyed: bandwidths do not affect traffic)
# ---------------------------------------------------------------------------

_TRAFFIC_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def _geometry_key(design: CopaDesign):
    l2 = design.l2
    l3 = _effective_l3(design)
    l3_key = None if l3 is None else (l3.capacity_bytes, l3.line_size, l3.associativity)
    return (l2.capacity_bytes, l2.line_size, l2.associativity,
            design.msm_present, l3_key)


def _cache_get(key):
    with _CACHE_LOCK:
        return _TRAFFIC_CACHE.get(key)


def _cache_put(key, report):
    with _CACHE_LOCK:
        if len(_TRAFFIC_CACHE) > 512:
            _TRAFFIC_CACHE.clear()
        _TRAFFIC_CACHE[key] = report


def clear_traffic_cache():
    with _CACHE_LOCK:
        _TRAFFIC_CACHE.clear()
