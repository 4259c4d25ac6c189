"""Numba kernels for cache simulation.

Three engines:

* ``run_chain`` walks one access stream through an L2 (set-associative,
  fully-associative, or infinite) and an optional memory-side L3 with the
  same organization choices.  Policy: LRU replacement, write-allocate +
  write-back; L2 dirty victims are installed into the L3 (fetching the
  line on an L3 miss so that level accounting stays exact); NINE, so no
  inclusion is enforced between the levels.

* ``fa_ladder`` simulates a single fully-associative LRU level at many
  capacities in one pass using region markers on a shared recency stack.
  Hit/miss/writeback counts per capacity are exactly those of independent
  LRU simulations (inclusion property of LRU stacks).

Line addresses are dense line indices; fully-associative state is indexed
directly by line id.
"""
import numpy as np
from numba import njit

EMPTY_BAND = 255

#: Line-index ceiling imposed by the packed tag|dirty|age word.
MAX_LINE_INDEX = 1 << 26

SET_ASSOC, FULL_ASSOC, INFINITE = 0, 1, 2

# out[] slots for run_chain
L2_ACC, L2_HIT, L2_MISS, L2_WB, L3_ACC, L3_HIT, L3_MISS, L3_WB = range(8)


_AGE_BITS = 35
_AGE_MASK = np.int64((1 << _AGE_BITS) - 1)
_SA_DIRTY = np.int64(1) << np.int64(_AGE_BITS)
_TAG_SHIFT = _AGE_BITS + 1


@njit(cache=True, inline="always")
def _access_set(state, nsets, ways, xshift, line, wrt, tick):
    """Probe/allocate in a set-associative level. Returns (hit, evicted
    line or -1, evicted-dirty, tick).

    One word per way packs [tag | dirty | age]; zero means empty.  Ticks
    are a global allocation counter, giving exact LRU within each set.
    """
    key = (line + 1) << _TAG_SHIFT
    h = line if xshift == 0 else (line ^ (line >> xshift))
    base = (h % nsets) * ways
    found = -1
    victim = 0
    oldest = np.int64(0x7FFFFFFFFFFFFFFF)
    for k in range(ways):
        e = state[base + k]
        if (e >> _TAG_SHIFT) == (key >> _TAG_SHIFT):
            found = k
            break
        if e == 0:
            if oldest != np.int64(-1):
                victim = k
                oldest = np.int64(-1)
        elif oldest != np.int64(-1):
            a = e & _AGE_MASK
            if a < oldest:
                oldest = a
                victim = k
    if found >= 0:
        e = state[base + found]
        d = _SA_DIRTY if wrt else (e & _SA_DIRTY)
        state[base + found] = key | d | tick
        return True, np.int64(-1), False, tick + 1
    ev_line = np.int64(-1)
    ev_dirty = False
    e = state[base + victim]
    if e != 0:
        ev_line = (e >> _TAG_SHIFT) - 1
        ev_dirty = (e & _SA_DIRTY) != 0
    state[base + victim] = key | (_SA_DIRTY if wrt else np.int64(0)) | tick
    return False, ev_line, ev_dirty, tick + 1


@njit(cache=True, inline="always")
def _access_fa(nxt, prv, flag, dirty, meta, line, wrt):
    """Probe/allocate in a fully-associative LRU level (finite capacity)."""
    m = flag.shape[0]
    head = m
    tail = m + 1
    if flag[line]:
        if wrt:
            dirty[line] = 1
        p = prv[line]
        n = nxt[line]
        nxt[p] = n
        prv[n] = p
        n = nxt[head]
        nxt[head] = line
        prv[line] = head
        nxt[line] = n
        prv[n] = line
        return True, np.int64(-1), False
    ev_line = np.int64(-1)
    ev_dirty = False
    if meta[0] >= meta[1]:
        v = prv[tail]
        p = prv[v]
        nxt[p] = tail
        prv[tail] = p
        flag[v] = 0
        ev_line = np.int64(v)
        ev_dirty = dirty[v] != 0
    else:
        meta[0] += 1
    flag[line] = 1
    dirty[line] = 1 if wrt else 0
    n = nxt[head]
    nxt[head] = line
    prv[line] = head
    nxt[line] = n
    prv[n] = line
    return False, ev_line, ev_dirty


@njit(cache=True, inline="always")
def _access_inf(flag, dirty, line, wrt):
    if flag[line]:
        if wrt:
            dirty[line] = 1
        return True
    flag[line] = 1
    dirty[line] = 1 if wrt else 0
    return False


@njit(cache=True)
def run_chain(lines, wrs,
              l2_kind, l2_state, l2_nsets, l2_ways, l2_xshift,
              l2_nxt, l2_prv, l2_flag, l2_dirty, l2_meta,
              has_l3, l3_kind, l3_state, l3_nsets, l3_ways, l3_xshift,
              l3_nxt, l3_prv, l3_flag, l3_dirty, l3_meta,
              ticks, out):
    t2 = ticks[0]
    t3 = ticks[1]
    for i in range(lines.shape[0]):
        line = lines[i]
        w = wrs[i] != 0
        out[L2_ACC] += 1

        if l2_kind == SET_ASSOC:
            hit, ev, evd, t2 = _access_set(l2_state, l2_nsets, l2_ways, l2_xshift,
                                           line, w, t2)
        elif l2_kind == FULL_ASSOC:
            hit, ev, evd = _access_fa(l2_nxt, l2_prv, l2_flag, l2_dirty, l2_meta,
                                      line, w)
        else:
            hit = _access_inf(l2_flag, l2_dirty, line, w)
            ev = np.int64(-1)
            evd = False

        if hit:
            out[L2_HIT] += 1
            continue
        out[L2_MISS] += 1

        # Dirty victim first, then the fill for the missing line.
        if ev >= 0 and evd:
            out[L2_WB] += 1
            if has_l3:
                out[L3_ACC] += 1
                if l3_kind == SET_ASSOC:
                    h3, ev3, evd3, t3 = _access_set(l3_state, l3_nsets, l3_ways,
                                                    l3_xshift, ev, True, t3)
                elif l3_kind == FULL_ASSOC:
                    h3, ev3, evd3 = _access_fa(l3_nxt, l3_prv, l3_flag, l3_dirty,
                                               l3_meta, ev, True)
                else:
                    h3 = _access_inf(l3_flag, l3_dirty, ev, True)
                    ev3 = np.int64(-1)
                    evd3 = False
                if h3:
                    out[L3_HIT] += 1
                else:
                    out[L3_MISS] += 1
                    if ev3 >= 0 and evd3:
                        out[L3_WB] += 1

        if has_l3:
            out[L3_ACC] += 1
            if l3_kind == SET_ASSOC:
                h3, ev3, evd3, t3 = _access_set(l3_state, l3_nsets, l3_ways,
                                                l3_xshift, line, False, t3)
            elif l3_kind == FULL_ASSOC:
                h3, ev3, evd3 = _access_fa(l3_nxt, l3_prv, l3_flag, l3_dirty,
                                           l3_meta, line, False)
            else:
                h3 = _access_inf(l3_flag, l3_dirty, line, False)
                ev3 = np.int64(-1)
                evd3 = False
            if h3:
                out[L3_HIT] += 1
            else:
                out[L3_MISS] += 1
                if ev3 >= 0 and evd3:
                    out[L3_WB] += 1

    ticks[0] = t2
    ticks[1] = t3


@njit(cache=True)
def fa_ladder(lines, wrs, caps, nxt, prv, band, dmask, markers, meta, out):
    """Multi-capacity fully-associative LRU in one pass.

    ``caps`` holds ascending capacities in lines (a huge value models an
    unbounded cache).  ``out`` receives [accesses, miss_0..miss_{K-1},
    wb_0..wb_{K-1}] for this call; state arrays persist across calls.
    """
    m = band.shape[0]
    head = m
    tail = m + 1
    nk = caps.shape[0]
    count = meta[0]
    for i in range(lines.shape[0]):
        line = lines[i]
        w = wrs[i] != 0
        out[0] += 1
        j = band[line]
        if j == EMPTY_BAND:
            for k in range(nk):
                out[1 + k] += 1
            dmask[line] = np.uint16(0xFFFF) if w else np.uint16(0)
            for k in range(nk):
                mk = markers[k]
                if mk >= 0:
                    # the marker node slips one deeper; its replacement is its
                    # predecessor, or the line about to land at the front
                    nm = prv[mk]
                    markers[k] = line if nm == head else nm
                    band[mk] = k + 1
                    if dmask[mk] & (np.uint16(1) << k):
                        out[1 + nk + k] += 1
                        dmask[mk] = dmask[mk] & ~(np.uint16(1) << k)
            n = nxt[head]
            nxt[head] = line
            prv[line] = head
            nxt[line] = n
            prv[n] = line
            band[line] = 0
            count += 1
            for k in range(nk):
                if markers[k] < 0 and count == caps[k]:
                    markers[k] = prv[tail]
        else:
            for k in range(j):
                out[1 + k] += 1
            if w:
                dmask[line] = np.uint16(0xFFFF)
            elif j > 0:
                dmask[line] = dmask[line] & np.uint16((0xFFFF << j) & 0xFFFF)
            for k in range(j):
                mk = markers[k]
                if mk >= 0:
                    nm = prv[mk]
                    markers[k] = line if nm == head else nm
                    band[mk] = k + 1
                    if dmask[mk] & (np.uint16(1) << k):
                        out[1 + nk + k] += 1
                        dmask[mk] = dmask[mk] & ~(np.uint16(1) << k)
            if j < nk and markers[j] == line and prv[line] != head:
                markers[j] = prv[line]
            p = prv[line]
            n2 = nxt[line]
            nxt[p] = n2
            prv[n2] = p
            n = nxt[head]
            nxt[head] = line
            prv[line] = head
            nxt[line] = n
            prv[n] = line
            band[line] = 0
    meta[0] = count


def make_set_state(nsets: int, ways: int) -> np.ndarray:
    return np.zeros(nsets * ways, dtype=np.int64)


def make_fa_state(max_line: int, cap_lines: int):
    nxt = np.zeros(max_line + 2, dtype=np.int32)
    prv = np.zeros(max_line + 2, dtype=np.int32)
    nxt[max_line] = max_line + 1
    prv[max_line + 1] = max_line
    flag = np.zeros(max_line, dtype=np.uint8)
    dirty = np.zeros(max_line, dtype=np.uint8)
    meta = np.array([0, cap_lines], dtype=np.int64)
    return nxt, prv, flag, dirty, meta


def make_inf_state(max_line: int):
    flag = np.zeros(max_line, dtype=np.uint8)
    dirty = np.zeros(max_line, dtype=np.uint8)
    return flag, dirty


def make_ladder_state(max_line: int, cap_lines: list[int]):
    nxt = np.zeros(max_line + 2, dtype=np.int32)
    prv = np.zeros(max_line + 2, dtype=np.int32)
    nxt[max_line] = max_line + 1
    prv[max_line + 1] = max_line
    band = np.full(max_line, EMPTY_BAND, dtype=np.uint8)
    dmask = np.zeros(max_line, dtype=np.uint16)
    caps = np.array(cap_lines, dtype=np.int64)
    markers = np.full(len(cap_lines), -1, dtype=np.int64)
    meta = np.zeros(1, dtype=np.int64)
    return caps, nxt, prv, band, dmask, markers, meta


_DUMMY_I64 = np.zeros(1, dtype=np.int64)
_DUMMY_I32 = np.zeros(1, dtype=np.int32)
_DUMMY_U8 = np.zeros(1, dtype=np.uint8)


def dummy_level():
    """Placeholder arrays for an absent level."""
    return (_DUMMY_I64, 1, 1, 0, _DUMMY_I32, _DUMMY_I32, _DUMMY_U8, _DUMMY_U8,
            _DUMMY_I64)
