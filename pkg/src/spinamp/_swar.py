"""Word-parallel (bit-sliced) phase kernel.

Each triangular layer row is a contiguous bit run, and all six neighbor
contributions of a row are contiguous runs in the two adjacent layers with
shifts of at most one bit.  A carry-save adder over the six neighbor
bit-vectors yields the per-site up-neighbor count in three bit planes, 64
sites per word; the target mask is then a boolean function of the planes
selected by the (neighbor count, up count) rule table.  Row-boundary sites
(missing one in-layer parent each) are fixed up scalarly.

Gate omissions clear ranked target bits, so Bernoulli noise costs one
geometric variate per omission rather than one uniform per target.
"""

import numba
import numpy as np

U0 = np.uint64(0)
U1 = np.uint64(1)
U2 = np.uint64(2)
U4 = np.uint64(4)
U56 = np.uint64(56)
U63 = np.uint64(63)
U64 = np.uint64(64)
M5 = np.uint64(0x5555555555555555)
M3 = np.uint64(0x3333333333333333)
MF = np.uint64(0x0F0F0F0F0F0F0F0F)
M1 = np.uint64(0x0101010101010101)
ALL1 = np.uint64(0xFFFFFFFFFFFFFFFF)


@numba.njit(inline="always")
def _pc64(x):
    x = x - ((x >> U1) & M5)
    x = (x & M3) + ((x >> U2) & M3)
    x = (x + (x >> U4)) & MF
    return (x * M1) >> U56


@numba.njit(inline="always")
def _read64(words, bitpos):
    """64 bits starting at bitpos (>= 0); words carries one spare zero word."""
    w = bitpos >> 6
    r = np.uint64(bitpos & 63)
    v = words[w] >> r
    if r != U0:
        v |= words[w + 1] << (U64 - r)
    return v


@numba.njit(inline="always")
def _getbit(words, pos):
    return np.int64((words[pos >> 6] >> np.uint64(pos & 63)) & U1)


@numba.njit(inline="always")
def _site_up_n(words, L, l, x, y, embedded):
    """(up neighbor count, neighbor count incl. virtual) of site (x, y) in layer l."""
    off_m = (l - 2) * (l - 1) * l // 6
    off_p = l * (l + 1) * (l + 2) // 6
    up = np.int64(0)
    n = np.int64(0)
    if x >= 1:
        up += _getbit(words, off_m + (x - 1) * (l - 1) - (x - 1) * (x - 2) // 2 + y)
        n += 1
    if y >= 1:
        up += _getbit(words, off_m + x * (l - 1) - x * (x - 1) // 2 + y - 1)
        n += 1
    if x + y <= l - 2:
        up += _getbit(words, off_m + x * (l - 1) - x * (x - 1) // 2 + y)
        n += 1
    if l < L:
        base_p = off_p + x * (l + 1) - x * (x - 1) // 2
        up += _getbit(words, off_p + (x + 1) * (l + 1) - (x + 1) * x // 2 + y)
        up += _getbit(words, base_p + y + 1)
        up += _getbit(words, base_p + y)
        n += 3
    elif embedded:
        n += 3
    return up, n


@numba.njit(inline="always")
def _set_local(mask, pos, value):
    w = pos >> 6
    b = np.uint64(pos & 63)
    if value:
        mask[w] |= U1 << b
    else:
        mask[w] &= ~(U1 << b)


@numba.njit(cache=True)
def build_target_mask(words, L, layer, allowed, embedded, mask):
    """Fill `mask` (layer-local bit coordinates) with the rule's target sites;
    returns the target count.  `allowed` is a (7, 7) uint8 table over
    (neighbor count, up count)."""
    l = np.int64(layer)
    size = l * (l + 1) // 2
    nw = (size + 63) >> 6
    for i in range(nw):
        mask[i] = U0
    off_m = (l - 2) * (l - 1) * l // 6
    off_p = l * (l + 1) * (l + 2) // 6
    has_children = layer < L
    child_n = 3 if (has_children or embedded) else 0

    t = np.int64(0)
    for x in range(l):
        row_len = l - x
        if row_len <= 2 or l <= 2:
            for y in range(row_len):
                up, n = _site_up_n(words, L, l, x, y, embedded)
                if allowed[n, up]:
                    _set_local(mask, t + y, 1)
            t += row_len
            continue

        g_m1 = off_m + (x - 1) * (l - 1) - (x - 1) * (x - 2) // 2
        g_m0 = off_m + x * (l - 1) - x * (x - 1) // 2
        g_p1 = off_p + (x + 1) * (l + 1) - (x + 1) * x // 2
        g_p0 = off_p + x * (l + 1) - x * (x - 1) // 2
        n_int = (1 if x >= 1 else 0) + 2 + child_n

        nw_row = (row_len + 63) >> 6
        for j in range(nw_row):
            base = j << 6
            p1 = _read64(words, g_m1 + base) if x >= 1 else U0
            if j == 0:
                p2 = _read64(words, g_m0) << U1
            else:
                p2 = _read64(words, g_m0 + base - 1)
            p3 = _read64(words, g_m0 + base)
            if has_children:
                c1 = _read64(words, g_p1 + base)
                c2 = _read64(words, g_p0 + base + 1)
                c3 = _read64(words, g_p0 + base)
            else:
                c1 = U0
                c2 = U0
                c3 = U0
            # carry-save adder: up count planes b2 b1 b0
            a0 = p1 ^ p2 ^ p3
            k0 = (p1 & p2) | (p3 & (p1 ^ p2))
            a1 = c1 ^ c2 ^ c3
            k1 = (c1 & c2) | (c3 & (c1 ^ c2))
            b0 = a0 ^ a1
            carry = a0 & a1
            b1 = k0 ^ k1 ^ carry
            b2 = (k0 & k1) | (carry & (k0 ^ k1))

            m = U0
            for u in range(7):
                if allowed[n_int, u]:
                    t0 = b0 if (u & 1) else ~b0
                    t1 = b1 if (u & 2) else ~b1
                    t2 = b2 if (u & 4) else ~b2
                    m |= t0 & t1 & t2
            tail = row_len - base
            if tail < 64:
                m &= (U1 << np.uint64(tail)) - U1
            # OR the row word into the layer-local mask at bit offset t + base
            pos = t + base
            r = np.uint64(pos & 63)
            w = pos >> 6
            mask[w] |= m << r
            if r != U0:
                mask[w + 1] |= m >> (U64 - r)

        # first and last site of the row miss one in-layer parent each
        for y in (0, row_len - 1):
            up, n = _site_up_n(words, L, l, x, y, embedded)
            _set_local(mask, t + y, 1 if allowed[n, up] else 0)
        t += row_len

    cnt = np.int64(0)
    for i in range(nw):
        cnt += np.int64(_pc64(mask[i]))
    return cnt


@numba.njit(cache=True)
def clear_ranks(mask, nw, ranks):
    """Clear the ranks[k]-th set bits (ranks ascending) of mask; returns the
    number cleared."""
    cum = np.int64(0)
    k = 0
    removed = 0
    for i in range(nw):
        if k >= len(ranks):
            break
        orig = mask[i]
        c = np.int64(_pc64(orig))
        while k < len(ranks) and ranks[k] < cum + c:
            t = orig
            for _ in range(ranks[k] - cum):
                t &= t - U1
            mask[i] &= ~(t & (~t + U1))
            removed += 1
            k += 1
        cum += c
    return removed


@numba.njit(cache=True)
def xor_mask(words, mask, nw, off_bit):
    """XOR the layer-local mask into the state at global bit offset off_bit."""
    r = np.uint64(off_bit & 63)
    w0 = off_bit >> 6
    if r == U0:
        for i in range(nw):
            words[w0 + i] ^= mask[i]
    else:
        carry = U0
        for i in range(nw):
            m = mask[i]
            words[w0 + i] ^= (m << r) | carry
            carry = m >> (U64 - r)
        words[w0 + nw] ^= carry
