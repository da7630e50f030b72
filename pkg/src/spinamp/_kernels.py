"""Numba kernels for the bit-packed pyramid automaton.

Sites are addressed by dense layer-major ids; spin s = 2*bit - 1 (bit 1 is
up).  Neighbor ids are pure index arithmetic on the triangular layers, so no
adjacency structure is needed even at 10^8 sites.  Bit order within a byte is
little-endian (bit i of byte j is site 8*j + i), matching
numpy.packbits(bitorder='little').
"""

import numba
import numpy as np

POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


@numba.njit(inline="always")
def _getbit(bits, gid):
    return (bits[gid >> 3] >> (gid & 7)) & 1


@numba.njit(inline="always")
def _flipbit(bits, gid):
    bits[gid >> 3] ^= np.uint8(1 << (gid & 7))


@numba.njit(cache=True)
def collect_targets(bits, L, layer, field_mask, embedded, out_ids):
    """Ids of sites in `layer` whose neighbor field is selected by `field_mask`.

    field_mask selects field value f via bit (f + 6).  Fields are evaluated
    against the current state; targets are written to out_ids (caller sizes it
    to at least the layer size).  Returns the target count.
    """
    l = np.int64(layer)
    off = (l - 1) * l * (l + 1) // 6
    off_m = (l - 2) * (l - 1) * l // 6
    off_p = l * (l + 1) * (l + 2) // 6
    has_children = layer < L
    cnt = 0
    t = np.int64(0)
    for x in range(l):
        row_len = l - x
        # row starts in the three relevant layers
        row_m1 = off_m + (x - 1) * (l - 1) - (x - 1) * (x - 2) // 2  # (x-1, y) in layer l-1
        row_m0 = off_m + x * (l - 1) - x * (x - 1) // 2              # (x, *) in layer l-1
        row_p1 = off_p + (x + 1) * (l + 1) - (x + 1) * x // 2        # (x+1, y) in layer l+1
        row_p0 = off_p + x * (l + 1) - x * (x - 1) // 2              # (x, *) in layer l+1
        for y in range(row_len):
            up = 0
            n = 0
            if x >= 1:
                up += _getbit(bits, row_m1 + y)
                n += 1
            if y >= 1:
                up += _getbit(bits, row_m0 + y - 1)
                n += 1
            if x + y <= l - 2:
                up += _getbit(bits, row_m0 + y)
                n += 1
            if has_children:
                up += _getbit(bits, row_p1 + y)
                up += _getbit(bits, row_p0 + y + 1)
                up += _getbit(bits, row_p0 + y)
                n += 3
            elif embedded:
                n += 3  # virtual always-down children below the bottom cut
            field = 2 * up - n
            if (field_mask >> (field + 6)) & 1:
                out_ids[cnt] = off + t
                cnt += 1
            t += 1
    return cnt


@numba.njit(cache=True)
def flip_ids(bits, ids, n):
    for i in range(n):
        _flipbit(bits, ids[i])


@numba.njit(cache=True)
def popcount_range(bits, start, stop, table):
    """Set bits in the bit-index range [start, stop)."""
    total = np.int64(0)
    b0 = start >> 3
    b1 = (stop - 1) >> 3
    if b0 == b1:
        for g in range(start, stop):
            total += _getbit(bits, g)
        return total
    head_end = (b0 + 1) << 3
    for g in range(start, head_end):
        total += _getbit(bits, g)
    for b in range(b0 + 1, b1):
        total += table[bits[b]]
    for g in range(b1 << 3, stop):
        total += _getbit(bits, g)
    return total


@numba.njit(cache=True)
def diffusion_sweep(bits, pair_i, pair_j, order, rands, p_exchange):
    """One flip-flop surrogate sweep: visit pairs in `order`, swap anti-aligned
    pairs with probability p_exchange.  Conserves the number of set bits."""
    swaps = 0
    for idx in range(order.shape[0]):
        p = order[idx]
        i = pair_i[p]
        j = pair_j[p]
        if _getbit(bits, i) != _getbit(bits, j) and rands[idx] < p_exchange:
            _flipbit(bits, i)
            _flipbit(bits, j)
            swaps += 1
    return swaps
