"""Canonical Huffman coding of integer symbol streams."""
from __future__ import annotations

import heapq
import struct

import numpy as np
from numba import njit

MAX_CODE_LENGTH = 57


class HuffmanTableError(ValueError):
    pass


class HuffmanTruncatedError(ValueError):
    pass


def code_lengths(symbols: np.ndarray, alphabet_size: int) -> np.ndarray:
    """Huffman code length per symbol of the alphabet (0 for unused symbols)."""
    counts = np.bincount(np.asarray(symbols, dtype=np.int64), minlength=alphabet_size)
    if counts.size > alphabet_size:
        raise ValueError("symbol outside the alphabet")
    lengths = np.zeros(alphabet_size, dtype=np.int64)
    used = np.flatnonzero(counts)
    if used.size == 0:
        return lengths
    if used.size == 1:
        lengths[used[0]] = 1
        return lengths
    # (weight, tiebreak, members); ties resolve by the smallest member symbol
    heap = [(int(counts[s]), int(s), [int(s)]) for s in used]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, t1, m1 = heapq.heappop(heap)
        w2, t2, m2 = heapq.heappop(heap)
        for s in m1:
            lengths[s] += 1
        for s in m2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, min(t1, t2), m1 + m2 if len(m1) >= len(m2) else m2 + m1))
    if lengths.max() > MAX_CODE_LENGTH:
        raise HuffmanTableError("code length limit exceeded")
    return lengths


def canonical_codes(lengths: np.ndarray) -> np.ndarray:
    """Canonical code words for the given lengths (ordered by length, then symbol)."""
    lengths = np.asarray(lengths, dtype=np.int64)
    codes = np.zeros(lengths.size, dtype=np.uint64)
    used = np.flatnonzero(lengths)
    if used.size == 0:
        return codes
    if lengths.max() > MAX_CODE_LENGTH:
        raise HuffmanTableError(f"code length {lengths.max()} exceeds {MAX_CODE_LENGTH}")
    kraft = sum(2.0 ** -float(l) for l in lengths[used])
    if kraft > 1.0 + 1e-12:
        raise HuffmanTableError("code lengths are over-subscribed")
    order = used[np.lexsort((used, lengths[used]))]
    code = 0
    prev = int(lengths[order[0]])
    for s in order:
        l = int(lengths[s])
        code <<= l - prev
        prev = l
        codes[s] = code
        code += 1
    return codes


def encode_bits(symbols: np.ndarray, lengths: np.ndarray) -> tuple[bytes, int]:
    """Pack the code words of ``symbols`` MSB-first; returns (bytes, bit count)."""
    symbols = np.asarray(symbols, dtype=np.int64)
    codes = canonical_codes(lengths)
    lens = lengths[symbols]
    if symbols.size and np.any(lens == 0):
        raise HuffmanTableError("symbol without a code word")
    total = int(lens.sum())
    if total == 0:
        return b"", 0
    words = codes[symbols]
    starts = np.cumsum(lens) - lens
    within = np.arange(total, dtype=np.int64) - np.repeat(starts, lens)
    shift = (np.repeat(lens, lens) - 1 - within).astype(np.uint64)
    bits = ((np.repeat(words, lens) >> shift) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits).tobytes(), total


@njit(cache=True)
def _decode_kernel(data, n_bits, n_symbols, first_code, first_index, count, sorted_syms, max_len):
    out = np.empty(n_symbols, dtype=np.int64)
    pos = 0
    for i in range(n_symbols):
        code = 0
        length = 0
        while True:
            if pos >= n_bits:
                return out, -1
            bit = (data[pos >> 3] >> (7 - (pos & 7))) & 1
            pos += 1
            code = (code << 1) | bit
            length += 1
            if length > max_len:
                return out, -2
            offset = code - first_code[length]
            if offset >= 0 and offset < count[length]:
                out[i] = sorted_syms[first_index[length] + offset]
                break
    return out, pos


def decode_bits(data: bytes, n_bits: int, n_symbols: int, lengths: np.ndarray) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=np.int64)
    if n_symbols == 0:
        return np.zeros(0, dtype=np.int64)
    canonical_codes(lengths)  # validates the table
    used = np.flatnonzero(lengths)
    if used.size == 0:
        raise HuffmanTableError("empty code table for a non-empty stream")
    max_len = int(lengths.max())
    sorted_syms = used[np.lexsort((used, lengths[used]))].astype(np.int64)
    count = np.zeros(max_len + 2, dtype=np.int64)
    np.add.at(count, lengths[used], 1)
    first_code = np.zeros(max_len + 2, dtype=np.int64)
    first_index = np.zeros(max_len + 2, dtype=np.int64)
    code = 0
    index = 0
    for l in range(1, max_len + 1):
        first_code[l] = code
        first_index[l] = index
        code = (code + count[l]) << 1
        index += count[l]
    if len(data) * 8 < n_bits:
        raise HuffmanTruncatedError("coded symbol section is shorter than its bit count")
    buf = np.frombuffer(data, dtype=np.uint8)
    out, status = _decode_kernel(buf, n_bits, n_symbols, first_code, first_index, count, sorted_syms, max_len)
    if status == -1:
        raise HuffmanTruncatedError("ran out of bits while decoding symbols")
    if status == -2:
        raise HuffmanTableError("bit pattern matches no code word")
    return out


def pack_lengths(lengths: np.ndarray) -> bytes:
    """Run-length encode the full length table as (u32 run, u8 length) pairs."""
    lengths = np.asarray(lengths, dtype=np.int64)
    change = np.flatnonzero(np.diff(lengths)) + 1
    edges = np.concatenate([[0], change, [lengths.size]])
    runs = [struct.pack("<IB", int(b - a), int(lengths[a])) for a, b in zip(edges[:-1], edges[1:])]
    return struct.pack("<I", len(runs)) + b"".join(runs)


def unpack_lengths(buf: bytes, offset: int, alphabet_size: int) -> tuple[np.ndarray, int]:
    try:
        (n_runs,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        pairs = [struct.unpack_from("<IB", buf, offset + 5 * r) for r in range(n_runs)]
    except struct.error as exc:
        raise HuffmanTruncatedError("code table is truncated") from exc
    offset += 5 * n_runs
    if sum(run for run, _ in pairs) != alphabet_size:
        raise HuffmanTableError("code table does not cover the alphabet")
    lengths = np.concatenate([np.full(run, l, dtype=np.int64) for run, l in pairs]) if pairs else np.zeros(0, np.int64)
    return lengths, offset
