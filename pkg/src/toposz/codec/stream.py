"""The ``.tsz`` container.

Layout (little-endian)::

    "TSZ1" | version u8 | rank u8 | dims rank*u64 | xi f64 | eps f64 | m u8
    | orig_min f32 | orig_max f32 | backend u8 | payload_len u64 | payload

After the back-end stage the payload holds the run-length coded Huffman
length table, ``n_symbols u64 | n_bits u64 | packed bits`` and
``n_exact u64 | n_exact * f32``.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .huffman import (
    HuffmanTableError,
    HuffmanTruncatedError,
    code_lengths,
    decode_bits,
    encode_bits,
    pack_lengths,
    unpack_lengths,
)

MAGIC = b"TSZ1"
VERSION = 1
BACKEND_STORE = 0
BACKEND_DEFLATE = 1


class StreamFormatError(ValueError):
    """Base class for malformed ``.tsz`` input."""

    code = "format"


class BadMagicError(StreamFormatError):
    code = "bad-magic"


class UnsupportedStreamError(StreamFormatError):
    code = "unsupported"


class TruncatedStreamError(StreamFormatError):
    code = "truncated"


class CodeTableError(StreamFormatError):
    code = "huffman-table"


def backend_compress(data: bytes, backend: int = BACKEND_DEFLATE) -> bytes:
    if backend == BACKEND_STORE:
        return bytes(data)
    if backend == BACKEND_DEFLATE:
        co = zlib.compressobj(9, zlib.DEFLATED, -15, 9, zlib.Z_DEFAULT_STRATEGY)
        return co.compress(data) + co.flush()
    raise UnsupportedStreamError(f"unknown back-end id {backend}")


def backend_decompress(data: bytes, backend: int = BACKEND_DEFLATE) -> bytes:
    if backend == BACKEND_STORE:
        return bytes(data)
    if backend == BACKEND_DEFLATE:
        do = zlib.decompressobj(-15)
        try:
            out = do.decompress(data) + do.flush()
        except zlib.error as exc:
            raise TruncatedStreamError(f"deflate payload is corrupt: {exc}") from exc
        if not do.eof:
            raise TruncatedStreamError("deflate payload ended early")
        return out
    raise UnsupportedStreamError(f"unknown back-end id {backend}")


@dataclass(eq=False)
class CompressedStream:
    dims: tuple
    xi: float
    eps: float
    m: int
    orig_min: float
    orig_max: float
    codes: np.ndarray
    exact: np.ndarray
    backend: int = BACKEND_DEFLATE

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def n_unpredictable(self) -> int:
        return int(self.exact.size)

    def payload(self) -> bytes:
        lengths = code_lengths(self.codes, 1 << self.m)
        bits, n_bits = encode_bits(self.codes, lengths)
        parts = [
            pack_lengths(lengths),
            struct.pack("<QQ", int(self.codes.size), n_bits),
            bits,
            struct.pack("<Q", int(self.exact.size)),
            np.asarray(self.exact, dtype="<f4").tobytes(),
        ]
        return b"".join(parts)

    def to_bytes(self) -> bytes:
        body = backend_compress(self.payload(), self.backend)
        header = [
            MAGIC,
            struct.pack("<BB", VERSION, self.rank),
            struct.pack(f"<{self.rank}Q", *self.dims),
            struct.pack("<ddB", float(self.xi), float(self.eps), int(self.m)),
            struct.pack("<ffB", float(self.orig_min), float(self.orig_max), int(self.backend)),
            struct.pack("<Q", len(body)),
        ]
        return b"".join(header) + body

    @classmethod
    def from_bytes(cls, buf: bytes) -> "CompressedStream":
        buf = bytes(buf)
        if len(buf) < 4 or buf[:4] != MAGIC:
            raise BadMagicError("not a TSZ1 stream")
        try:
            version, rank = struct.unpack_from("<BB", buf, 4)
            if version != VERSION:
                raise UnsupportedStreamError(f"unsupported version {version}")
            if rank not in (2, 3):
                raise UnsupportedStreamError(f"unsupported rank {rank}")
            off = 6
            dims = struct.unpack_from(f"<{rank}Q", buf, off)
            off += 8 * rank
            xi, eps, m = struct.unpack_from("<ddB", buf, off)
            off += 17
            orig_min, orig_max, backend = struct.unpack_from("<ffB", buf, off)
            off += 9
            (n_body,) = struct.unpack_from("<Q", buf, off)
            off += 8
        except struct.error as exc:
            raise TruncatedStreamError("header is truncated") from exc
        if not 2 <= m <= 24:
            raise UnsupportedStreamError(f"unsupported code width m={m}")
        if len(buf) - off < n_body:
            raise TruncatedStreamError(f"payload needs {n_body} bytes, {len(buf) - off} present")
        if len(buf) - off > n_body:
            raise StreamFormatError("trailing bytes after payload")
        payload = backend_decompress(buf[off:off + n_body], backend)
        n = int(np.prod(dims))
        try:
            lengths, p = unpack_lengths(payload, 0, 1 << m)
            n_symbols, n_bits = struct.unpack_from("<QQ", payload, p)
            p += 16
            n_bytes = (n_bits + 7) // 8
            bits = payload[p:p + n_bytes]
            if len(bits) < n_bytes:
                raise TruncatedStreamError("coded symbol section is truncated")
            p += n_bytes
            (n_exact,) = struct.unpack_from("<Q", payload, p)
            p += 8
        except struct.error as exc:
            raise TruncatedStreamError("payload is truncated") from exc
        except HuffmanTruncatedError as exc:
            raise TruncatedStreamError(str(exc)) from exc
        except HuffmanTableError as exc:
            raise CodeTableError(str(exc)) from exc
        if n_symbols != n:
            raise StreamFormatError(f"symbol count {n_symbols} does not match dims {dims}")
        if len(payload) - p != 4 * n_exact:
            raise TruncatedStreamError("exact-value section length mismatch")
        try:
            codes = decode_bits(bits, n_bits, n_symbols, lengths)
        except HuffmanTruncatedError as exc:
            raise TruncatedStreamError(str(exc)) from exc
        except HuffmanTableError as exc:
            raise CodeTableError(str(exc)) from exc
        exact = np.frombuffer(payload[p:], dtype="<f4").astype(np.float32)
        return cls(tuple(int(d) for d in dims), xi, eps, int(m), orig_min, orig_max, codes, exact, backend)
