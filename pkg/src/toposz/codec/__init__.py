"""Prediction, bounded quantization, entropy coding and the ``.tsz`` format."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..field import ScalarField
from .quantize import lorenzo_predict, quantize, reconstruct
from .stream import (
    BACKEND_DEFLATE,
    BACKEND_STORE,
    BadMagicError,
    CodeTableError,
    CompressedStream,
    StreamFormatError,
    TruncatedStreamError,
    UnsupportedStreamError,
    backend_compress,
    backend_decompress,
)

__all__ = [
    "QuantizationConfig",
    "CompressedStream",
    "encode_field",
    "decode_field",
    "lorenzo_predict",
    "StreamFormatError",
    "BadMagicError",
    "TruncatedStreamError",
    "CodeTableError",
    "UnsupportedStreamError",
    "backend_compress",
    "backend_decompress",
    "BACKEND_DEFLATE",
    "BACKEND_STORE",
]


@dataclass(frozen=True)
class QuantizationConfig:
    xi: float
    m: int = 16

    def __post_init__(self):
        if not (self.xi > 0 and np.isfinite(self.xi)):
            raise ValueError(f"xi must be a positive finite number, got {self.xi}")
        if not 2 <= self.m <= 24:
            raise ValueError(f"m must be in [2, 24], got {self.m}")

    @property
    def spacing(self) -> float:
        return self.xi

    @property
    def center_code(self) -> int:
        return 1 << (self.m - 1)


def encode_field(field: ScalarField, bounds, cfg: QuantizationConfig, eps: float = 0.0,
                 backend: int = BACKEND_DEFLATE) -> tuple[CompressedStream, np.ndarray]:
    """Quantize ``field`` under per-vertex ``bounds``.

    Returns the stream and the decoded values the decoder will reproduce.
    A vertex is coded with the candidate nearest to its value (then the
    other neighbor) that stays within ``xi`` and inside ``[lower, upper]``;
    otherwise it gets code 0 and is stored as float32.
    """
    values = field.values
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite samples")
    lower = np.asarray(bounds.lower, dtype=np.float64).reshape(field.dims)
    upper = np.asarray(bounds.upper, dtype=np.float64).reshape(field.dims)
    codes, exact, decoded = quantize(values, lower, upper, cfg.xi, cfg.m)
    stream = CompressedStream(
        dims=field.dims,
        xi=float(cfg.xi),
        eps=float(eps),
        m=int(cfg.m),
        orig_min=float(np.float32(field.orig_min)),
        orig_max=float(np.float32(field.orig_max)),
        codes=codes,
        exact=exact,
        backend=backend,
    )
    return stream, decoded


def decode_field(stream: CompressedStream | bytes) -> ScalarField:
    if isinstance(stream, (bytes, bytearray, memoryview)):
        stream = CompressedStream.from_bytes(bytes(stream))
    decoded, used = reconstruct(stream.codes, stream.exact, stream.dims, stream.xi, stream.m)
    if used < 0:
        raise TruncatedStreamError("more unpredictable codes than stored exact values")
    if used != stream.exact.size:
        raise StreamFormatError("unused exact values at end of stream")
    return ScalarField(decoded, normalized=True, orig_min=stream.orig_min, orig_max=stream.orig_max)
