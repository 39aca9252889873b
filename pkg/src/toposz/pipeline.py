"""The compress / decompress / detect / refine loop."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .bounds import BoundsField, initialize_bounds, refine
from .codec import CompressedStream, QuantizationConfig, decode_field, encode_field
from .field import ScalarField, denormalize, normalize
from .metrics import compression_ratio, psnr
from .topology import ContourTree, build_contour_tree, simplify
from .validate import FalseCaseReport, detect_false_cases

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    xi: float
    eps: float
    m: int = 16
    max_iterations: int = 100

    def __post_init__(self):
        if not (self.xi > 0 and math.isfinite(self.xi)):
            raise ValueError(f"xi must be positive, got {self.xi}")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        QuantizationConfig(self.xi, self.m)


@dataclass
class TraceStep:
    step: int
    fp: int
    fn: int
    ft: int
    eb_percent: float
    ratio: float
    psnr: float

    @property
    def false_cases(self) -> int:
        return self.fp + self.fn + self.ft


@dataclass
class IterationTrace:
    steps: list[TraceStep] = dc_field(default_factory=list)
    final_report: FalseCaseReport | None = None
    original_tree: ContourTree | None = None
    decoded: ScalarField | None = None
    bounds: BoundsField | None = None

    @property
    def iterations(self) -> int:
        """Refinement rounds performed (0 when the initial bounds sufficed)."""
        return max(len(self.steps) - 1, 0)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("step,fp,fn,ft,eb_percent,ratio,psnr\n")
        for s in self.steps:
            p = "inf" if math.isinf(s.psnr) else repr(s.psnr)
            out.write(f"{s.step},{s.fp},{s.fn},{s.ft},{s.eb_percent!r},{s.ratio!r},{p}\n")
        return out.getvalue()


class IterationLimitError(RuntimeError):
    def __init__(self, trace: IterationTrace, report: FalseCaseReport):
        super().__init__(
            f"{len(report)} false cases remain after {trace.iterations} iterations"
        )
        self.trace = trace
        self.report = report


def compress(field: ScalarField, cfg: PipelineConfig) -> tuple[CompressedStream, IterationTrace]:
    f = normalize(field)
    qcfg = QuantizationConfig(cfg.xi, cfg.m)
    tree = simplify(build_contour_tree(f), cfg.eps)
    bounds = initialize_bounds(f, tree)
    trace = IterationTrace(original_tree=tree)
    eb_percent = 100.0
    k = 0
    while True:
        stream, _ = encode_field(f, bounds, qcfg, eps=cfg.eps)
        data = stream.to_bytes()
        decoded = decode_field(data)
        dec_tree = simplify(build_contour_tree(decoded), cfg.eps)
        report = detect_false_cases(tree, dec_tree)
        counts = report.counts
        trace.steps.append(
            TraceStep(k, counts["FP"], counts["FN"], counts["FT"], eb_percent,
                      compression_ratio(4 * f.size, len(data)), psnr(f, decoded))
        )
        log.info("step %d: %s false cases, ratio %.2f", k, counts, trace.steps[-1].ratio)
        trace.final_report = report
        trace.decoded = decoded
        trace.bounds = bounds
        if not report:
            return stream, trace
        if k >= cfg.max_iterations:
            raise IterationLimitError(trace, report)
        k += 1
        refined = bounds
        for case in report.cases:
            refined = refine(refined, f, tree, case, k)
        changed = (refined.lower != bounds.lower) | (refined.upper != bounds.upper)
        eb_percent = 100.0 * float(np.mean(changed))
        bounds = refined


def decompress(stream: CompressedStream | bytes) -> ScalarField:
    """Decode and map back to the original value range."""
    normalized = decode_field(stream)
    return denormalize(normalized)
