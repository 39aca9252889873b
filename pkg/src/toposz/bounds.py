"""Per-vertex admissible value ranges derived from a simplified contour tree."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import ScalarField, dilate
from .topology import ContourTree


class SegmentationError(RuntimeError):
    pass


@dataclass(eq=False)
class BoundsField:
    lower: np.ndarray
    upper: np.ndarray

    def copy(self) -> "BoundsField":
        return BoundsField(self.lower.copy(), self.upper.copy())

    def contains(self, values) -> bool:
        values = np.asarray(values).reshape(-1)
        return bool(np.all(self.lower <= values) and np.all(values <= self.upper))


@dataclass
class MonotonePartition:
    buckets: list[np.ndarray]
    ranges: list[tuple[float, float]]


def _step32(x, toward):
    return np.nextafter(np.asarray(x, dtype=np.float32), np.float32(toward)).astype(np.float64)


def initialize_bounds(field: ScalarField, tree: ContourTree) -> BoundsField:
    """Arc-range bounds for regular vertices, exact pins on the tree's nodes.

    Vertices of branches removed by simplification can sit outside the range
    of the arc that absorbed them; their bounds are widened just enough to
    contain their own value.

    Ties are broken by vertex id, so a regular vertex with a larger id than
    its arc's upper node must stay strictly below that node's value (and
    symmetrically at the lower node). Values are float32-exact after
    normalization, so stepping one float32 ulp inward still contains f.
    """
    f = field.flat
    va = tree.vertex_arc
    regular = va >= 0
    critical = tree.vertex_node >= 0
    if not np.all(regular | critical):
        missing = np.flatnonzero(~(regular | critical))
        raise SegmentationError(f"{missing.size} vertices have no arc or node, e.g. {missing[:5].tolist()}")
    hi = tree.node_scalar[tree.arc_upper]
    lo = tree.node_scalar[tree.arc_lower]
    lower = f.copy()
    upper = f.copy()
    arcs = va[regular]
    lower[regular] = np.minimum(lo[arcs], f[regular])
    upper[regular] = np.maximum(hi[arcs], f[regular])
    ids = np.flatnonzero(regular)
    hi_v = tree.node_vertex[tree.arc_upper[arcs]]
    lo_v = tree.node_vertex[tree.arc_lower[arcs]]
    beats_hi = (ids > hi_v) & (f[ids] < hi[arcs])
    beats_lo = (ids < lo_v) & (f[ids] > lo[arcs])
    upper[ids[beats_hi]] = _step32(hi[arcs][beats_hi], -np.inf)
    lower[ids[beats_lo]] = _step32(lo[arcs][beats_lo], np.inf)
    return BoundsField(lower, upper)


def partition_monotone(field: ScalarField, region, parts: int) -> MonotonePartition:
    """Split ``region`` into ``parts`` contiguous rank buckets, larger buckets first."""
    region = np.asarray(sorted(set(int(v) for v in np.asarray(region).reshape(-1))), dtype=np.int64)
    if region.size == 0:
        raise ValueError("region is empty")
    if parts < 1:
        raise ValueError("parts must be positive")
    f = field.flat
    ordered = region[np.lexsort((region, f[region]))]
    base, extra = divmod(ordered.size, parts)
    sizes = [base + (1 if i < extra else 0) for i in range(parts)]
    buckets, ranges = [], []
    start = 0
    for size in sizes:
        chunk = ordered[start:start + size]
        start += size
        buckets.append(chunk)
        ranges.append((float(f[chunk].min()), float(f[chunk].max())) if chunk.size else (np.nan, np.nan))
    return MonotonePartition(buckets, ranges)


def _tighten(bounds: BoundsField, field: ScalarField, pinned: np.ndarray, region: np.ndarray, parts: int) -> BoundsField:
    out = bounds.copy()
    partition = partition_monotone(field, region, parts)
    for chunk, (lo, hi) in zip(partition.buckets, partition.ranges):
        if chunk.size == 0:
            continue
        free = chunk[~pinned[chunk]]
        out.lower[free] = np.maximum(out.lower[free], lo)
        out.upper[free] = np.minimum(out.upper[free], hi)
    return out


def _pinned(tree: ContourTree) -> np.ndarray:
    return tree.vertex_node >= 0


def false_positive_region(field: ScalarField, dec_tree: ContourTree, saddle: int, arc: int, k: int) -> np.ndarray:
    """k-layer neighborhood of the saddle joined with the spurious arc's pre-image."""
    mask = np.zeros(field.size, dtype=bool)
    mask[saddle] = True
    mask = dilate(mask.reshape(field.dims), k).reshape(-1)
    mask |= dec_tree.vertex_arc == arc
    mask[dec_tree.node_vertex[dec_tree.arc_upper[arc]]] = True
    mask[dec_tree.node_vertex[dec_tree.arc_lower[arc]]] = True
    return np.flatnonzero(mask)


def false_negative_region(field: ScalarField, tree: ContourTree, arc: int, k: int) -> np.ndarray:
    """Pre-image of an original arc (with its end nodes) dilated by k layers."""
    mask = tree.vertex_arc == arc
    mask[tree.node_vertex[tree.arc_upper[arc]]] = True
    mask[tree.node_vertex[tree.arc_lower[arc]]] = True
    mask = dilate(mask.reshape(field.dims), k).reshape(-1)
    return np.flatnonzero(mask)


def refine_for_false_positive(bounds: BoundsField, field: ScalarField, tree: ContourTree, fp, k: int) -> BoundsField:
    """Tighten bounds around a spurious branch of the decompressed tree.

    ``fp`` must carry ``dec_tree``, ``saddle`` (vertex) and ``dec_arc``. The
    region is split into ``k + 1`` rank buckets; pins of ``tree`` are kept.
    """
    region = false_positive_region(field, fp.dec_tree, fp.saddle, fp.dec_arc, k)
    return _tighten(bounds, field, _pinned(tree), region, k + 1)


def refine_for_false_negative_or_type(bounds: BoundsField, field: ScalarField, tree: ContourTree, fc, k: int) -> BoundsField:
    region = false_negative_region(field, tree, fc.orig_arc, k)
    return _tighten(bounds, field, _pinned(tree), region, k + 1)


def refine(bounds: BoundsField, field: ScalarField, tree: ContourTree, case, k: int) -> BoundsField:
    if case.kind == "FP":
        return refine_for_false_positive(bounds, field, tree, case, k)
    return refine_for_false_negative_or_type(bounds, field, tree, case, k)

