"""Regular-grid scalar fields: normalization, neighborhoods, raw I/O, synthetic data."""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from itertools import product

import numpy as np


class DegenerateFieldWarning(UserWarning):
    """Raised (as a warning) when a constant field is normalized."""


class RawSizeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A scalar field sampled on a 2D or 3D regular grid.

    ``values`` is a read-only float64 array of shape ``dims`` (row-major).
    ``orig_min``/``orig_max`` remember the affine map applied by
    :func:`normalize` so a decompressed field can be mapped back.
    """

    values: np.ndarray
    normalized: bool = False
    orig_min: float = 0.0
    orig_max: float = 1.0
    _flat: np.ndarray = dc_field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim not in (2, 3):
            raise ValueError(f"rank must be 2 or 3, got {values.ndim}")
        if values.size == 0:
            raise ValueError("field is empty")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        flat = values.reshape(-1)
        object.__setattr__(self, "_flat", flat)

    @property
    def rank(self) -> int:
        return self.values.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self.values.shape)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def flat(self) -> np.ndarray:
        return self._flat

    def coords(self, v: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(v, self.dims))

    def vertex(self, *coords: int) -> int:
        return int(np.ravel_multi_index(coords, self.dims))

    def with_values(self, values, normalized=None) -> "ScalarField":
        return ScalarField(
            np.asarray(values, dtype=np.float64).reshape(self.dims),
            normalized=self.normalized if normalized is None else normalized,
            orig_min=self.orig_min,
            orig_max=self.orig_max,
        )


def normalize(field: ScalarField) -> ScalarField:
    """Affinely map values to [0, 1], rounded to 32-bit precision.

    The rounding makes every normalized sample exactly representable in the
    32-bit storage format, so pinned values survive a float32 round trip.
    """
    values = field.values
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        warnings.warn("constant field normalizes to all zeros", DegenerateFieldWarning, stacklevel=2)
        scaled = np.zeros_like(values)
    else:
        scaled = (values - lo) / (hi - lo)
        scaled = scaled.astype(np.float32).astype(np.float64)
    if field.normalized:
        # keep the denormalization map of the original data
        lo_rec, hi_rec = field.orig_min, field.orig_max
        if hi > lo:
            lo_rec, hi_rec = (
                field.orig_min + lo * (field.orig_max - field.orig_min),
                field.orig_min + hi * (field.orig_max - field.orig_min),
            )
    else:
        lo_rec, hi_rec = lo, hi
    return ScalarField(scaled, normalized=True, orig_min=lo_rec, orig_max=hi_rec)


def denormalize(field: ScalarField, orig_min: float | None = None, orig_max: float | None = None) -> ScalarField:
    lo = field.orig_min if orig_min is None else orig_min
    hi = field.orig_max if orig_max is None else orig_max
    return ScalarField(field.values * (hi - lo) + lo, normalized=False, orig_min=lo, orig_max=hi)


# -- neighborhoods ---------------------------------------------------------

@lru_cache(maxsize=None)
def freudenthal_offsets(rank: int) -> np.ndarray:
    """Edge offsets of the Freudenthal triangulation (diagonal toward +1 on all axes)."""
    positive = [
        d for d in product((0, 1), repeat=rank) if any(d)
    ]
    offsets = positive + [tuple(-c for c in d) for d in positive]
    out = np.array(sorted(offsets), dtype=np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _neighbor_table(dims: tuple[int, ...]) -> np.ndarray:
    rank = len(dims)
    offsets = freudenthal_offsets(rank)
    grid = np.indices(dims).reshape(rank, -1).T
    nb = grid[:, None, :] + offsets[None, :, :]
    inside = np.all((nb >= 0) & (nb < np.array(dims)), axis=2)
    flat = np.zeros(inside.shape, dtype=np.int64)
    stride = 1
    for ax in range(rank - 1, -1, -1):
        flat += np.where(inside, nb[:, :, ax], 0) * stride
        stride *= dims[ax]
    table = np.where(inside, flat, -1)
    table.setflags(write=False)
    return table


def neighbor_table(dims) -> np.ndarray:
    """(N, K) array of Freudenthal neighbors per vertex, -1 where clipped."""
    return _neighbor_table(tuple(int(d) for d in dims))


def simplicial_neighbors(field: ScalarField, v: int) -> set[int]:
    row = neighbor_table(field.dims)[v]
    return {int(u) for u in row if u >= 0}


def k_layer_neighborhood(field: ScalarField, v: int, k: int) -> set[int]:
    """All vertices within Chebyshev distance ``k`` of ``v`` (``v`` included)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    center = field.coords(v)
    ranges = [range(max(0, c - k), min(d, c + k + 1)) for c, d in zip(center, field.dims)]
    return {field.vertex(*p) for p in product(*ranges)}


def dilate(mask: np.ndarray, k: int) -> np.ndarray:
    """Chebyshev dilation of a boolean grid mask by ``k`` layers."""
    if k <= 0:
        return mask.copy()
    from scipy.ndimage import maximum_filter

    return maximum_filter(mask.astype(np.uint8), size=2 * k + 1, mode="constant", cval=0).astype(bool)


# -- synthetic data --------------------------------------------------------

def generate_gaussian_mixture(dims, components=None, seed: int = 0, n_components: int = 6) -> ScalarField:
    """Sum of isotropic Gaussians sampled on the grid, then normalized.

    ``components`` is a list of ``(center, amplitude, spread)`` with the center
    and spread in unit-cube coordinates. When omitted, ``n_components`` of
    them are drawn from ``seed``.
    """
    dims = tuple(int(d) for d in dims)
    if components is None:
        components = random_components(len(dims), n_components, seed)
    if not components:
        raise ValueError("at least one component is required")
    axes = [np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1) for d in dims]
    mesh = np.meshgrid(*axes, indexing="ij")
    values = np.zeros(dims, dtype=np.float64)
    for center, amplitude, spread in components:
        r2 = np.zeros(dims, dtype=np.float64)
        for x, c in zip(mesh, center):
            r2 += (x - float(c)) ** 2
        values += float(amplitude) * np.exp(-r2 / (2.0 * float(spread) ** 2))
    return normalize(ScalarField(values))


def random_components(rank: int, n: int, seed: int):
    rng = np.random.default_rng(seed)
    comps = []
    for _ in range(n):
        center = tuple(float(c) for c in rng.uniform(0.1, 0.9, size=rank))
        amplitude = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.4, 1.0))
        spread = float(rng.uniform(0.08, 0.22))
        comps.append((center, amplitude, spread))
    return comps


# -- raw I/O ---------------------------------------------------------------

def load_raw(path, dims, rank: int | None = None) -> ScalarField:
    dims = tuple(int(d) for d in dims)
    if rank is not None and rank != len(dims):
        raise ValueError(f"rank {rank} does not match dims {dims}")
    expected = 4 * int(np.prod(dims))
    actual = os.path.getsize(path)
    if actual != expected:
        raise RawSizeError(f"{path}: expected {expected} bytes for dims {dims}, got {actual}")
    data = np.fromfile(path, dtype="<f4")
    return ScalarField(data.astype(np.float64).reshape(dims))


def save_raw(field: ScalarField, path) -> None:
    field.values.astype("<f4").tofile(path)
