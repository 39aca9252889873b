"""Lorenzo prediction and the bounds-aware error-controlled quantizer.

2D fields are scanned as a single 3D slab, which reduces the 7-term 3D
Lorenzo stencil to the 3-term 2D one.
"""
from __future__ import annotations

import numpy as np
from numba import njit


def _as3d(dims):
    dims = tuple(int(d) for d in dims)
    return (1,) * (3 - len(dims)) + dims


def lorenzo_predict(decoded: np.ndarray, v: int) -> float:
    """Lorenzo prediction for flat vertex ``v`` from already decoded samples.

    Neighbors outside the grid contribute 0.
    """
    arr = np.asarray(decoded, dtype=np.float64)
    coords = np.unravel_index(v, arr.shape)
    rank = arr.ndim
    total = 0.0
    for mask in range(1, 1 << rank):
        pos = list(coords)
        bits = 0
        for ax in range(rank):
            if mask >> ax & 1:
                pos[ax] -= 1
                bits += 1
        if min(pos) < 0:
            continue
        total += (1.0 if bits % 2 else -1.0) * arr[tuple(pos)]
    return total


@njit(cache=True)
def _predict(d, i, j, k):
    a = d[i, j, k - 1] if k > 0 else 0.0
    b = d[i, j - 1, k] if j > 0 else 0.0
    c = d[i - 1, j, k] if i > 0 else 0.0
    ab = d[i, j - 1, k - 1] if j > 0 and k > 0 else 0.0
    ac = d[i - 1, j, k - 1] if i > 0 and k > 0 else 0.0
    bc = d[i - 1, j - 1, k] if i > 0 and j > 0 else 0.0
    abc = d[i - 1, j - 1, k - 1] if i > 0 and j > 0 and k > 0 else 0.0
    return (a + b + c) - (ab + ac + bc) + abc


@njit(cache=True)
def quantize_scan(values, lower, upper, xi, m):
    """Row-major encode. Returns (codes, exact values, decoded field)."""
    n0, n1, n2 = values.shape
    half = 1 << (m - 1)
    top = (1 << m) - 1
    codes = np.empty(values.size, dtype=np.int64)
    exact = np.empty(values.size, dtype=np.float32)
    n_exact = 0
    dec = np.zeros(values.shape, dtype=np.float64)
    flat = 0
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                f = values[i, j, k]
                lo = lower[i, j, k]
                hi = upper[i, j, k]
                p = _predict(dec, i, j, k)
                t = (f - p) / xi
                chosen = 0
                if abs(t) < top:
                    q0 = np.floor(t)
                    if t - q0 <= 0.5:
                        first, second = q0, q0 + 1.0
                    else:
                        first, second = q0 + 1.0, q0
                    for q in (first, second):
                        c = int(q) + half
                        if c < 1 or c > top:
                            continue
                        cand = p + float(c - half) * xi
                        if abs(cand - f) <= xi and lo <= cand and cand <= hi:
                            chosen = c
                            dec[i, j, k] = cand
                            break
                if chosen == 0:
                    exact[n_exact] = np.float32(f)
                    n_exact += 1
                    dec[i, j, k] = np.float64(np.float32(f))
                codes[flat] = chosen
                flat += 1
    return codes, exact[:n_exact], dec


@njit(cache=True)
def reconstruct_scan(codes, exact, shape0, shape1, shape2, xi, m):
    """Inverse of :func:`quantize_scan`; status -1 if exact values run short."""
    half = 1 << (m - 1)
    dec = np.zeros((shape0, shape1, shape2), dtype=np.float64)
    e = 0
    flat = 0
    for i in range(shape0):
        for j in range(shape1):
            for k in range(shape2):
                c = codes[flat]
                flat += 1
                if c == 0:
                    if e >= exact.size:
                        return dec, -1
                    dec[i, j, k] = np.float64(exact[e])
                    e += 1
                else:
                    p = _predict(dec, i, j, k)
                    dec[i, j, k] = p + float(c - half) * xi
    return dec, e


def quantize(values: np.ndarray, lower: np.ndarray, upper: np.ndarray, xi: float, m: int):
    dims = values.shape
    shape = _as3d(dims)
    codes, exact, dec = quantize_scan(
        np.ascontiguousarray(values, dtype=np.float64).reshape(shape),
        np.ascontiguousarray(lower, dtype=np.float64).reshape(shape),
        np.ascontiguousarray(upper, dtype=np.float64).reshape(shape),
        float(xi),
        int(m),
    )
    return codes, exact, dec.reshape(dims)


def reconstruct(codes: np.ndarray, exact: np.ndarray, dims, xi: float, m: int):
    shape = _as3d(dims)
    dec, used = reconstruct_scan(
        np.ascontiguousarray(codes, dtype=np.int64),
        np.ascontiguousarray(exact, dtype=np.float32),
        shape[0], shape[1], shape[2], float(xi), int(m),
    )
    return dec.reshape(tuple(dims)), used
