import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_bottleneck, brute_wasserstein
from toposz.field import ScalarField, generate_gaussian_mixture, normalize
from toposz.metrics import (
    MetricsReport,
    bottleneck_distance,
    compression_ratio,
    evaluate,
    mse,
    psnr,
    wasserstein_distance,
)


def unit_field(seed=0, dims=(16, 16)):
    return normalize(generate_gaussian_mixture(dims, seed=seed))


def random_diagram(rng, n):
    b = rng.uniform(0, 1, size=n).round(2)
    return np.stack([b, b + rng.uniform(0, 0.5, size=n).round(2)], axis=1)


def test_psnr_identical_is_infinite():
    f = unit_field()
    assert psnr(f, f) == math.inf
    assert mse(f, f) == 0.0


def test_psnr_of_constant_shift():
    f = unit_field()
    g = f.with_values(f.values + 0.1)
    assert psnr(f, g) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_direct_sum():
    rng = np.random.default_rng(1)
    f = unit_field(1)
    g = f.with_values(f.values + rng.normal(scale=0.01, size=f.dims))
    total = 0.0
    for a, b in zip(f.values.ravel().tolist(), g.values.ravel().tolist()):
        total += (a - b) ** 2
    want = 20 * math.log10(f.values.max() / math.sqrt(total / f.size))
    assert psnr(f, g) == pytest.approx(want, rel=1e-12)


def test_mse_rejects_dims_mismatch():
    with pytest.raises(ValueError):
        mse(ScalarField(np.zeros((2, 3))), ScalarField(np.zeros((3, 2))))


def test_compression_ratio_examples():
    assert compression_ratio(4096, 1024) == 4.0
    assert compression_ratio(100, 400) == 0.25
    for bad in ((0, 10), (10, 0), (-1, 3)):
        with pytest.raises(ValueError):
            compression_ratio(*bad)


def test_single_point_against_empty():
    assert bottleneck_distance([(0.0, 1.0)], []) == 0.5
    assert wasserstein_distance([(0.0, 1.0)], []) == pytest.approx(0.5)
    assert bottleneck_distance([], []) == 0.0 and wasserstein_distance([], []) == 0.0


def test_identical_diagrams_are_at_zero():
    d = [(0.1, 0.4), (0.2, 0.9), (0.2, 0.9)]
    assert bottleneck_distance(d, d) == 0.0
    assert wasserstein_distance(d, d) == 0.0


@pytest.mark.parametrize("seed", range(40))
def test_distances_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    a = random_diagram(rng, int(rng.integers(0, 5)))
    b = random_diagram(rng, int(rng.integers(0, 5)))
    assert bottleneck_distance(a, b) == pytest.approx(brute_bottleneck(a, b), abs=1e-12)
    assert wasserstein_distance(a, b) == pytest.approx(brute_wasserstein(a, b), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_metric_properties(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_diagram(rng, int(rng.integers(0, 6))) for _ in range(3))
    for dist in (bottleneck_distance, wasserstein_distance):
        assert dist(a, b) == pytest.approx(dist(b, a), abs=1e-12)
        assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9
    assert bottleneck_distance(a, b) <= wasserstein_distance(a, b) + 1e-12


def test_evaluate_report_json():
    f = unit_field(2)
    report = evaluate(f, f, compressed_bytes=f.size)
    assert report.psnr == math.inf and report.compression_ratio == 4.0
    assert report.bottleneck == 0.0 and report.max_abs_error == 0.0
    data = json.loads(report.to_json())
    assert data["psnr"] == "inf" and data["false_cases"] == {}


def test_evaluate_error_bounds_diagram_shift():
    f = unit_field(3)
    rng = np.random.default_rng(3)
    g = f.with_values(f.values + rng.uniform(-0.01, 0.01, size=f.dims))
    report = evaluate(f, g)
    assert report.compression_ratio is None
    assert report.bottleneck <= report.max_abs_error + 1e-12
    assert isinstance(report, MetricsReport)
