import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toposz.bounds import BoundsField, initialize_bounds
from toposz.codec import (
    BACKEND_DEFLATE,
    BACKEND_STORE,
    BadMagicError,
    CodeTableError,
    CompressedStream,
    QuantizationConfig,
    StreamFormatError,
    TruncatedStreamError,
    UnsupportedStreamError,
    backend_compress,
    backend_decompress,
    decode_field,
    encode_field,
    lorenzo_predict,
)
from toposz.codec.huffman import (
    HuffmanTableError,
    canonical_codes,
    code_lengths,
    decode_bits,
    encode_bits,
    pack_lengths,
    unpack_lengths,
)
from toposz.codec.quantize import quantize, reconstruct
from toposz.field import ScalarField, generate_gaussian_mixture, normalize
from toposz.topology import build_contour_tree, simplify

F32_SLACK = 2.0 ** -23


def open_bounds(f):
    return BoundsField(np.full(f.size, -np.inf), np.full(f.size, np.inf))


# -- Lorenzo predictor ---------------------------------------------------------

def test_lorenzo_2d():
    d = np.array([[0.2, 0.4], [0.5, 0.0]])
    assert lorenzo_predict(d, 3) == pytest.approx(0.7)


def test_lorenzo_origin_is_zero():
    assert lorenzo_predict(np.ones((3, 3)), 0) == 0.0
    assert lorenzo_predict(np.ones((2, 2, 2)), 0) == 0.0


def test_lorenzo_3d_axis_neighbor():
    d = np.zeros((2, 2, 2))
    d[0, 0, 0] = 0.3
    assert lorenzo_predict(d, 1) == pytest.approx(0.3)


def test_lorenzo_exact_on_trilinear():
    i, j, k = np.meshgrid(np.arange(4), np.arange(5), np.arange(3), indexing="ij")
    d = 0.1 * i + 0.2 * j - 0.05 * k + 0.3
    v = np.ravel_multi_index((2, 3, 1), d.shape)
    assert lorenzo_predict(d, v) == pytest.approx(d[2, 3, 1])


def test_scan_matches_reference_predictor():
    f = normalize(generate_gaussian_mixture((9, 7), seed=3))
    codes, exact, dec = quantize(f.values, *[np.full(f.dims, x) for x in (-np.inf, np.inf)], 0.01, 16)
    for v in range(f.size):
        if codes[v]:
            p = lorenzo_predict(dec, v)
            assert dec.flat[v] == p + (int(codes[v]) - 2**15) * 0.01


# -- quantizer -----------------------------------------------------------------

def test_linear_ramp_codes_are_centered():
    i, j = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    # steps are multiples of xi, so the boundary decodes exactly too
    f = ScalarField((i + j) / 32.0)
    stream, _ = encode_field(f, open_bounds(f), QuantizationConfig(1 / 32))
    codes = stream.codes.reshape(16, 16)
    assert np.all(codes[1:, 1:] == 2**15)


def test_alphabet_size_for_m16():
    cfg = QuantizationConfig(0.01)
    assert cfg.center_code == 32768 and cfg.spacing == 0.01
    f = normalize(generate_gaussian_mixture((20, 20), seed=1))
    stream, _ = encode_field(f, open_bounds(f), cfg)
    assert stream.codes.min() >= 0 and stream.codes.max() <= 65535


@pytest.mark.parametrize("xi,m", [(0.0, 16), (-1.0, 16), (float("nan"), 16), (0.1, 1), (0.1, 25)])
def test_config_validation(xi, m):
    with pytest.raises(ValueError):
        QuantizationConfig(xi, m)


def test_non_finite_rejected():
    v = np.zeros((3, 3))
    v[1, 1] = np.nan
    f = ScalarField(v)
    with pytest.raises(ValueError):
        encode_field(f, open_bounds(f), QuantizationConfig(0.1))


@pytest.mark.parametrize("seed", range(4))
def test_error_bound_and_bounds_respected(seed):
    f = normalize(generate_gaussian_mixture((32, 32), seed=seed))
    tree = simplify(build_contour_tree(f), 0.1)
    bounds = initialize_bounds(f, tree)
    xi = 0.01
    stream, decoded = encode_field(f, bounds, QuantizationConfig(xi))
    g = decode_field(stream.to_bytes()).flat
    assert np.array_equal(g, decoded.reshape(-1))
    assert np.max(np.abs(g - f.flat)) <= xi + F32_SLACK
    assert np.all(bounds.lower <= g) and np.all(g <= bounds.upper)
    pins = tree.node_vertex
    assert np.array_equal(g[pins].astype(np.float32), f.flat[pins].astype(np.float32))


def test_decode_is_deterministic():
    f = normalize(generate_gaussian_mixture((24, 16, 8), seed=2))
    stream, _ = encode_field(f, open_bounds(f), QuantizationConfig(0.005))
    raw = stream.to_bytes()
    assert decode_field(raw).values.tobytes() == decode_field(raw).values.tobytes()
    again, _ = encode_field(f, open_bounds(f), QuantizationConfig(0.005))
    assert again.to_bytes() == raw


def test_centered_codes_reproduce_predictor_fixed_point():
    codes = np.full(12, 2**15, dtype=np.int64)
    dec, used = reconstruct(codes, np.zeros(0, np.float32), (3, 4), 0.1, 16)
    assert used == 0 and np.all(dec == 0.0)


def test_single_unpredictable_vertex():
    exact = np.array([0.42], dtype=np.float32)
    dec, used = reconstruct(np.zeros(1, np.int64), exact, (1, 1), 0.1, 16)
    assert used == 1 and dec[0, 0] == np.float32(0.42)


def test_pinned_value_without_exact_candidate_is_stored():
    f = ScalarField(np.array([[0.0, 0.123456789]]).astype(np.float32).astype(np.float64))
    b = BoundsField(f.flat.copy(), f.flat.copy())
    stream, decoded = encode_field(f, b, QuantizationConfig(0.1))
    assert stream.codes.tolist()[1] == 0
    assert decoded.reshape(-1)[1] == f.flat[1]


def test_compression_beats_raw_on_smooth_fields():
    f = normalize(generate_gaussian_mixture((64, 64), seed=0))
    stream, _ = encode_field(f, open_bounds(f), QuantizationConfig(0.004))
    assert len(stream.to_bytes()) < 4 * f.size


# -- Huffman and back-end --------------------------------------------------------

def test_huffman_round_trip_1000_sequences():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        alphabet = int(rng.integers(1, 300))
        n = int(rng.integers(0, 400))
        skew = rng.dirichlet(np.full(alphabet, 0.3))
        symbols = rng.choice(alphabet, size=n, p=skew)
        lengths = code_lengths(symbols, alphabet)
        data, n_bits = encode_bits(symbols, lengths)
        table = pack_lengths(lengths)
        back, off = unpack_lengths(table, 0, alphabet)
        assert off == len(table) and np.array_equal(back, lengths)
        assert np.array_equal(decode_bits(data, n_bits, n, back), symbols)


def test_backend_round_trip_1000_buffers():
    rng = np.random.default_rng(1)
    for i in range(1000):
        n = int(rng.integers(0, 2000))
        if i % 2:
            data = rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
        else:
            data = bytes(rng.integers(0, 4, size=n, dtype=np.uint8))
        for backend in (BACKEND_STORE, BACKEND_DEFLATE):
            assert backend_decompress(backend_compress(data, backend), backend) == data


def test_canonical_codes_are_prefix_free():
    lengths = np.array([2, 1, 3, 3, 0])
    codes = canonical_codes(lengths)
    words = [format(int(codes[s]), f"0{lengths[s]}b") for s in range(4)]
    assert words == ["10", "0", "110", "111"]
    for a in words:
        for b in words:
            assert a == b or not b.startswith(a)


def test_oversubscribed_table_rejected():
    with pytest.raises(HuffmanTableError):
        canonical_codes(np.array([1, 1, 1]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 65535), max_size=300))
def test_huffman_identity_on_wide_alphabet(symbols):
    symbols = np.array(symbols, dtype=np.int64)
    lengths = code_lengths(symbols, 65536)
    data, n_bits = encode_bits(symbols, lengths)
    assert np.array_equal(decode_bits(data, n_bits, symbols.size, lengths), symbols)


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=3000))
def test_backend_identity(data):
    assert backend_decompress(backend_compress(data)) == data


# -- container -------------------------------------------------------------------

@pytest.fixture(scope="module")
def sample_stream():
    f = normalize(generate_gaussian_mixture((20, 12), seed=6))
    tree = simplify(build_contour_tree(f), 0.1)
    stream, _ = encode_field(f, initialize_bounds(f, tree), QuantizationConfig(0.01), eps=0.1)
    return stream


def test_header_layout(sample_stream):
    raw = sample_stream.to_bytes()
    assert raw[:4] == b"TSZ1"
    version, rank = struct.unpack_from("<BB", raw, 4)
    assert (version, rank) == (1, 2)
    assert struct.unpack_from("<2Q", raw, 6) == (20, 12)
    xi, eps, m = struct.unpack_from("<ddB", raw, 22)
    assert (xi, eps, m) == (0.01, 0.1, 16)
    lo, hi, backend = struct.unpack_from("<ffB", raw, 39)
    assert backend == BACKEND_DEFLATE and lo <= hi
    (n_body,) = struct.unpack_from("<Q", raw, 48)
    assert n_body == len(raw) - 56


def test_stream_byte_stable(sample_stream):
    raw = sample_stream.to_bytes()
    assert CompressedStream.from_bytes(raw).to_bytes() == raw


def test_store_backend_round_trip(sample_stream):
    s = sample_stream
    stored = CompressedStream(s.dims, s.xi, s.eps, s.m, s.orig_min, s.orig_max, s.codes, s.exact, BACKEND_STORE)
    raw = stored.to_bytes()
    assert np.array_equal(decode_field(raw).values, decode_field(s).values)


def test_bad_magic(sample_stream):
    raw = bytearray(sample_stream.to_bytes())
    raw[0:4] = b"NOPE"
    with pytest.raises(BadMagicError) as err:
        CompressedStream.from_bytes(bytes(raw))
    assert err.value.code == "bad-magic"


@pytest.mark.parametrize("cut", [3, 10, 50, -5])
def test_truncation(sample_stream, cut):
    raw = sample_stream.to_bytes()
    with pytest.raises(StreamFormatError) as err:
        CompressedStream.from_bytes(raw[:cut])
    assert err.value.code in ("truncated", "bad-magic")


def test_trailing_bytes_rejected(sample_stream):
    with pytest.raises(StreamFormatError):
        CompressedStream.from_bytes(sample_stream.to_bytes() + b"\0")


def test_unsupported_version_and_backend(sample_stream):
    raw = bytearray(sample_stream.to_bytes())
    raw[4] = 9
    with pytest.raises(UnsupportedStreamError):
        CompressedStream.from_bytes(bytes(raw))
    raw = bytearray(sample_stream.to_bytes())
    raw[47] = 7
    with pytest.raises(UnsupportedStreamError):
        CompressedStream.from_bytes(bytes(raw))


def test_corrupt_code_table(sample_stream):
    s = sample_stream
    payload = bytearray(s.payload())
    # make the first run cover one symbol too many
    (run, length) = struct.unpack_from("<IB", payload, 4)
    struct.pack_into("<IB", payload, 4, run + 1, length)
    body = bytes(payload)
    head = s.to_bytes()[:48]
    raw = head + struct.pack("<Q", len(body)) + body
    raw = raw[:47] + bytes([BACKEND_STORE]) + raw[48:]
    with pytest.raises(CodeTableError) as err:
        CompressedStream.from_bytes(raw)
    assert err.value.code == "huffman-table"


def test_missing_exact_values(sample_stream):
    s = sample_stream
    short = CompressedStream(s.dims, s.xi, s.eps, s.m, s.orig_min, s.orig_max, s.codes,
                             s.exact[:-1], BACKEND_STORE)
    if s.exact.size == 0:
        pytest.skip("sample has no unpredictable vertices")
    with pytest.raises(TruncatedStreamError):
        decode_field(short.to_bytes())
