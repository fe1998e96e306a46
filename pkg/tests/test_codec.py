"""Compact line encoding: codebook, quantization bounds, roundtrips."""

import numpy as np

from lineloc import (
    PluckerLine,
    codebook_covering_radius,
    decode_compact,
    direction_codebook,
    encode_compact,
    lift_point,
)


def angle(a, b):
    return np.arccos(np.clip(np.dot(a, b), -1.0, 1.0))


def test_codebook_shape_and_units():
    dirs = direction_codebook()
    assert dirs.shape == (256, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
    # no duplicated directions
    gram = dirs @ dirs.T
    np.fill_diagonal(gram, -1.0)
    assert gram.max() < 1.0 - 1e-6


def test_covering_radius_exhaustive_vs_sampled():
    rho = codebook_covering_radius()
    # sanity: between the ideal cap radius (~0.125 rad for 256 points) and 2x it
    assert 0.1 < rho < 0.3
    # a large random sample never exceeds the exact covering radius and gets
    # close to it from below
    rng = np.random.default_rng(101)
    g = rng.standard_normal((100_000, 3))
    g /= np.linalg.norm(g, axis=1)[:, None]
    cos_nearest = np.max(g @ direction_codebook().T, axis=1)
    sampled_max = np.arccos(np.clip(cos_nearest.min(), -1.0, 1.0))
    assert sampled_max <= rho + 1e-9
    assert sampled_max > 0.7 * rho


def test_roundtrip_exact_codebook_direction():
    dirs = direction_codebook()
    rng = np.random.default_rng(5)
    for idx in (0, 17, 255):
        X = rng.uniform(-5, 5, 3)
        L = PluckerLine.from_point_direction(X, dirs[idx])
        c = encode_compact(L)
        assert c.direction_index == idx
        back = decode_compact(c)
        assert np.allclose(back.v, L.v, atol=1e-15)
        assert np.allclose(back.w, L.w, atol=1e-9)
        assert back.distance_to(X) < 1e-9


def test_roundtrip_direction_error_within_covering_radius():
    rho = codebook_covering_radius()
    rng = np.random.default_rng(7)
    for _ in range(2000):
        L = lift_point(rng.uniform(-10, 10, 3), rng)
        back = decode_compact(encode_compact(L))
        assert angle(back.v, L.v) <= rho + 1e-12


def test_roundtrip_preserves_plane_point():
    # the decoded line intersects the codebook plane at exactly the stored
    # coordinates, and re-encoding is the identity on CompactLine
    rng = np.random.default_rng(11)
    for _ in range(500):
        L = lift_point(rng.uniform(-10, 10, 3), rng)
        c = encode_compact(L)
        back = decode_compact(c)
        c2 = encode_compact(back)
        assert c2.direction_index == c.direction_index
        assert abs(c2.plane_u - c.plane_u) < 1e-9 * (1 + abs(c.plane_u))
        assert abs(c2.plane_v - c.plane_v) < 1e-9 * (1 + abs(c.plane_v))


def test_decoded_lines_are_valid():
    rng = np.random.default_rng(13)
    for _ in range(200):
        L = lift_point(rng.uniform(-10, 10, 3), rng)
        back = decode_compact(encode_compact(L))
        assert abs(np.linalg.norm(back.v) - 1.0) < 1e-12
        assert abs(back.v @ back.w) < 1e-10 * max(1.0, np.linalg.norm(back.w))


def test_quantized_line_stays_close_to_source_point():
    # decoded line passes near the lifted point: within |X| * covering angle
    rho = codebook_covering_radius()
    rng = np.random.default_rng(17)
    for _ in range(500):
        X = rng.uniform(-10, 10, 3)
        L = lift_point(X, rng)
        back = decode_compact(encode_compact(L))
        bound = np.linalg.norm(X) * np.tan(rho) + 1e-9
        assert back.distance_to(X) <= 2.0 * bound
