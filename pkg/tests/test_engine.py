import numpy as np
import pytest

from roomforge.engine import fft_convolve


def nested_loop_convolve(x, h):
    """Independent brute-force oracle: textbook double loop."""
    out = np.zeros(len(x) + len(h) - 1)
    for i in range(len(x)):
        for j in range(len(h)):
            out[i + j] += x[i] * h[j]
    return out


def test_matches_nested_loop_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        x = rng.standard_normal(int(rng.integers(1, 64)))
        h = rng.standard_normal(int(rng.integers(1, 16)))
        expected = nested_loop_convolve(x, h)
        got = fft_convolve(x, h)
        assert got.shape == expected.shape
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_overlap_add_path_matches_direct():
    # long enough to force the block-partitioned path
    rng = np.random.default_rng(1)
    x = rng.standard_normal(400_000)
    h = rng.standard_normal(3000)
    got = fft_convolve(x, h)
    expected = np.convolve(x, h)
    scale = np.max(np.abs(expected))
    np.testing.assert_allclose(got / scale, expected / scale, rtol=0, atol=1e-9)


def test_output_length():
    assert fft_convolve(np.ones(10), np.ones(4)).size == 13


def test_commutative():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(100)
    h = rng.standard_normal(31)
    np.testing.assert_allclose(fft_convolve(x, h), fft_convolve(h, x), atol=1e-12)


def test_bit_reproducible():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(100_000)
    h = rng.standard_normal(5000)
    a = fft_convolve(x, h)
    b = fft_convolve(x, h)
    assert np.array_equal(a, b)


def test_empty_rejected():
    with pytest.raises(ValueError):
        fft_convolve(np.array([]), np.ones(4))
