import math

import numpy as np
import pytest

from robustdepth.depthmap import DepthMap
from robustdepth.quantize import (
    QuantizationScheme,
    _round_half_away,
    dequantize,
    expected_bin,
    quantize,
    quantize_map,
)


def test_scheme_bin_width_definition():
    s = QuantizationScheme(alpha=0.25, beta=10.0, num_bins=80)
    expected = (math.log10(10.0) - math.log10(0.25)) / 80
    assert abs(s.bin_width - expected) <= 1e-12 * abs(expected)
    assert s.bin_width > 0


@pytest.mark.parametrize("alpha,beta,k", [(0, 1, 10), (-1, 1, 10), (1, 1, 10),
                                          (2, 1, 10), (1, 10, 0)])
def test_scheme_rejects_bad_parameters(alpha, beta, k):
    with pytest.raises(ValueError):
        QuantizationScheme(alpha=alpha, beta=beta, num_bins=k)


def test_quantize_worked_example():
    # q = (log10(100) - log10(1)) / 10 = 0.2; x=10 -> (1 - 0) / 0.2 = 5
    s = QuantizationScheme(alpha=1.0, beta=100.0, num_bins=10)
    assert quantize(10.0, s) == 5
    assert dequantize(5, s) == pytest.approx(10.0, rel=1e-12)


def test_quantize_endpoints():
    s = QuantizationScheme(alpha=0.25, beta=10.0, num_bins=80)
    assert quantize(s.alpha, s) == 0
    assert quantize(s.beta, s) == s.num_bins
    assert dequantize(0, s) == s.alpha
    assert dequantize(s.num_bins, s) == pytest.approx(s.beta, rel=1e-9)


def test_quantize_clamps_out_of_range():
    s = QuantizationScheme(alpha=1.0, beta=100.0, num_bins=10)
    assert quantize(0.01, s) == 0
    assert quantize(1e6, s) == 10


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_quantize_rejects_nonpositive_or_nonfinite(bad):
    s = QuantizationScheme(alpha=1.0, beta=100.0, num_bins=10)
    with pytest.raises(ValueError):
        quantize(bad, s)


def test_dequantize_rejects_out_of_range_bins():
    s = QuantizationScheme(alpha=1.0, beta=100.0, num_bins=10)
    with pytest.raises(ValueError):
        dequantize(-0.5, s)
    with pytest.raises(ValueError):
        dequantize(10.5, s)


def test_dequantize_accepts_fractional_bins():
    s = QuantizationScheme(alpha=1.0, beta=100.0, num_bins=10)
    assert dequantize(2.5, s) == pytest.approx(10 ** 0.5, rel=1e-12)


def test_rounding_is_half_away_from_zero():
    # np.round would give banker's rounding (2.5 -> 2); ties must go up.
    assert _round_half_away(np.array([0.5, 1.5, 2.5, 3.5])).tolist() == [1, 2, 3, 4]


def test_monotonicity_random_schemes():
    rng = np.random.default_rng(11)
    for _ in range(50):
        alpha = float(rng.uniform(0.05, 2.0))
        beta = alpha * float(rng.uniform(2.0, 200.0))
        k = int(rng.integers(1, 128))
        s = QuantizationScheme(alpha=alpha, beta=beta, num_bins=k)
        xs = np.sort(rng.uniform(alpha, beta, size=200))
        bins = [quantize(float(x), s) for x in xs]
        assert all(b1 <= b2 for b1, b2 in zip(bins, bins[1:]))


def test_round_trip_within_half_bin():
    rng = np.random.default_rng(12)
    s = QuantizationScheme(alpha=0.25, beta=10.0, num_bins=80)
    for x in rng.uniform(s.alpha, s.beta, size=500):
        back = dequantize(quantize(float(x), s), s)
        assert abs(math.log10(back) - math.log10(x)) <= s.bin_width / 2 + 1e-9


def test_endpoint_round_trip_exact():
    for s in (QuantizationScheme(0.25, 10.0, 80), QuantizationScheme(1.0, 90.0, 80)):
        assert dequantize(quantize(s.alpha, s), s) == pytest.approx(s.alpha, rel=1e-9)
        assert dequantize(quantize(s.beta, s), s) == pytest.approx(s.beta, rel=1e-9)


def test_quantize_map_matches_scalar_loop():
    rng = np.random.default_rng(13)
    s = QuantizationScheme(alpha=0.25, beta=10.0, num_bins=40)
    values = rng.uniform(0.1, 12.0, size=(16, 16)).astype(np.float32)
    valid = rng.random((16, 16)) > 0.3
    values[~valid] = 0.0
    d = DepthMap(values=values, valid=valid)
    q = quantize_map(d, s)
    for i in range(16):
        for j in range(16):
            if valid[i, j]:
                assert q.bins[i, j] == quantize(float(values[i, j]), s)
    assert np.array_equal(q.valid, valid)


def test_quantize_map_all_invalid_and_constant():
    s = QuantizationScheme(alpha=0.25, beta=10.0, num_bins=40)
    empty = DepthMap(values=np.zeros((4, 4), np.float32),
                     valid=np.zeros((4, 4), bool))
    q = quantize_map(empty, s)
    assert not q.valid.any()

    const = DepthMap(values=np.full((4, 4), s.alpha, np.float32),
                     valid=np.ones((4, 4), bool))
    q = quantize_map(const, s)
    assert (q.bins == 0).all()


def test_expected_bin_examples():
    assert expected_bin(np.eye(8)[3]) == pytest.approx(3.0)
    p = np.zeros(6)
    p[2] = 0.5
    p[4] = 0.5
    assert expected_bin(p) == pytest.approx(3.0)
    k = 10
    assert expected_bin(np.full(k + 1, 1.0 / (k + 1))) == pytest.approx(k / 2)


def test_expected_bin_range_and_linearity():
    rng = np.random.default_rng(14)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        p = rng.random(n)
        p /= p.sum()
        q = rng.random(n)
        q /= q.sum()
        ep, eq = expected_bin(p), expected_bin(q)
        assert 0.0 <= ep <= n - 1
        lam = float(rng.random())
        mix = lam * p + (1 - lam) * q
        assert expected_bin(mix) == pytest.approx(lam * ep + (1 - lam) * eq, abs=1e-9)


def test_expected_bin_rejects_bad_distributions():
    with pytest.raises(ValueError):
        expected_bin(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        expected_bin(np.array([1.2, -0.2]))


def test_scheme_serialization_round_trip():
    s = QuantizationScheme(alpha=0.25, beta=10.0, num_bins=80)
    assert QuantizationScheme.from_dict(s.to_dict()) == s
