import numpy as np
import pytest

from core.quantizer import QuantizerConfig, bits_of, dequantize_bin, index_of, quantize, subbin, subbin_index
from utils.errors import DesyncError, ParameterError


@pytest.fixture
def q() -> QuantizerConfig:
    """Three bits, unit bins."""
    return QuantizerConfig(bits=3, delta=1.0)


@pytest.mark.parametrize("y, expected", [(0.0, 0), (2.5, 2), (8.2, 0), (-0.5, 7), (-8.0, 0)])
def test_quantize_wraps_modulo_levels(q: QuantizerConfig, y: float, expected: int):
    """Bin indices wrap modulo 2^bits, including negative values."""
    assert quantize(y, q) == expected


def test_quantizer_rejects_bad_config():
    """Zero bits or zero bin width are rejected."""
    with pytest.raises(ParameterError):
        QuantizerConfig(bits=0, delta=1.0)
    with pytest.raises(ParameterError):
        QuantizerConfig(bits=2, delta=0.0)


def test_dequantize_picks_bin_inside_interval(q: QuantizerConfig):
    """The unique matching bin inside the prediction interval is returned."""
    assert dequantize_bin(3, 10.0, 14.0, q) == (11.0, 12.0)
    assert dequantize_bin(quantize(-2.5, q), -5.0, 1.0, q) == (-3.0, -2.0)


def test_dequantize_reports_empty_bin(q: QuantizerConfig):
    """No matching bin raises a non-ambiguous DesyncError."""
    with pytest.raises(DesyncError) as info:
        dequantize_bin(5, 10.0, 11.5, q)

    assert info.value.ambiguous is False


def test_dequantize_reports_ambiguous_bin(q: QuantizerConfig):
    """Two matching bins raise an ambiguous DesyncError."""
    with pytest.raises(DesyncError) as info:
        dequantize_bin(2, 0.0, 12.0, q)

    assert info.value.ambiguous is True


@pytest.mark.parametrize("seed", range(5))
def test_dequantize_recovers_bin_of_measurement(q: QuantizerConfig, seed: int):
    """The recovered bin contains the measurement whenever the interval is narrow enough."""
    rng = np.random.default_rng(seed)
    for _ in range(200):
        lo = rng.uniform(-100, 100)
        hi = lo + rng.uniform(0, 6.9)
        y = rng.uniform(lo, hi)
        y_lo, y_hi = dequantize_bin(quantize(y, q), lo, hi, q)
        assert y_lo <= y < y_hi


def test_bits_round_trip_is_big_endian():
    """Index bits are most significant first."""
    assert bits_of(6, 3).tolist() == [1, 1, 0]
    assert index_of([1, 1, 0]) == 6
    assert all(index_of(bits_of(i, 5)) == i for i in range(32))


def test_subbins_partition_the_interval():
    """Sub-bins tile the interval; out-of-range points clamp to the ends."""
    assert subbin(0, 0.0, 8.0, 4) == (0.0, 2.0)
    assert subbin(3, 0.0, 8.0, 4) == (6.0, 8.0)
    assert subbin_index(5.0, 0.0, 8.0, 4) == 2
    assert subbin_index(9.0, 0.0, 8.0, 4) == 3
    assert subbin_index(-1.0, 0.0, 8.0, 4) == 0
    with pytest.raises(ParameterError):
        subbin(4, 0.0, 8.0, 4)
