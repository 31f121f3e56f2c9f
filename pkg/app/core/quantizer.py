"""Modulo lattice quantizer for scalar measurements."""

import math
from dataclasses import dataclass

import numpy as np

from utils.errors import DesyncError, ParameterError


@dataclass(frozen=True)
class QuantizerConfig:
    """Bin width `delta` and L = 2**bits levels."""

    bits: int
    delta: float

    def __post_init__(self) -> None:
        if self.bits < 1:
            raise ParameterError(f"quantizer needs at least one bit, got {self.bits}")
        if not self.delta > 0:
            raise ParameterError(f"bin width must be positive, got {self.delta}")

    @property
    def levels(self) -> int:
        return 1 << self.bits


def quantize(y: float, q: QuantizerConfig) -> int:
    """Returns floor(y / delta) mod L, with floor toward -inf."""
    return math.floor(y / q.delta) % q.levels


def dequantize_bin(index: int, lo: float, hi: float, q: QuantizerConfig) -> tuple[float, float]:
    """
    Resolves a bin index against a predicted measurement interval.

    Bins are [j*delta, (j+1)*delta) with j = index (mod L); the one meeting
    [lo, hi] is returned.

    Args:
        index: Received bin index in [0, L).
        lo: Lower end of the predicted measurement interval.
        hi: Upper end, hi >= lo.
        q: The quantizer.

    Returns:
        The slab (y_lo, y_hi).

    Raises:
        DesyncError: If no bin, or more than one, meets the interval.
    """
    if hi < lo:
        raise ParameterError(f"empty interval [{lo}, {hi}]")
    L = q.levels
    j_low = math.floor(lo / q.delta)
    # Last bin whose left edge is <= hi
    j_high = math.floor(hi / q.delta)
    j = j_low + (index - j_low) % L
    if j > j_high:
        raise DesyncError(f"bin {index} does not meet [{lo:.6g}, {hi:.6g}]")
    if j + L <= j_high:
        raise DesyncError(
            f"bin {index} is ambiguous on [{lo:.6g}, {hi:.6g}] (width {hi - lo:.6g} > {q.delta * L:.6g})",
            ambiguous=True,
        )
    return j * q.delta, (j + 1) * q.delta


def bits_of(index: int, bits: int) -> np.ndarray:
    """Big-endian binary expansion of a bin index."""
    return np.array([(index >> (bits - 1 - i)) & 1 for i in range(bits)], dtype=np.uint8)


def index_of(bits) -> int:
    """Inverse of `bits_of`."""
    value = 0
    for b in np.asarray(bits, dtype=np.uint8).reshape(-1):
        value = (value << 1) | int(b & 1)
    return value


def subbin_index(y: float, lo: float, hi: float, levels: int) -> int:
    """Index of the equal-width sub-bin of [lo, hi] holding y, clipped to [0, levels)."""
    width = hi - lo
    if width <= 0:
        return 0
    return int(np.clip(math.floor((y - lo) * levels / width), 0, levels - 1))


def subbin(index: int, lo: float, hi: float, levels: int) -> tuple[float, float]:
    """Sub-bin `index` of [lo, hi] split into `levels` equal parts."""
    if not (0 <= index < levels):
        raise ParameterError(f"bin index {index} outside [0, {levels})")
    step = (hi - lo) / levels
    return lo + index * step, lo + (index + 1) * step
