"""Memoryless binary erasure channel with seeded, per-time erasure patterns."""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from utils.errors import ParameterError
from utils.seeding import CHANNEL_DOMAIN, counter_uniforms


class ChannelSymbol(IntEnum):
    """Tri-state channel output."""

    ZERO = 0
    ONE = 1
    ERASED = 2


@dataclass(frozen=True)
class ChannelConfig:
    """BEC(epsilon) with its own seed, independent of the code seed."""

    epsilon: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon <= 1.0):
            raise ParameterError(f"erasure probability must lie in [0, 1], got {self.epsilon}")


def apply_pattern(codeword, mask) -> np.ndarray:
    """
    Erases the flagged positions of a codeword.

    Args:
        codeword: n transmitted bits.
        mask: n flags; True means erased. An empty mask erases nothing.

    Returns:
        n channel symbols as a uint8 array of ChannelSymbol values.

    Raises:
        ParameterError: If the mask length does not match the codeword.
    """
    bits = np.asarray(codeword, dtype=np.uint8).reshape(-1)
    flags = np.asarray(mask, dtype=bool).reshape(-1)
    if flags.size == 0:
        flags = np.zeros(bits.size, dtype=bool)
    if flags.size != bits.size:
        raise ParameterError(f"mask has length {flags.size}, codeword has {bits.size}")
    return np.where(flags, np.uint8(ChannelSymbol.ERASED), bits).astype(np.uint8)


def erasure_mask(cfg: ChannelConfig, t: int, n: int) -> np.ndarray:
    """Returns the erasure flags the channel applies at time t."""
    return counter_uniforms(cfg.seed, CHANNEL_DOMAIN, t, n) < cfg.epsilon


def transmit(cfg: ChannelConfig, codeword, t: int) -> np.ndarray:
    """
    Sends one codeword through BEC(epsilon).

    Each bit is erased independently with probability epsilon; the pattern is
    a pure function of (cfg.seed, t, position). Unerased bits are never
    flipped.
    """
    bits = np.asarray(codeword, dtype=np.uint8).reshape(-1)
    return apply_pattern(bits, erasure_mask(cfg, t, bits.size))
