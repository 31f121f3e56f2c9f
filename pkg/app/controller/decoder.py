"""
Incremental maximum-likelihood decoder for Toeplitz codes over the BEC.

At every step the erased, not yet determined codeword bits at times >= r
(the first time that still has such a bit) are solved for from the parity
rows of times >= r. Rows of earlier times only involve resolved bits and are
dropped; the contribution of resolved bits at times < r to the surviving
rows is kept in a per-row syndrome cache. A single RREF of the window gives
every bit on which all consistent completions agree.
"""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from core.channel import ChannelSymbol
from core.code import ToeplitzCode
from core.gf2 import BitMatrix, solve_with_determination
from utils.errors import ParameterError
from utils.logger import get_logger

logger = get_logger()


class BitStatus(IntEnum):
    """Confidence of a decoded bit, weakest last."""

    KNOWN = 0
    DETERMINED = 1
    TENTATIVE = 2


@dataclass(frozen=True)
class DecodeReport:
    """
    Summary of one decoding step.

    `d` is the earliest-unresolved delay after the step (0 when everything
    received so far is resolved). `window_delay` is the number of time steps
    the elimination spanned; the window has nbar*window_delay rows and one
    column per unresolved erasure.
    """

    t: int
    d: int
    window_delay: int
    window_rows: int
    window_cols: int
    newly_determined: int


@dataclass
class DecoderState:
    """Decoder session state. Times are 1-based."""

    code: ToeplitzCode
    t: int = 0
    resolved_before: int = 1
    values: list[np.ndarray] = field(default_factory=list)
    status: list[np.ndarray] = field(default_factory=list)
    syndrome_cache: dict[int, np.ndarray] = field(default_factory=dict)

    def unresolved_count(self) -> int:
        return int(
            sum(np.count_nonzero(s == BitStatus.TENTATIVE) for s in self.status[self.resolved_before - 1 :])
        )

    def message_matrix(self) -> np.ndarray:
        """Current systematic estimates as a t x k array."""
        k = self.code.params.k
        if not self.values:
            return np.zeros((0, k), dtype=np.uint8)
        return np.vstack([v[:k] for v in self.values])


def _prefix_contribution(state: DecoderState, tau: int) -> np.ndarray:
    """Sum over resolved times s < r of H_{tau-s+1} c_s."""
    acc = np.zeros(state.code.params.nbar, dtype=np.int64)
    for s in range(1, state.resolved_before):
        acc += state.code.dense_block(tau - s + 1).astype(np.int64) @ state.values[s - 1]
    return acc & 1


def _advance_resolved(state: DecoderState) -> None:
    """Moves r past every fully resolved time and folds it into the cache."""
    while state.resolved_before <= state.t and not np.any(
        state.status[state.resolved_before - 1] == BitStatus.TENTATIVE
    ):
        r = state.resolved_before
        c_r = state.values[r - 1].astype(np.int64)
        for tau in range(r + 1, state.t + 1):
            contribution = state.code.dense_block(tau - r + 1).astype(np.int64) @ c_r
            state.syndrome_cache[tau] = (state.syndrome_cache[tau] + contribution) & 1
        del state.syndrome_cache[r]
        state.resolved_before = r + 1


def observe_step(state: DecoderState, symbols) -> DecodeReport:
    """
    Feeds the channel output of the next time step into the decoder.

    Args:
        state: The decoder state, updated in place.
        symbols: n ChannelSymbol values for time state.t + 1.

    Returns:
        The step report.

    Raises:
        ParameterError: If the symbol vector has the wrong length.
    """
    params = state.code.params
    z = np.asarray(symbols, dtype=np.uint8).reshape(-1)
    if z.size != params.n:
        raise ParameterError(f"expected {params.n} channel symbols, got {z.size}")

    erased = z == ChannelSymbol.ERASED
    state.t += 1
    state.values.append(np.where(erased, 0, z).astype(np.uint8))
    state.status.append(np.where(erased, BitStatus.TENTATIVE, BitStatus.KNOWN).astype(np.uint8))
    state.syndrome_cache[state.t] = _prefix_contribution(state, state.t)

    r, t, n = state.resolved_before, state.t, params.n
    window_delay = t - r + 1
    window_status = np.concatenate(state.status[r - 1 :])
    unknown = window_status == BitStatus.TENTATIVE
    newly_determined = 0
    rows = cols = 0

    if np.any(unknown):
        window = state.code.stacked_dense(window_delay).astype(np.int64)
        window_values = np.concatenate(state.values[r - 1 :]).astype(np.int64)
        cached = np.concatenate([state.syndrome_cache[tau] for tau in range(r, t + 1)])

        # H_e z_e = H_known z_known + cached, all over GF(2)
        known_part = window[:, ~unknown] @ window_values[~unknown]
        rhs = (known_part + cached) & 1
        system = BitMatrix.from_dense(window[:, unknown] & 1)
        rows, cols = system.shape

        solution, determined = solve_with_determination(system, rhs)

        positions = np.flatnonzero(unknown)
        for idx, pos in enumerate(positions):
            time_offset, bit = divmod(int(pos), n)
            state.values[r - 1 + time_offset][bit] = solution[idx]
            if determined[idx]:
                state.status[r - 1 + time_offset][bit] = BitStatus.DETERMINED
                newly_determined += 1

    _advance_resolved(state)
    d = state.t - state.resolved_before + 1 if state.resolved_before <= state.t else 0
    report = DecodeReport(
        t=t,
        d=d,
        window_delay=window_delay if cols else 0,
        window_rows=rows,
        window_cols=cols,
        newly_determined=newly_determined,
    )
    logger.debug(f"Decode step {report}")
    return report


def message_estimates(state: DecoderState, tau: int) -> tuple[np.ndarray, BitStatus]:
    """
    Returns the estimate of the message bits sent at time tau.

    Args:
        state: The decoder state.
        tau: A time in [1, state.t].

    Returns:
        The k message bits and the weakest status among them.

    Raises:
        IndexError: If tau is out of range.
    """
    if not (1 <= tau <= state.t):
        raise IndexError(f"time {tau} outside [1, {state.t}]")
    k = state.code.params.k
    bits = state.values[tau - 1][:k].copy()
    status = BitStatus(int(state.status[tau - 1][:k].max()))
    return bits, status
