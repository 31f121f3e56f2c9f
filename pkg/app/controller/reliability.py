"""
Monte Carlo estimation of anytime reliability.

For every decoding time t in [T/2, T] the earliest wrong message estimate
b_{tau|t} != b_tau defines the error delay d = t - tau + 1. Toeplitz codes
have shift-invariant error statistics, so all such (t, d) samples are pooled.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from controller.decoder import DecoderState, observe_step
from core.channel import ChannelConfig, transmit
from core.code import EncoderState, ToeplitzCode, encode_step
from utils.logger import get_logger
from utils.seeding import derive_seed

logger = get_logger()


@dataclass
class ReliabilityCurve:
    """
    Empirical reliability of one code.

    `counts[d-1]` is the number of samples whose earliest error sits at delay
    exactly d; `tail_freq[d-1]` is the fraction with earliest error at delay
    >= d. The fit is log2(tail_freq) ~ intercept + slope * d over populated
    delays, so eta = 2**intercept and the per-channel-use exponent is
    -slope / n. `delay_histogram[d]` counts decoder steps whose
    earliest-unresolved delay was d.
    """

    n: int
    counts: np.ndarray
    tail_freq: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    samples: int
    trials: int
    slope: float
    intercept: float
    onset_delay: int
    delay_histogram: np.ndarray

    @property
    def delays(self) -> np.ndarray:
        return np.arange(1, self.counts.size + 1)

    @property
    def eta(self) -> float:
        return float(2.0**self.intercept) if math.isfinite(self.intercept) else math.nan

    @property
    def exponent(self) -> float:
        return -self.slope / self.n if math.isfinite(self.slope) else math.nan


def _run_trial(
    code: ToeplitzCode, epsilon: float, horizon: int, seed: int, trial: int
) -> tuple[np.ndarray, int, np.ndarray]:
    """Runs one channel realization; returns (counts, samples, delay histogram)."""
    params = code.params
    channel = ChannelConfig(epsilon=epsilon, seed=derive_seed(seed, "trial", trial, "channel"))
    rng = np.random.default_rng(derive_seed(seed, "trial", trial, "messages"))

    encoder = EncoderState(code)
    decoder = DecoderState(code)
    sent = np.zeros((horizon, params.k), dtype=np.uint8)
    counts = np.zeros(horizon, dtype=np.int64)
    histogram = np.zeros(horizon + 1, dtype=np.int64)
    samples = 0
    first_pooled = max(1, horizon // 2)

    for t in range(1, horizon + 1):
        sent[t - 1] = rng.integers(0, 2, size=params.k, dtype=np.uint8)
        codeword = encode_step(encoder, sent[t - 1])
        report = observe_step(decoder, transmit(channel, codeword, t))
        histogram[report.d] += 1

        if t < first_pooled:
            continue
        samples += 1
        wrong = np.flatnonzero(np.any(decoder.message_matrix() != sent[:t], axis=1))
        if wrong.size:
            counts[t - int(wrong[0]) - 1] += 1

    return counts, samples, histogram


def _fit_tail(tail: np.ndarray) -> tuple[float, float, int]:
    delays = np.arange(1, tail.size + 1)
    populated = tail > 0
    if np.count_nonzero(populated) < 2:
        return math.nan, math.nan, 1

    slope, intercept = np.polyfit(delays[populated], np.log2(tail[populated]), 1)
    bound = 2.0 ** (intercept + slope * delays)
    violations = np.flatnonzero(populated & (tail > bound))
    onset = int(delays[violations[-1]]) + 1 if violations.size else 1
    return float(slope), float(intercept), onset


def estimate_reliability(
    code: ToeplitzCode,
    epsilon: float,
    horizon: int,
    trials: int,
    seed: int = 0,
    threads: int = 1,
) -> ReliabilityCurve:
    """
    Estimates P(earliest error at delay >= d) for a code over BEC(epsilon).

    Args:
        code: The code under test.
        epsilon: Erasure probability.
        horizon: Number of time steps T per trial.
        trials: Number of independent channel realizations.
        seed: Master seed; trial i uses the key path ("trial", i, ...).
        threads: Worker processes; counts are merged by summation.

    Returns:
        The pooled reliability curve.
    """
    if horizon < 1 or trials < 1:
        raise ValueError("horizon and trials must be >= 1")

    logger.info(
        f"Estimating reliability: n={code.params.n} k={code.params.k} "
        f"epsilon={epsilon} T={horizon} trials={trials}"
    )
    args = [(code, epsilon, horizon, seed, i) for i in range(trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_trial, *zip(*args)))
    else:
        results = [_run_trial(*a) for a in args]

    counts = np.sum([r[0] for r in results], axis=0)
    samples = int(sum(r[1] for r in results))
    histogram = np.sum([r[2] for r in results], axis=0)

    tail_counts = np.cumsum(counts[::-1])[::-1]
    tail = tail_counts / samples
    ci = [binomtest(int(c), samples).proportion_ci(confidence_level=0.95) for c in tail_counts]
    slope, intercept, onset = _fit_tail(tail)

    curve = ReliabilityCurve(
        n=code.params.n,
        counts=counts,
        tail_freq=tail,
        ci_low=np.array([c.low for c in ci]),
        ci_high=np.array([c.high for c in ci]),
        samples=samples,
        trials=trials,
        slope=slope,
        intercept=intercept,
        onset_delay=onset,
        delay_histogram=histogram,
    )
    logger.info(
        f"Reliability estimated from {samples} samples: slope={slope:.4f}, "
        f"eta={curve.eta:.4g}, onset={onset}"
    )
    return curve
