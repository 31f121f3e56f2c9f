"""
Closed-loop simulation over the erasure channel.

Per step t: the controller forms u_t from its prediction x_hat_{t|t-1}; the
observer measures y_t and sends its bin index through encoder and channel;
the decoder absorbs the channel output; the controller replays its filter
if earlier indices were revised, applies the measurement of step t and the
time update with u_t; the plant moves to x_{t+1} = F x_t + B u_t + w_t.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from config.sim_config import SimConfig, SweepVariant
from controller.decoder import DecoderState, observe_step
from controller.filter import FilterSession, initial_set, make_filter
from core.channel import ChannelConfig, transmit
from core.code import EncoderState, ToeplitzCode, encode_step, sample_code
from core.plant import FilterMode
from core.quantizer import bits_of, index_of
from utils.logger import get_logger
from utils.seeding import derive_seed

logger = get_logger()

# Trajectories beyond this magnitude are treated as diverged.
DIVERGENCE = 1e12


@dataclass
class TrajectoryRecord:
    """Per-step arrays of one closed-loop run; every array has `horizon` rows."""

    x: np.ndarray
    u: np.ndarray
    x_hat: np.ndarray
    widths: np.ndarray
    delay: np.ndarray
    desync: np.ndarray
    diverged: bool = False

    @property
    def horizon(self) -> int:
        return self.x.shape[0]


@dataclass
class MetricsSummary:
    """
    `sup_abs` is sup_t of the trial mean of |x_t|; `mean_sup_abs` is the trial
    mean of sup_t |x_t|; `lqr` is the trial mean of the LQR cost.
    """

    trials: int
    sup_abs: float
    mean_sup_abs: float
    lqr: float
    per_trial_sup: np.ndarray
    per_trial_lqr: np.ndarray
    desync_steps: int
    max_delay: int

    def metric(self, name: str) -> float:
        return float(getattr(self, name))


def _control(cfg: SimConfig, x_hat: np.ndarray) -> np.ndarray:
    kind = cfg.controller.kind
    if kind == "deadbeat":
        return -cfg.plant.F @ x_hat
    if kind == "literal":
        return -x_hat
    return cfg.controller.K @ x_hat


def _noise(cfg: SimConfig, rng: np.random.Generator, width: float, size: int) -> np.ndarray:
    if cfg.noise.kind == "uniform":
        return rng.uniform(-width / 2.0, width / 2.0, size)
    out = rng.standard_normal(size)
    bad = np.abs(out) > cfg.noise.clip
    while np.any(bad):
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > cfg.noise.clip
    return out


def run_closed_loop(cfg: SimConfig, trial_seed: int, code: ToeplitzCode | None = None) -> TrajectoryRecord:
    """
    Simulates one closed-loop trial.

    Args:
        cfg: Validated configuration.
        trial_seed: Seed of this trial; channel and noise streams derive from it.
        code: Code to use; sampled from cfg.code when omitted.

    Returns:
        The trajectory record.
    """
    code = code or sample_code(cfg.code)
    plant, q, T, m = cfg.plant, cfg.quantizer, cfg.horizon, cfg.plant.m
    channel = ChannelConfig(epsilon=cfg.epsilon, seed=derive_seed(trial_seed, "channel"))
    rng = np.random.default_rng(derive_seed(trial_seed, "noise"))

    filt = make_filter(cfg.filter, plant, q, cfg.mode)
    start = initial_set(cfg.filter, m, cfg.initial_width)
    controller = FilterSession(filt, start)
    # The observer tracks the controller's filter with the indices it actually sent.
    observer = FilterSession(filt, start) if cfg.mode is FilterMode.OBSERVER_KNOWS_U else None

    encoder, decoder = EncoderState(code), DecoderState(code)
    x = np.zeros(m)
    rec = TrajectoryRecord(
        x=np.zeros((T, m)),
        u=np.zeros((T, m)),
        x_hat=np.zeros((T, m)),
        widths=np.zeros((T, m)),
        delay=np.zeros(T, dtype=np.int64),
        desync=np.zeros(T, dtype=bool),
    )

    for t in range(T):
        x_hat = filt.center(controller.prior)
        u = _control(cfg, x_hat)
        rec.x[t], rec.u[t], rec.x_hat[t] = x, u, x_hat
        rec.widths[t] = filt.widths(controller.prior)

        y = x[0] + _noise(cfg, rng, plant.V, 1)[0]
        if observer is not None:
            index = filt.observer_index(observer.prior, y)
            observer.step(index, u)
        else:
            index = filt.observer_index(None, y)

        report = observe_step(decoder, transmit(channel, encode_step(encoder, bits_of(index, q.bits)), t + 1))
        decoded = [index_of(row) for row in decoder.message_matrix()]
        controller.sync(decoded)
        outcome = controller.step(decoded[t], u)
        rec.delay[t], rec.desync[t] = report.d, outcome.desync

        x = plant.F @ x + plant.B @ u + _noise(cfg, rng, plant.W, m)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE:
            logger.warning(f"Trajectory diverged at step {t}; remaining steps hold the last state")
            rec.x[t + 1 :] = np.where(np.isfinite(x), x, DIVERGENCE)
            rec.diverged = True
            break

    return rec


def lqr_cost(traj: TrajectoryRecord) -> float:
    """(1 / 2T) sum_{t<T} (|x_t|^2 + |u_t|^2)."""
    T = traj.horizon
    if T < 1:
        raise ValueError("trajectory is empty")
    return float((np.sum(traj.x**2) + np.sum(traj.u**2)) / (2.0 * T))


def summarize(records: list[TrajectoryRecord]) -> MetricsSummary:
    norms = np.array([np.linalg.norm(r.x, axis=1) for r in records])
    per_trial_sup = norms.max(axis=1)
    per_trial_lqr = np.array([lqr_cost(r) for r in records])
    return MetricsSummary(
        trials=len(records),
        sup_abs=float(norms.mean(axis=0).max()),
        mean_sup_abs=float(per_trial_sup.mean()),
        lqr=float(per_trial_lqr.mean()),
        per_trial_sup=per_trial_sup,
        per_trial_lqr=per_trial_lqr,
        desync_steps=int(sum(r.desync.sum() for r in records)),
        max_delay=int(max(r.delay.max() for r in records)),
    )


def _trial(cfg: SimConfig, code_params, i: int) -> TrajectoryRecord:
    return run_closed_loop(cfg, derive_seed(cfg.seed, "trial", i), sample_code(code_params))


def run_trials(cfg: SimConfig, threads: int = 1) -> list[TrajectoryRecord]:
    """Runs cfg.trials trials in trial order; trial i uses seed path ("trial", i)."""
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            n = cfg.trials
            return list(pool.map(_trial, [cfg] * n, [cfg.code] * n, range(n)))
    code = sample_code(cfg.code)
    return [run_closed_loop(cfg, derive_seed(cfg.seed, "trial", i), code) for i in range(cfg.trials)]


@dataclass
class SweepResult:
    """Per-code metrics of one sweep variant."""

    variant: SweepVariant
    code_seeds: list[int]
    metrics: np.ndarray

    def cdf(self, thresholds) -> np.ndarray:
        """Fraction of codes whose metric is at or below each threshold."""
        th = np.asarray(thresholds, dtype=float)
        return (self.metrics[None, :] <= th[:, None]).mean(axis=1)


def run_code_sweep(cfg: SimConfig, codes: int, variants=None, threads: int = 1) -> list[SweepResult]:
    """
    Samples `codes` codes per variant and runs cfg.trials trials with each.

    Code c of every variant is seeded from the path ("sweep", c, "code").
    Without variants the configured (k, delta) is swept alone.
    """
    variants = list(variants or [SweepVariant(k=cfg.code.k, delta=cfg.quantizer.delta)])
    results = []
    for variant in variants:
        seeds, metrics = [], []
        for c in range(codes):
            code_seed = derive_seed(cfg.seed, "sweep", c, "code")
            run_cfg = cfg.with_variant(variant, code_seed)
            summary = summarize(run_trials(run_cfg, threads))
            seeds.append(code_seed)
            metrics.append(summary.metric(cfg.metric))
        logger.info(
            f"Sweep variant k={variant.k} delta={variant.delta}: {codes} codes, "
            f"median {cfg.metric}={np.median(metrics):.4g}"
        )
        results.append(SweepResult(variant=variant, code_seeds=seeds, metrics=np.asarray(metrics)))
    return results
