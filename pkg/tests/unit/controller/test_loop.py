from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from config.sim_config import SimConfig, SweepVariant, load_sim_config
from controller.loop import (
    TrajectoryRecord,
    lqr_cost,
    run_closed_loop,
    run_code_sweep,
    run_trials,
    summarize,
)
from core.code import sample_code
from core.plant import FilterMode

EXPERIMENTS = Path(__file__).parents[3] / "experiments"


@pytest.fixture
def example1() -> SimConfig:
    """Example 1 shortened to a handful of trials."""
    return replace(load_sim_config(EXPERIMENTS / "example1.json"), trials=3, horizon=60)


def _record(x: np.ndarray, u: np.ndarray) -> TrajectoryRecord:
    T, m = x.shape
    return TrajectoryRecord(
        x=x,
        u=u,
        x_hat=np.zeros((T, m)),
        widths=np.zeros((T, m)),
        delay=np.zeros(T, dtype=np.int64),
        desync=np.zeros(T, dtype=bool),
    )


def test_noiseless_channel_keeps_state_bounded(example1: SimConfig):
    """Without erasures the state stays within the prior box plus noise."""
    cfg = replace(example1, epsilon=0.0, horizon=100)
    rec = run_closed_loop(cfg, trial_seed=11)

    # |x - xhat| <= 48 on the prior box, so |x| <= 2 * 48 + 30
    assert rec.horizon == 100
    assert not rec.diverged
    assert np.max(np.abs(rec.x)) <= 126.0 + 1e-9
    assert not np.any(rec.desync)
    assert not np.any(rec.delay)


def test_runs_are_deterministic(example1: SimConfig):
    """Same trial seed and code reproduce the trajectory exactly."""
    code = sample_code(example1.code)
    first = run_closed_loop(example1, trial_seed=5, code=code)
    again = run_closed_loop(example1, trial_seed=5, code=code)

    assert np.array_equal(first.x, again.x)
    assert np.array_equal(first.u, again.u)
    assert np.array_equal(first.delay, again.delay)
    assert np.array_equal(first.desync, again.desync)


def test_different_trial_seeds_differ(example1: SimConfig):
    """Different trial seeds give different trajectories."""
    code = sample_code(example1.code)
    first = run_closed_loop(example1, trial_seed=5, code=code)
    other = run_closed_loop(example1, trial_seed=6, code=code)

    assert not np.array_equal(first.x, other.x)


def test_erased_channel_loses_control(example1: SimConfig):
    """With every symbol erased the unstable plant runs away."""
    cfg = replace(example1, epsilon=1.0, horizon=100)
    rec = run_closed_loop(cfg, trial_seed=3)

    assert np.max(np.abs(rec.x)) > 1e3


def test_observer_knows_u_mode_runs(example1: SimConfig):
    """Feedback mode runs without desyncs and keeps positive widths."""
    cfg = replace(example1, mode=FilterMode.OBSERVER_KNOWS_U, epsilon=0.0)
    rec = run_closed_loop(cfg, trial_seed=2)

    assert not rec.diverged
    assert not np.any(rec.desync)
    assert np.all(rec.widths[1:] > 0)


def test_lqr_cost_of_zero_trajectory():
    """Zero trajectory has zero cost."""
    rec = _record(np.zeros((10, 2)), np.zeros((10, 2)))
    assert lqr_cost(rec) == 0.0


def test_lqr_cost_constant_state():
    """Unit state with zero input costs one half."""
    rec = _record(np.ones((100, 1)), np.zeros((100, 1)))
    assert lqr_cost(rec) == pytest.approx(0.5)


def test_lqr_cost_matches_direct_summation(example1: SimConfig):
    """Vectorized cost equals the plain double loop."""
    rec = run_closed_loop(example1, trial_seed=9)

    total = 0.0
    for t in range(rec.horizon):
        total += sum(v * v for v in rec.x[t]) + sum(v * v for v in rec.u[t])

    assert lqr_cost(rec) == pytest.approx(total / (2 * rec.horizon), rel=1e-12)


def test_summarize_metrics():
    """Summary metrics on two hand-built trials."""
    a = _record(np.array([[1.0], [3.0], [2.0]]), np.zeros((3, 1)))
    b = _record(np.array([[3.0], [1.0], [0.0]]), np.zeros((3, 1)))
    a.delay[:] = [0, 2, 1]
    b.desync[1] = True

    summary = summarize([a, b])

    # trial means over time are [2, 2, 1]; per-trial sups are [3, 3]
    assert summary.trials == 2
    assert summary.sup_abs == pytest.approx(2.0)
    assert summary.mean_sup_abs == pytest.approx(3.0)
    assert summary.lqr == pytest.approx(((1 + 9 + 4) / 6 + (9 + 1) / 6) / 2)
    assert summary.desync_steps == 1
    assert summary.max_delay == 2
    assert summary.metric("lqr") == summary.lqr


def test_parallel_trials_match_serial(example1: SimConfig):
    """Process pool results equal the serial run, trial by trial."""
    serial = run_trials(example1, threads=1)
    parallel = run_trials(example1, threads=2)

    assert len(serial) == len(parallel) == example1.trials
    for s, p in zip(serial, parallel):
        assert np.array_equal(s.x, p.x)


def test_with_variant_overrides_code_and_quantizer(example1: SimConfig):
    """A sweep variant sets k, bits and delta, keeping n."""
    cfg = example1.with_variant(SweepVariant(k=6, delta=2.0), code_seed=77)
    assert (cfg.code.k, cfg.code.seed, cfg.quantizer.bits, cfg.quantizer.delta) == (6, 77, 6, 2.0)
    assert cfg.code.n == example1.code.n

    kept = example1.with_variant(SweepVariant(k=4), code_seed=1)
    assert kept.quantizer.delta == example1.quantizer.delta


def test_single_code_sweep_gives_step_cdf(example1: SimConfig):
    """One code gives a CDF that steps from 0 to 1 at its metric."""
    cfg = replace(example1, trials=2, horizon=30)
    [result] = run_code_sweep(cfg, codes=1)

    assert len(result.code_seeds) == 1
    value = result.metrics[0]
    cdf = result.cdf([value - 1.0, value, value + 1.0])
    assert cdf.tolist() == [0.0, 1.0, 1.0]


def test_sweep_code_seeds_shared_across_variants(example1: SimConfig):
    """Every variant is evaluated on the same sampled codes."""
    cfg = replace(example1, trials=1, horizon=20)
    results = run_code_sweep(cfg, codes=2, variants=[SweepVariant(k=3, delta=16.0), SweepVariant(k=4, delta=8.0)])

    assert results[0].code_seeds == results[1].code_seeds
    assert len(set(results[0].code_seeds)) == 2


@pytest.mark.slow
def test_example1_stabilization_across_codes():
    """Nearly every sampled k=3 code keeps sup_t E|x_t| below 200."""
    cfg = replace(load_sim_config(EXPERIMENTS / "example1_sweep.json"), trials=100)
    [small] = run_code_sweep(cfg, codes=20, variants=[SweepVariant(k=3, delta=16.0)], threads=4)

    assert cfg.metric == "sup_abs"
    assert (small.metrics < 200).mean() >= 0.85


@pytest.mark.slow
def test_example1_larger_messages_decode_later():
    """Six message bits per step leave more steps with unresolved erasures than three."""
    cfg = replace(load_sim_config(EXPERIMENTS / "example1_sweep.json"), trials=40)

    def delayed_fraction(variant: SweepVariant) -> float:
        records = []
        for code_seed in range(1, 6):
            records += run_trials(cfg.with_variant(variant, code_seed), threads=4)
        return float(np.mean([np.mean(r.delay > 0) for r in records]))

    small = delayed_fraction(SweepVariant(k=3, delta=16.0))
    large = delayed_fraction(SweepVariant(k=6, delta=2.0))

    assert large > small


@pytest.mark.slow
@pytest.mark.parametrize("k", [3, 4, 5])
def test_example2_stays_bounded(k: int):
    """Example 2 in feedback mode stays bounded for k = 3, 4 and 5."""
    cfg = load_sim_config(EXPERIMENTS / "example2.json")
    cfg = replace(cfg.with_variant(SweepVariant(k=k), code_seed=k), trials=20)

    records = run_trials(cfg, threads=4)

    assert not any(r.diverged for r in records)
    assert np.isfinite(summarize(records).lqr)
