import argparse
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from config import env
from config.sim_config import SimConfig, load_sim_config
from controller.loop import SweepResult, TrajectoryRecord, run_code_sweep, run_trials, summarize
from controller.reliability import ReliabilityCurve, estimate_reliability
from core.bounds import (
    ChannelKind,
    ChannelSpec,
    ThresholdReport,
    bhattacharyya,
    bsc_half_density_rate,
    limiting_case,
    plant_limiting,
    spectral_report,
    stabilization_cuboid,
    stabilization_ellipsoid,
    thm2_thresholds,
    thm3_bsc,
)
from core.code import CodeParams, EncoderState, encode_step, parse_code, sample_code, serialize_code, stacked_parity
from core.cuboid import steady_state_width
from core.gf2 import BitMatrix
from core.plant import FilterMode, PlantModel
from utils.artifacts import ArtifactWriter, RunManifest
from utils.errors import AnytimeError, ConfigError, ParameterError
from utils.logger import get_logger
from utils.schema import (
    CDF_SCHEMA,
    DELAY_HISTOGRAM_SCHEMA,
    METRICS_SCHEMA,
    RELIABILITY_CI_SCHEMA,
    RELIABILITY_SCHEMA,
    SWEEP_SCHEMA,
    THRESHOLD_SCHEMA,
    build_trajectory_schema,
)
from utils.seeding import derive_seed

logger = get_logger()

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: ANYTIME_SEED)")
    common.add_argument("--out-dir", default=None, help="output directory (default: ANYTIME_OUT_DIR)")
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: ANYTIME_THREADS)")

    parser = argparse.ArgumentParser(
        prog="anytime-sim",
        description="Anytime-reliable tree codes over the erasure channel and closed-loop control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bounds = sub.add_parser("bounds", parents=[common], help="print rate and exponent thresholds")
    bounds.add_argument("--a", type=_float_list, required=True, help="plant coefficients a_1,...,a_m")
    bounds.add_argument("--n", type=int, required=True, help="channel uses per measurement")
    channel = bounds.add_mutually_exclusive_group()
    channel.add_argument("--bec", type=float, default=None, help="erasure probability")
    channel.add_argument("--bsc", type=float, default=None, help="crossover probability")
    bounds.add_argument("--p", type=float, default=0.5, help="Toeplitz ensemble density")
    bounds.add_argument("--k", type=int, default=None, help="message bits per step; evaluates exponents at R = k/n")
    bounds.add_argument("--moment", type=float, default=2.0, help="moment order rho to stabilize")
    bounds.add_argument("--W", type=float, default=None, help="process noise width (steady-state check)")
    bounds.add_argument("--V", type=float, default=None, help="measurement noise width (steady-state check)")
    bounds.add_argument("--delta", type=float, default=None, help="quantizer bin width (steady-state check)")
    bounds.add_argument("--csv", default=None, help="also write the thresholds as CSV to this file")
    bounds.add_argument(
        "--limit-ns", type=_int_list, default=None, help="tabulate the thresholds for eigenvalues mu_i^N at these N"
    )

    sample = sub.add_parser("sample-code", parents=[common], help="sample a Toeplitz code and write its file")
    sample.add_argument("--n", type=int, required=True)
    sample.add_argument("--k", type=int, required=True)
    sample.add_argument("--p", type=float, default=0.5)
    sample.add_argument("--code-seed", type=int, default=None, help="default: derived from --seed")
    sample.add_argument("--depth", type=int, default=8, help="blocks summarized in the report")
    sample.add_argument("--output", default=None, help="code file (default: <out-dir>/code.txt)")

    encode = sub.add_parser("encode", parents=[common], help="encode message rows with a code file")
    encode.add_argument("--code", required=True, help="code file written by sample-code")
    encode.add_argument("--messages", required=True, help="one k-bit row per line, e.g. 101")

    simulate = sub.add_parser("simulate", parents=[common], help="run a closed-loop experiment")
    simulate.add_argument("config", help="JSON experiment file")

    reliability = sub.add_parser("reliability", parents=[common], help="estimate anytime reliability of a code")
    reliability.add_argument("--code", default=None, help="code file; otherwise sampled from --n/--k/--p")
    reliability.add_argument("--n", type=int, default=15)
    reliability.add_argument("--k", type=int, default=3)
    reliability.add_argument("--p", type=float, default=0.5)
    reliability.add_argument("--epsilon", type=float, required=True)
    reliability.add_argument("--horizon", type=int, default=60)
    reliability.add_argument("--trials", type=int, default=700)

    sweep = sub.add_parser("sweep", parents=[common], help="sweep sampled codes and emit metric CDFs")
    sweep.add_argument("config", help="JSON experiment file with a sweep section")
    sweep.add_argument("--codes", type=int, default=None, help="overrides $.sweep.codes")

    return parser


def _resolve(args: argparse.Namespace) -> tuple[int, Path, int]:
    seed = env.ANYTIME_SEED if args.seed is None else args.seed
    out_dir = Path(env.ANYTIME_OUT_DIR if args.out_dir is None else args.out_dir)
    threads = env.ANYTIME_THREADS if args.threads is None else args.threads
    if seed < 0 or threads < 1:
        raise ConfigError("$.cli", f"need seed >= 0 and threads >= 1, got seed={seed}, threads={threads}")
    return seed, out_dir, threads


def _format_report(report: ThresholdReport) -> str:
    kind = {"max": "<", "min": ">"}
    parts = [f"{report.formula:<5} R {kind[report.rate_kind]} {report.rate:.6f}"]
    if report.n is not None:
        parts.append(f"nR={report.n_rate:.4f}")
        if report.k_min is not None:
            parts.append(f"k_min={report.k_min}")
    if not math.isnan(report.exponent):
        parts.append(f"beta {kind[report.exponent_kind]} {report.exponent:.6f}")
        if report.n is not None:
            parts.append(f"n*beta={report.n_exponent:.4f}")
    if report.rate_bound is not None:
        parts.append(f"rate_bound={report.rate_bound:.6f}")
    if not report.valid:
        parts.append(f"[invalid: {report.note}]")
    return "  ".join(parts)


def _threshold_row(report: ThresholdReport, n: int) -> dict:
    return {
        "formula": report.formula,
        "rate": report.rate,
        "exponent": report.exponent,
        "n_rate": n * report.rate,
        "n_exponent": n * report.exponent,
        "rate_bound": report.rate_bound if report.rate_bound is not None else math.nan,
        "k_min": report.k_min if report.k_min is not None else -1,
    }


def cmd_bounds(args: argparse.Namespace) -> list[ThresholdReport]:
    """Prints every threshold that applies to the given plant and channel."""
    plant = PlantModel(a=tuple(args.a), W=args.W or 0.0, V=args.V or 0.0)
    n = args.n
    if n < 1:
        raise ConfigError("$.n", f"must be at least 1, got {n}")

    spectral = spectral_report(plant)
    print(f"plant a={list(plant.a)}  m={plant.m}  n={n}  moment={args.moment:g}")
    print(
        f"lambda(F)={spectral.lambda_F:.4f}  lambda(F_bar)={spectral.lambda_F_bar:.4f}  "
        f"fujiwara_K={spectral.fujiwara_K:.4f}"
    )

    reports = []
    rate = None if args.k is None else args.k / n
    if args.bec is not None or args.bsc is not None:
        ch = ChannelSpec(ChannelKind.BEC, args.bec) if args.bec is not None else ChannelSpec(ChannelKind.BSC, args.bsc)
        existence = thm2_thresholds(bhattacharyya(ch), args.p, rate)
        reports.append(existence)
        if ch.kind is ChannelKind.BSC:
            print(f"bsc p=1/2 rate limit: {bsc_half_density_rate(ch.epsilon):.6f}")
            if rate is not None:
                reports.append(thm3_bsc(ch.epsilon, rate))

    for mode in FilterMode:
        reports.append(stabilization_cuboid(plant, n, mode, rho=args.moment))
    if plant.m >= 2:
        for mode in FilterMode:
            reports.append(stabilization_ellipsoid(plant, n, mode, rho=args.moment))
    limit = plant_limiting(plant, n, rho=args.moment)
    reports.append(limit)

    for report in reports:
        mode = report.inputs.get("mode")
        print(_format_report(report) + (f"  ({mode})" if mode else ""))

    if args.limit_ns:
        mu = np.asarray(limit.inputs["mu"])
        print(f"mu={np.round(mu, 6).tolist()}")
        for row in limiting_case(mu, args.limit_ns):
            ell = ""
            if row.rate_ellipsoid is not None:
                ell = (
                    f"  R_e={row.rate_ellipsoid:.6f}  R_e^f={row.rate_ellipsoid_feedback:.6f}"
                    f"  beta_e={row.exponent_ellipsoid:.6f}"
                )
            print(f"N={row.n:<4} R={row.rate:.6f}  R^f={row.rate_feedback:.6f}  beta={row.exponent:.6f}{ell}")

    if args.delta is not None:
        steady = steady_state_width(plant, args.delta, bits=args.k)
        print(
            f"steady-state widths={np.round(steady.width, 6).tolist()}  "
            f"levels_required={steady.levels_required:.4f}  levels={steady.levels}  feasible={steady.feasible}"
        )

    if args.csv:
        seed, _, _ = _resolve(args)
        target = Path(args.csv)
        manifest = RunManifest(command="bounds", config=vars(args) | {"a": list(plant.a)}, seeds={"master": seed})
        writer = ArtifactWriter(target.parent, manifest)
        writer.write_table(target.name, pd.DataFrame([_threshold_row(r, n) for r in reports]), THRESHOLD_SCHEMA)
    return reports


def cmd_sample_code(args: argparse.Namespace) -> Path:
    seed, out_dir, _ = _resolve(args)
    code_seed = derive_seed(seed, "code") if args.code_seed is None else args.code_seed
    code = sample_code(CodeParams(n=args.n, k=args.k, p=args.p, seed=code_seed))

    depth = max(1, args.depth)
    stacked = stacked_parity(code, depth)
    later = [code.dense_block(tau) for tau in range(2, depth + 1)]
    density = float(np.mean(later)) if later else math.nan
    print(serialize_code(code), end="")
    print(
        f"rank(H^{depth})={stacked.rank()} of {stacked.shape[0]} rows  "
        f"rank(A)={BitMatrix.from_dense(code.systematic_part).rank()}  "
        f"density(H_2..H_{depth})={density:.4f}"
    )

    output = Path(args.output) if args.output else out_dir / "code.txt"
    manifest = RunManifest(command="sample-code", config=vars(args), seeds={"master": seed, "code": code_seed})
    writer = ArtifactWriter(output.parent, manifest)
    path = writer.write_text(output.name, serialize_code(code))
    writer.write_manifest()
    return path


def _read_messages(path: Path, k: int) -> list[np.ndarray]:
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if len(line) != k or set(line) - {"0", "1"}:
            raise ConfigError(f"{path}:{lineno}", f"expected {k} bits of 0/1, got '{line}'")
        rows.append(np.array([int(c) for c in line], dtype=np.uint8))
    return rows


def cmd_encode(args: argparse.Namespace) -> list[np.ndarray]:
    code = parse_code(Path(args.code).read_text(encoding="utf-8"))
    encoder = EncoderState(code)
    codewords = [encode_step(encoder, b) for b in _read_messages(Path(args.messages), code.params.k)]
    for c in codewords:
        print("".join(str(int(bit)) for bit in c))
    logger.info(f"Encoded {len(codewords)} messages with n={code.params.n} k={code.params.k}")
    return codewords


def _trajectory_frame(rec: TrajectoryRecord) -> pd.DataFrame:
    m = rec.x.shape[1]
    data = {"t": np.arange(rec.horizon)}
    for prefix, values in (("x", rec.x), ("u", rec.u), ("xhat", rec.x_hat), ("width", rec.widths)):
        for i in range(m):
            data[f"{prefix}_{i + 1}"] = values[:, i]
    data["d"] = rec.delay
    data["desync"] = rec.desync
    return pd.DataFrame(data)


def _metrics_frame(records: list[TrajectoryRecord]) -> pd.DataFrame:
    summary = summarize(records)
    return pd.DataFrame(
        {
            "trial": np.arange(len(records)),
            "sup_abs": summary.per_trial_sup,
            "lqr": summary.per_trial_lqr,
            "desync_steps": [int(r.desync.sum()) for r in records],
            "max_delay": [int(r.delay.max()) for r in records],
        }
    )


def _seeds(cfg: SimConfig) -> dict:
    return {"master": cfg.seed, "code": cfg.code.seed, "trials": [derive_seed(cfg.seed, "trial", i) for i in range(cfg.trials)]}


def cmd_simulate(args: argparse.Namespace) -> Path:
    seed, out_dir, threads = _resolve(args)
    cfg = load_sim_config(args.config, seed_override=seed if args.seed is not None else None)

    records = run_trials(cfg, threads)
    summary = summarize(records)
    print(
        f"trials={summary.trials}  sup_abs={summary.sup_abs:.4f}  mean_sup_abs={summary.mean_sup_abs:.4f}  "
        f"lqr={summary.lqr:.4f}  desync_steps={summary.desync_steps}  max_delay={summary.max_delay}"
    )

    writer = ArtifactWriter(out_dir, RunManifest(command="simulate", config=cfg.echo(), seeds=_seeds(cfg)))
    writer.write_table("trajectory.csv", _trajectory_frame(records[0]), build_trajectory_schema(cfg.plant.m))
    writer.write_table("metrics.csv", _metrics_frame(records), METRICS_SCHEMA)
    return writer.write_manifest()


def _reliability_frames(curve: ReliabilityCurve) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    with np.errstate(divide="ignore"):
        log2freq = np.log2(curve.tail_freq)
    main = pd.DataFrame({"d": curve.delays, "count": curve.counts, "freq": curve.tail_freq, "log2freq": log2freq})
    ci = pd.DataFrame({"d": curve.delays, "ci_low": curve.ci_low, "ci_high": curve.ci_high})
    histogram = pd.DataFrame({"d": np.arange(curve.delay_histogram.size), "steps": curve.delay_histogram})
    return main, ci, histogram


def cmd_reliability(args: argparse.Namespace) -> Path:
    seed, out_dir, threads = _resolve(args)
    if args.code:
        code = parse_code(Path(args.code).read_text(encoding="utf-8"))
    else:
        code = sample_code(CodeParams(n=args.n, k=args.k, p=args.p, seed=derive_seed(seed, "code")))
    if not (0.0 <= args.epsilon <= 1.0):
        raise ConfigError("$.epsilon", f"must lie in [0, 1], got {args.epsilon}")
    if args.horizon < 1 or args.trials < 1:
        raise ConfigError("$.horizon", "horizon and trials must be at least 1")

    curve = estimate_reliability(code, args.epsilon, args.horizon, args.trials, seed=seed, threads=threads)
    print(
        f"samples={curve.samples}  slope={curve.slope:.4f}  eta={curve.eta:.4g}  "
        f"beta={curve.exponent:.4f}  n*beta={curve.n * curve.exponent:.4f}  onset_delay={curve.onset_delay}"
    )

    config = {
        "code": serialize_code(code).splitlines()[1],
        "epsilon": args.epsilon,
        "horizon": args.horizon,
        "trials": args.trials,
    }
    writer = ArtifactWriter(out_dir, RunManifest(command="reliability", config=config, seeds={"master": seed, "code": code.params.seed}))
    main, ci, histogram = _reliability_frames(curve)
    writer.write_table("reliability.csv", main, RELIABILITY_SCHEMA)
    writer.write_table("reliability_ci.csv", ci, RELIABILITY_CI_SCHEMA)
    writer.write_table("delay_histogram.csv", histogram, DELAY_HISTOGRAM_SCHEMA)
    return writer.write_manifest()


def _variant_tag(result: SweepResult, cfg: SimConfig) -> str:
    delta = cfg.quantizer.delta if result.variant.delta is None else result.variant.delta
    return f"k{result.variant.k}_delta{delta:g}"


def cmd_sweep(args: argparse.Namespace) -> Path:
    seed, out_dir, threads = _resolve(args)
    cfg = load_sim_config(args.config, seed_override=seed if args.seed is not None else None)
    codes = args.codes if args.codes is not None else (cfg.sweep.codes if cfg.sweep else None)
    if codes is None or codes < 1:
        raise ConfigError("$.sweep.codes", "a positive code count is required (config or --codes)")

    variants = cfg.sweep.variants if cfg.sweep and cfg.sweep.variants else None
    results = run_code_sweep(cfg, codes, variants, threads)

    seeds = {"master": cfg.seed, "codes": results[0].code_seeds}
    writer = ArtifactWriter(out_dir, RunManifest(command="sweep", config=cfg.echo() | {"codes": codes}, seeds=seeds))
    for result in results:
        tag = _variant_tag(result, cfg)
        thresholds = (
            np.asarray(cfg.sweep.thresholds)
            if cfg.sweep and cfg.sweep.thresholds
            else np.unique(result.metrics)
        )
        writer.write_table(
            f"sweep_{tag}.csv",
            pd.DataFrame({"code_seed": np.asarray(result.code_seeds, dtype=np.uint64), "metric": result.metrics}),
            SWEEP_SCHEMA,
        )
        writer.write_table(
            f"cdf_{tag}.csv",
            pd.DataFrame({"threshold": thresholds, "fraction": result.cdf(thresholds)}),
            CDF_SCHEMA,
        )
        best = int(np.argmin(result.metrics))
        print(
            f"{tag}: median {cfg.metric}={np.median(result.metrics):.4f}  "
            f"best={result.metrics[best]:.4f} (code_seed={result.code_seeds[best]})"
        )
    return writer.write_manifest()


COMMANDS = {
    "bounds": cmd_bounds,
    "sample-code": cmd_sample_code,
    "encode": cmd_encode,
    "simulate": cmd_simulate,
    "reliability": cmd_reliability,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    """
    Entry point of the anytime-control simulator.

    Parses the subcommand, runs it and maps failures to exit codes:
    0 success, 2 usage, 3 configuration or parameters, 4 runtime.
    """
    args = build_parser().parse_args(argv)
    logger.info(f"anytime-sim {args.command} starting...")

    try:
        COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except (AnytimeError, OSError):
        logger.error(f"A fatal error occurred during '{args.command}'.", exc_info=True)
        return EXIT_RUNTIME
    except Exception:
        logger.error(f"An unexpected error occurred during '{args.command}'.", exc_info=True)
        return EXIT_RUNTIME

    logger.info(f"anytime-sim {args.command} finished successfully.")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
