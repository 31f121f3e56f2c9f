import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from core.code import CodeParams
from core.plant import FilterMode, PlantModel
from core.quantizer import QuantizerConfig
from controller.filter import FilterKind
from utils.errors import ConfigError, ParameterError
from utils.logger import get_logger
from utils.seeding import derive_seed

logger = get_logger()

CONTROLLER_KINDS = ("deadbeat", "literal", "gain")
NOISE_KINDS = ("uniform", "truncated_gaussian")
METRICS = ("sup_abs", "mean_sup_abs", "lqr")


@dataclass(frozen=True)
class ControllerConfig:
    """deadbeat: u = -F xhat; literal: u = -xhat; gain: u = K xhat."""

    kind: str = "deadbeat"
    K: np.ndarray | None = field(default=None, compare=False)


@dataclass(frozen=True)
class NoiseConfig:
    """uniform on the noise boxes, or standard normals truncated to [-clip, clip]."""

    kind: str = "uniform"
    clip: float = 2.5


@dataclass(frozen=True)
class SweepVariant:
    k: int
    delta: float | None = None


@dataclass(frozen=True)
class SweepConfig:
    codes: int
    variants: tuple[SweepVariant, ...] = ()
    thresholds: tuple[float, ...] = ()


@dataclass(frozen=True)
class SimConfig:
    """A closed-loop experiment. Message bits carry exactly the bin index."""

    plant: PlantModel
    code: CodeParams
    epsilon: float
    quantizer: QuantizerConfig
    mode: FilterMode
    filter: FilterKind
    horizon: int
    controller: ControllerConfig
    noise: NoiseConfig
    initial_width: float
    seed: int
    trials: int
    metric: str = "sup_abs"
    sweep: SweepConfig | None = None
    raw: dict = field(default_factory=dict, compare=False)

    def with_variant(self, variant: SweepVariant, code_seed: int) -> "SimConfig":
        """Same experiment with k (and optionally delta) overridden and a new code seed."""
        code = replace(self.code, k=variant.k, seed=code_seed)
        quantizer = QuantizerConfig(
            bits=variant.k, delta=self.quantizer.delta if variant.delta is None else variant.delta
        )
        return replace(self, code=code, quantizer=quantizer)

    def echo(self) -> dict:
        """The resolved configuration as plain JSON types."""
        resolved = dict(self.raw)
        resolved["code"] = asdict(self.code)
        resolved["seed"] = self.seed
        return resolved


def _get(data: dict, key: str, path: str, kind: type | tuple, default: Any = ...) -> Any:
    if key not in data:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "required field is missing")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigError(f"{path}.{key}", f"expected {kind}, got {type(value).__name__}")
    return value


def _section(data: dict, key: str, required: bool = True) -> dict:
    value = _get(data, key, "$", dict, ... if required else {})
    return value


def _positive(value: float, path: str, strict: bool = True) -> float:
    if value < 0 or (strict and value == 0):
        raise ConfigError(path, f"must be {'positive' if strict else 'nonnegative'}, got {value}")
    return value


def _choice(value: str, choices, path: str) -> str:
    if value not in choices:
        raise ConfigError(path, f"must be one of {', '.join(map(str, choices))}, got '{value}'")
    return value


def parse_sim_config(data: dict, seed_override: int | None = None) -> SimConfig:
    """
    Validates a SimConfig document.

    Args:
        data: Parsed JSON.
        seed_override: Master seed from the CLI; takes precedence over $.seed.

    Returns:
        The validated configuration.

    Raises:
        ConfigError: On the first schema violation, with its JSON path.
    """
    if not isinstance(data, dict):
        raise ConfigError("$", "configuration must be a JSON object")

    seed = seed_override if seed_override is not None else _get(data, "seed", "$", int, 0)
    _positive(seed, "$.seed", strict=False)

    plant_d = _section(data, "plant")
    a = _get(plant_d, "a", "$.plant", list)
    if not a or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in a):
        raise ConfigError("$.plant.a", "must be a non-empty list of numbers")
    W = _positive(float(_get(plant_d, "W", "$.plant", (int, float))), "$.plant.W", strict=False)
    V = _positive(float(_get(plant_d, "V", "$.plant", (int, float))), "$.plant.V", strict=False)
    B = _get(plant_d, "B", "$.plant", list, None)
    try:
        plant = PlantModel(a=tuple(a), W=W, V=V, B=None if B is None else np.asarray(B, dtype=float))
    except (ParameterError, ValueError) as e:
        raise ConfigError("$.plant", str(e)) from e

    code_d = _section(data, "code")
    n = _get(code_d, "n", "$.code", int)
    k = _get(code_d, "k", "$.code", int)
    p = float(_get(code_d, "p", "$.code", (int, float), 0.5))
    code_seed = _get(code_d, "seed", "$.code", int, derive_seed(seed, "code"))
    try:
        code = CodeParams(n=n, k=k, p=p, seed=code_seed)
    except ParameterError as e:
        raise ConfigError("$.code", str(e)) from e

    epsilon = float(_get(_section(data, "channel"), "epsilon", "$.channel", (int, float)))
    if not (0.0 <= epsilon <= 1.0):
        raise ConfigError("$.channel.epsilon", f"must lie in [0, 1], got {epsilon}")

    quant_d = _section(data, "quantizer")
    bits = _get(quant_d, "bits", "$.quantizer", int)
    if bits != k:
        raise ConfigError("$.quantizer.bits", f"must equal code k={k}, got {bits}")
    delta = float(_get(quant_d, "delta", "$.quantizer", (int, float), 1.0))
    quantizer = QuantizerConfig(bits=bits, delta=_positive(delta, "$.quantizer.delta"))

    mode = FilterMode(_choice(_get(data, "mode", "$", str), [x.value for x in FilterMode], "$.mode"))
    kind = FilterKind(
        _choice(_get(data, "filter", "$", str, "cuboid"), [x.value for x in FilterKind], "$.filter")
    )

    horizon = _get(data, "horizon", "$", int)
    if horizon < 1:
        raise ConfigError("$.horizon", f"must be at least 1, got {horizon}")

    ctrl_d = _section(data, "controller", required=False)
    ctrl_kind = _choice(_get(ctrl_d, "kind", "$.controller", str, "deadbeat"), CONTROLLER_KINDS, "$.controller.kind")
    K = None
    if ctrl_kind == "gain":
        K = np.atleast_2d(np.asarray(_get(ctrl_d, "K", "$.controller", list), dtype=float))
        if K.shape != (plant.m, plant.m):
            raise ConfigError("$.controller.K", f"must be {plant.m}x{plant.m}, got {K.shape}")

    noise_d = _section(data, "noise", required=False)
    noise = NoiseConfig(
        kind=_choice(_get(noise_d, "kind", "$.noise", str, "uniform"), NOISE_KINDS, "$.noise.kind"),
        clip=_positive(float(_get(noise_d, "clip", "$.noise", (int, float), 2.5)), "$.noise.clip"),
    )
    # Filters assume |w| <= W/2 and |v| <= V/2
    if noise.kind == "truncated_gaussian" and noise.clip > min(W, V) / 2.0:
        raise ConfigError("$.noise.clip", f"must not exceed min(W, V)/2 = {min(W, V) / 2.0}, got {noise.clip}")

    initial_width = float(_get(_section(data, "initial", required=False), "width", "$.initial", (int, float), 1.0))
    trials = _get(data, "trials", "$", int, 1)
    if trials < 1:
        raise ConfigError("$.trials", f"must be at least 1, got {trials}")
    metric = _choice(_get(data, "metric", "$", str, "sup_abs"), METRICS, "$.metric")

    sweep = None
    if "sweep" in data:
        sweep_d = _get(data, "sweep", "$", dict)
        codes = _get(sweep_d, "codes", "$.sweep", int)
        if codes < 1:
            raise ConfigError("$.sweep.codes", f"must be at least 1, got {codes}")
        variants = []
        for i, v in enumerate(_get(sweep_d, "variants", "$.sweep", list, [])):
            vpath = f"$.sweep.variants[{i}]"
            if not isinstance(v, dict):
                raise ConfigError(vpath, "must be an object")
            vk = _get(v, "k", vpath, int)
            if not (1 <= vk < n):
                raise ConfigError(f"{vpath}.k", f"must lie in [1, {n}), got {vk}")
            vdelta = _get(v, "delta", vpath, (int, float), None)
            if vdelta is not None:
                _positive(float(vdelta), f"{vpath}.delta")
            variants.append(SweepVariant(k=vk, delta=None if vdelta is None else float(vdelta)))
        thresholds = _get(sweep_d, "thresholds", "$.sweep", list, [])
        sweep = SweepConfig(codes=codes, variants=tuple(variants), thresholds=tuple(float(x) for x in thresholds))

    cfg = SimConfig(
        plant=plant,
        code=code,
        epsilon=epsilon,
        quantizer=quantizer,
        mode=mode,
        filter=kind,
        horizon=horizon,
        controller=ControllerConfig(kind=ctrl_kind, K=K),
        noise=noise,
        initial_width=_positive(initial_width, "$.initial.width"),
        seed=seed,
        trials=trials,
        metric=metric,
        sweep=sweep,
        raw=data,
    )
    logger.info(
        f"Config loaded: m={plant.m} n={n} k={k} epsilon={epsilon} mode={mode.value} "
        f"filter={kind.value} T={horizon} trials={trials}"
    )
    return cfg


def load_sim_config(path: str | Path, seed_override: int | None = None) -> SimConfig:
    """Reads and validates a JSON SimConfig file."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"invalid JSON: {e}") from e
    return parse_sim_config(data, seed_override)
