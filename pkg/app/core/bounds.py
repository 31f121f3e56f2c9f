"""
Closed-form rate and exponent thresholds.

Code existence: rates and exponents for which anytime reliable causal
linear codes exist over a channel with Bhattacharyya parameter zeta.
Stabilization: the rates and exponents a code must offer for the
hypercuboidal and ellipsoidal filters to keep a companion-form plant stable.
All exponents are per channel use, so P(error at delay d) <= eta 2^{-n beta d}.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import bisect

from core.plant import FilterMode, PlantModel
from core.spectral import fujiwara, polynomial_roots, positive_root, spectral_radius
from utils.errors import ParameterError
from utils.logger import get_logger

logger = get_logger()

RATE_TOL = 1e-9


class ChannelKind(str, Enum):
    BEC = "bec"
    BSC = "bsc"


@dataclass(frozen=True)
class ChannelSpec:
    kind: ChannelKind
    epsilon: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if not (0.0 <= self.epsilon <= 1.0):
            raise ParameterError(f"channel parameter must lie in [0, 1], got {self.epsilon}")

    @property
    def canonical_epsilon(self) -> float:
        """min(eps, 1 - eps) for the BSC; eps for the BEC."""
        if self.kind is ChannelKind.BSC:
            return min(self.epsilon, 1.0 - self.epsilon)
        return self.epsilon


@dataclass(frozen=True)
class ThresholdReport:
    """
    One threshold evaluation.

    `rate` is an upper limit (R_max) for code-existence formulas and a lower
    limit (R_min) for stabilization formulas; `rate_kind` says which. The
    same holds for `exponent`.
    """

    formula: str
    rate: float
    exponent: float
    rate_kind: str
    exponent_kind: str
    inputs: dict = field(default_factory=dict)
    rate_bound: float | None = None
    valid: bool = True
    note: str = ""

    @property
    def n(self) -> int | None:
        return self.inputs.get("n")

    @property
    def n_rate(self) -> float | None:
        return None if self.n is None else self.n * self.rate

    @property
    def n_exponent(self) -> float | None:
        return None if self.n is None else self.n * self.exponent

    @property
    def k_min(self) -> int | None:
        """Smallest message size k = nR meeting a rate lower limit."""
        if self.rate_kind != "min" or self.n is None:
            return None
        return max(1, math.ceil(self.n * self.rate - RATE_TOL))


@dataclass(frozen=True)
class SpectralReport:
    """lambda(F), lambda(F_bar) and Fujiwara's K of the characteristic polynomial."""

    coefficients: tuple[float, ...]
    lambda_F: float
    lambda_F_bar: float
    fujiwara_K: float


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def entropy_inv(y: float) -> float:
    """Smaller root x in [0, 1/2] of H(x) = y."""
    if not (0.0 <= y <= 1.0):
        raise ParameterError(f"entropy value must lie in [0, 1], got {y}")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    return float(bisect(lambda x: binary_entropy(x) - y, 0.0, 0.5, xtol=1e-15, maxiter=200))


def kl_bits(p: float, q: float) -> float:
    """Bernoulli relative entropy D(p || q) in bits."""
    total = 0.0
    for a, b in ((p, q), (1.0 - p, 1.0 - q)):
        if a > 0.0:
            total += a * math.log2(a / b) if b > 0.0 else math.inf
    return total


def bhattacharyya(ch: ChannelSpec) -> float:
    """zeta = eps for BEC(eps), 2 sqrt(eps (1 - eps)) for BSC(eps)."""
    if ch.kind is ChannelKind.BEC:
        return ch.epsilon
    return 2.0 * math.sqrt(ch.epsilon * (1.0 - ch.epsilon))


def thm2_thresholds(zeta: float, p: float, R: float | None = None) -> ThresholdReport:
    """
    Rate and exponent limits for the Toeplitz ensemble with density p:

        R < 1 - log2(1 + zeta) / log2(1 / (1 - p))
        beta < H^-1(1 - R) (log2(1 / zeta) + log2((1 - p)^-(1 - R) - 1))

    With p = 1/2 these are the finite-horizon limits for general causal
    linear codes. The exponent is only evaluated when R is given; R at or
    above R_max flags the report invalid.
    """
    if not (0.0 < p < 1.0) or not (0.0 <= zeta <= 1.0):
        raise ParameterError(f"need 0 < p < 1 and 0 <= zeta <= 1, got p={p}, zeta={zeta}")
    r_max = 1.0 - math.log2(1.0 + zeta) / math.log2(1.0 / (1.0 - p))
    formula = "thm1" if p == 0.5 else "thm2"
    inputs = {"zeta": zeta, "p": p, "R": R}
    if R is None:
        return ThresholdReport(formula, r_max, math.nan, "max", "max", inputs)

    if not (0.0 < R < r_max):
        return ThresholdReport(
            formula, r_max, 0.0, "max", "max", inputs, valid=False,
            note=f"R={R:.6g} outside (0, R_max={r_max:.6g}); no positive exponent",
        )
    gap = (1.0 - p) ** (-(1.0 - R)) - 1.0
    channel_term = math.inf if zeta == 0.0 else math.log2(1.0 / zeta)
    beta = entropy_inv(1.0 - R) * (channel_term + math.log2(gap))
    return ThresholdReport(formula, r_max, beta, "max", "max", inputs)


def bsc_half_density_rate(epsilon: float) -> float:
    """R < 1 - 2 log2(sqrt(eps) + sqrt(1 - eps)): the p = 1/2 BSC rate limit."""
    return 1.0 - 2.0 * math.log2(math.sqrt(epsilon) + math.sqrt(1.0 - epsilon))


def thm3_bsc(epsilon: float, R: float) -> ThresholdReport:
    """
    Tighter BSC(eps) limits for p = 1/2: R < 1 - H(eps) and
    beta < D(H^-1(1 - R) || min(eps, 1 - eps)).
    """
    ch = ChannelSpec(ChannelKind.BSC, epsilon)
    r_max = 1.0 - binary_entropy(ch.canonical_epsilon)
    inputs = {"epsilon": epsilon, "R": R}
    if not (0.0 < R < r_max):
        return ThresholdReport(
            "thm3", r_max, 0.0, "max", "max", inputs, valid=False,
            note=f"R={R:.6g} outside (0, 1 - H(eps)={r_max:.6g})",
        )
    beta = kl_bits(entropy_inv(1.0 - R), ch.canonical_epsilon)
    return ThresholdReport("thm3", r_max, beta, "max", "max", inputs)


def spectral_report(plant: PlantModel) -> SpectralReport:
    a = plant.coeffs
    return SpectralReport(
        coefficients=tuple(a),
        lambda_F=spectral_radius(-a),
        lambda_F_bar=spectral_radius(np.abs(a), nonnegative=True),
        fujiwara_K=fujiwara(a),
    )


def _exponent(rho: float, n: int, radius: float) -> float:
    return max(0.0, (rho / n) * math.log2(radius)) if radius > 0 else 0.0


def _bisect_rate(scaled_coeffs, n: int) -> float:
    """Smallest r in [0, 64/n] with Perron root of 2^{-nr} * scaled_coeffs below 1."""
    base = np.asarray(scaled_coeffs, dtype=float)

    def excess(r: float) -> float:
        return positive_root(base * 2.0 ** (-n * r)) - 1.0

    hi = 64.0 / n
    if excess(0.0) < 0.0:
        return 0.0
    if excess(hi) >= 0.0:
        return hi
    return float(bisect(excess, 0.0, hi, xtol=1e-10, maxiter=200))


def _log_rate(value: float, n: int) -> float:
    return max(0.0, math.log2(value) / n) if value > 0 else 0.0


def stabilization_cuboid(plant: PlantModel, n: int, mode: FilterMode | str, rho: float = 2.0) -> ThresholdReport:
    """
    Hypercuboidal filter thresholds.

    Without feedback R_n = (1/n) log2 sum|a_i|. When the observer knows u,
    R^f_n is the smallest r with lambda(F_bar diag(2^{-nr}, 1, ..., 1)) < 1,
    bounded by (1/n) log2 max{|a_m| 2^{m-1}, max_{i<m} |a_i| 2^i}. Both
    modes need beta > (rho/n) log2 lambda(F_bar).
    """
    mode = FilterMode(mode)
    abs_a = np.abs(plant.coeffs)
    m = plant.m
    beta = _exponent(rho, n, spectral_radius(abs_a, nonnegative=True))
    inputs = {"n": n, "a": list(plant.a), "mode": mode.value, "rho": rho}

    if mode is FilterMode.NO_FEEDBACK:
        return ThresholdReport("thm4", _log_rate(float(abs_a.sum()), n), beta, "min", "min", inputs)

    # F_bar D scales only the first column, so the Perron problem stays companion.
    rate = _bisect_rate(abs_a, n)
    candidates = [abs_a[m - 1] * 2.0 ** (m - 1)] + [abs_a[i] * 2.0 ** (i + 1) for i in range(m - 1)]
    return ThresholdReport(
        "thm5", rate, beta, "min", "min", inputs, rate_bound=_log_rate(max(candidates), n)
    )


def stabilization_ellipsoid(plant: PlantModel, n: int, mode: FilterMode | str, rho: float = 2.0) -> ThresholdReport:
    """
    Ellipsoidal filter thresholds for m >= 2, with theta = m / (m - 1).

    Without feedback R_{e,n} = (1/n) log2[(sqrt(m)/2) sum |a_i| theta^{i-1}].
    With feedback R^f_{e,n} bisects lambda(F_bar diag(sqrt(m) 2^{-nr},
    sqrt(theta), ..., sqrt(theta))) < 1. Both need
    beta > (rho/n) log2 lambda(F).

    Raises:
        ParameterError: For m < 2, where lambda(F_bar) = lambda(F) and the
            hypercuboidal thresholds apply.
    """
    mode = FilterMode(mode)
    m = plant.m
    if m < 2:
        raise ParameterError("ellipsoidal thresholds need m >= 2; use the cuboid thresholds for m = 1")
    theta = m / (m - 1)
    abs_a = np.abs(plant.coeffs)
    beta = _exponent(rho, n, spectral_radius(-plant.coeffs))
    inputs = {"n": n, "a": list(plant.a), "mode": mode.value, "rho": rho}
    idx = np.arange(m)

    if mode is FilterMode.NO_FEEDBACK:
        value = math.sqrt(m) / 2.0 * float(np.sum(abs_a * theta**idx))
        return ThresholdReport("thm6", _log_rate(value, n), beta, "min", "min", inputs)

    # Characteristic polynomial of F_bar D: coefficients |a_i| sqrt(m) 2^{-nr} theta^{(i-1)/2}
    rate = _bisect_rate(abs_a * math.sqrt(m) * theta ** (idx / 2.0), n)
    candidates = [abs_a[m - 1] * (2.0 * theta) ** (m - 1)] + [
        2.0 * abs_a[i] * (2.0 * theta) ** i for i in range(m - 1)
    ]
    bound = 0.5 * math.log2(m) / n + math.log2(max(candidates)) / n if max(candidates) > 0 else 0.0
    return ThresholdReport("thm7", rate, beta, "min", "min", inputs, rate_bound=max(bound, 0.0))


def limiting_values(mu) -> tuple[float, float]:
    """R* = sum_{|mu_i| > 1} log2 |mu_i| and beta* = 2 log2 max |mu_i|."""
    mags = np.abs(np.asarray(mu, dtype=complex).reshape(-1))
    r_star = float(np.sum(np.log2(mags[mags > 1.0])))
    beta_star = 2.0 * math.log2(float(mags.max())) if mags.size and mags.max() > 0 else -math.inf
    return r_star, beta_star


def plant_limiting(plant: PlantModel, n: int, rho: float = 2.0) -> ThresholdReport:
    """
    Limiting thresholds of a plant sampled once every n channel uses.

    Takes mu_i = |lambda_i(F)|^{1/n}; the stabilization thresholds tend to
    R* = sum_{mu_i > 1} log2 mu_i and (rho / 2) beta* as n grows.
    """
    mu = np.abs(polynomial_roots(np.concatenate([[1.0], plant.coeffs]))) ** (1.0 / n)
    r_star, beta_star = limiting_values(mu)
    inputs = {"n": n, "a": list(plant.a), "rho": rho, "mu": mu.tolist()}
    return ThresholdReport("limit", r_star, max(0.0, rho / 2.0 * beta_star), "min", "min", inputs)


@dataclass(frozen=True)
class LimitingRow:
    n: int
    rate: float
    rate_feedback: float
    rate_feedback_bound: float
    exponent: float
    rate_ellipsoid: float | None
    rate_ellipsoid_feedback: float | None
    exponent_ellipsoid: float | None


def limiting_case(mu, ns) -> list[LimitingRow]:
    """
    Evaluates the thresholds for the plants with eigenvalues mu_i^n.

    As n grows the per-channel-use rates approach R* and the exponents
    beta*; `limiting_values` gives the targets.
    """
    mu = np.asarray(mu, dtype=complex).reshape(-1)
    rows = []
    for n in ns:
        coeffs = np.real_if_close(np.poly(mu**n), tol=1e6)
        plant = PlantModel(a=tuple(np.real(coeffs[1:])), W=0.0, V=0.0)
        cub = stabilization_cuboid(plant, n, FilterMode.NO_FEEDBACK)
        cub_f = stabilization_cuboid(plant, n, FilterMode.OBSERVER_KNOWS_U)
        ell = ell_f = None
        if plant.m >= 2:
            ell = stabilization_ellipsoid(plant, n, FilterMode.NO_FEEDBACK)
            ell_f = stabilization_ellipsoid(plant, n, FilterMode.OBSERVER_KNOWS_U)
        rows.append(
            LimitingRow(
                n=n,
                rate=cub.rate,
                rate_feedback=cub_f.rate,
                rate_feedback_bound=cub_f.rate_bound or 0.0,
                exponent=cub.exponent,
                rate_ellipsoid=ell.rate if ell else None,
                rate_ellipsoid_feedback=ell_f.rate if ell_f else None,
                exponent_ellipsoid=ell.exponent if ell else None,
            )
        )
        logger.debug(f"Limiting case n={n}: {rows[-1]}")
    return rows
