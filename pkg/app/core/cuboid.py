"""
Hypercuboidal set-membership filter for companion-form plants.

Boxes are propagated by exact interval arithmetic. Only the first state
coordinate is measured, so measurement updates touch coordinate 1 alone.
"""

from dataclasses import dataclass

import numpy as np

from core.plant import PlantModel
from core.quantizer import QuantizerConfig, subbin, subbin_index
from utils.errors import DesyncError, ParameterError


@dataclass(frozen=True)
class Hypercuboid:
    """Axis-aligned box [x_min, x_max]."""

    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.x_min, dtype=float).reshape(-1)
        hi = np.asarray(self.x_max, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ParameterError("hypercuboid needs x_min <= x_max componentwise")
        object.__setattr__(self, "x_min", lo)
        object.__setattr__(self, "x_max", hi)

    @classmethod
    def centered(cls, center, width) -> "Hypercuboid":
        c = np.asarray(center, dtype=float).reshape(-1)
        half = np.broadcast_to(np.asarray(width, dtype=float) / 2.0, c.shape)
        return cls(c - half, c + half)

    @property
    def width(self) -> np.ndarray:
        return self.x_max - self.x_min

    @property
    def center(self) -> np.ndarray:
        return (self.x_min + self.x_max) / 2.0

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return bool(np.all(x >= self.x_min - tol) and np.all(x <= self.x_max + tol))


def cuboid_time_update(cub: Hypercuboid, u, plant: PlantModel) -> Hypercuboid:
    """
    Image of the box under x -> F x + B u + w with |w|_inf <= W/2.

    The new widths are F_bar * width + W exactly.
    """
    F = plant.F
    F_pos, F_neg = np.maximum(F, 0.0), np.minimum(F, 0.0)
    drift = plant.B @ np.asarray(u, dtype=float).reshape(-1)
    half_w = plant.W / 2.0
    lo = F_pos @ cub.x_min + F_neg @ cub.x_max + drift - half_w
    hi = F_pos @ cub.x_max + F_neg @ cub.x_min + drift + half_w
    return Hypercuboid(lo, hi)


def _with_first(cub: Hypercuboid, lo: float, hi: float) -> Hypercuboid:
    x_min, x_max = cub.x_min.copy(), cub.x_max.copy()
    x_min[0], x_max[0] = lo, hi
    return Hypercuboid(x_min, x_max)


def cuboid_meas_update_nofeedback(cub: Hypercuboid, slab: tuple[float, float], V: float) -> Hypercuboid:
    """
    Intersects coordinate 1 with [y_lo - V/2, y_hi + V/2].

    Raises:
        DesyncError: If the intersection is empty.
    """
    lo = max(cub.x_min[0], slab[0] - V / 2.0)
    hi = min(cub.x_max[0], slab[1] + V / 2.0)
    if lo > hi:
        raise DesyncError(f"slab [{slab[0]:.6g}, {slab[1]:.6g}] misses the predicted box")
    return _with_first(cub, lo, hi)


def feedback_interval(cub: Hypercuboid, V: float) -> tuple[float, float]:
    """Predicted measurement interval shared by observer and controller."""
    return cub.x_min[0] - V / 2.0, cub.x_max[0] + V / 2.0


def feedback_bin_index(cub: Hypercuboid, y: float, q: QuantizerConfig, V: float) -> int:
    """Observer side: index of the sub-bin of the predicted interval holding y."""
    return subbin_index(y, *feedback_interval(cub, V), q.levels)


def cuboid_meas_update_feedback(cub: Hypercuboid, index: int, q: QuantizerConfig, V: float) -> Hypercuboid:
    """
    Controller side: the predicted interval of width Delta^(1) + V is split
    into L sub-bins and coordinate 1 becomes sub-bin `index` widened by V/2
    on each side, for a width of V + (Delta^(1) + V) / L.

    Raises:
        ParameterError: If the index is outside [0, L).
    """
    sub_lo, sub_hi = subbin(index, *feedback_interval(cub, V), q.levels)
    return _with_first(cub, sub_lo - V / 2.0, sub_hi + V / 2.0)


def width_map_nofeedback(plant: PlantModel, width, delta: float) -> np.ndarray:
    """One measurement + time step of the predicted widths without feedback."""
    posterior = np.asarray(width, dtype=float).copy()
    posterior[0] = delta + plant.V
    return plant.F_bar @ posterior + plant.W


def width_map_feedback(plant: PlantModel, width, bits: int) -> np.ndarray:
    """
    One measurement + time step of the predicted widths with feedback:
    F_bar (D width + V (1 + 2^-bits) e_1) + W 1, D = diag(2^-bits, 1, ..., 1).
    """
    posterior = np.asarray(width, dtype=float).copy()
    posterior[0] = plant.V + (posterior[0] + plant.V) / 2.0**bits
    return plant.F_bar @ posterior + plant.W


@dataclass(frozen=True)
class SteadyState:
    """Closed-form steady state without feedback and its rate check."""

    width: np.ndarray
    levels_required: float
    levels: int
    feasible: bool


def steady_state_width(
    plant: PlantModel, delta: float, bits: int | None = None, initial_width: float = 0.0
) -> SteadyState:
    """
    Steady-state predicted width without feedback.

    width = (delta + V) U |a| + W U 1 with U the upper triangular matrix of
    ones. The quantizer is unambiguous in steady state when
    2^bits > max(sum|a| + (V + V sum|a| + m W) / delta, initial_width / delta).

    Args:
        plant: The plant.
        delta: Quantizer bin width.
        bits: Quantizer bits; the feasibility flag is False when omitted.
        initial_width: Width of the initial box along coordinate 1.
    """
    m = plant.m
    abs_a = np.abs(plant.coeffs)
    upper = np.triu(np.ones((m, m)))
    width = (delta + plant.V) * (upper @ abs_a) + plant.W * (upper @ np.ones(m))

    total = float(abs_a.sum())
    required = max(
        total + (plant.V + plant.V * total + m * plant.W) / delta,
        initial_width / delta,
    )
    levels = 0 if bits is None else 1 << bits
    return SteadyState(width=width, levels_required=required, levels=levels, feasible=levels > required)
