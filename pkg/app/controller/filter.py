"""
Filter sessions: quantized measurement updates, time updates, checkpoints
and replay when the decoder revises past bin indices.

A session holds the prior set S_t for every step it has processed. Step t
turns S_t into S_{t+1} using the bin index decoded for time t and the
control input applied at time t. If a later decoding revises the index of
an earlier step, `replay_from` restarts from the stored prior of that step.
"""

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np

from core.cuboid import (
    Hypercuboid,
    cuboid_meas_update_feedback,
    cuboid_meas_update_nofeedback,
    cuboid_time_update,
    feedback_bin_index,
)
from core.ellipsoid import EllipsoidState, ellipsoid_meas_update, ellipsoid_time_update
from core.plant import FilterMode, PlantModel
from core.quantizer import QuantizerConfig, dequantize_bin, quantize, subbin, subbin_index
from utils.errors import CheckpointError, DesyncError
from utils.logger import get_logger

logger = get_logger()


class FilterKind(str, Enum):
    CUBOID = "cuboid"
    ELLIPSOID = "ellipsoid"


class SetFilter(Protocol):
    """Set arithmetic one filter kind provides to a session."""

    def center(self, state) -> np.ndarray: ...

    def widths(self, state) -> np.ndarray: ...

    def contains(self, state, x) -> bool: ...

    def measurement_interval(self, state) -> tuple[float, float]: ...

    def observer_index(self, state, y: float) -> int: ...

    def measure(self, state, index: int): ...

    def predict(self, state, u): ...


@dataclass(frozen=True)
class CuboidFilter:
    plant: PlantModel
    quantizer: QuantizerConfig
    mode: FilterMode

    def center(self, state: Hypercuboid) -> np.ndarray:
        return state.center

    def widths(self, state: Hypercuboid) -> np.ndarray:
        return state.width

    def contains(self, state: Hypercuboid, x) -> bool:
        return state.contains(x)

    def measurement_interval(self, state: Hypercuboid) -> tuple[float, float]:
        V = self.plant.V
        return state.x_min[0] - V / 2.0, state.x_max[0] + V / 2.0

    def observer_index(self, state: Hypercuboid, y: float) -> int:
        if self.mode is FilterMode.NO_FEEDBACK:
            return quantize(y, self.quantizer)
        return feedback_bin_index(state, y, self.quantizer, self.plant.V)

    def measure(self, state: Hypercuboid, index: int) -> Hypercuboid:
        if self.mode is FilterMode.NO_FEEDBACK:
            slab = dequantize_bin(index, *self.measurement_interval(state), self.quantizer)
            return cuboid_meas_update_nofeedback(state, slab, self.plant.V)
        return cuboid_meas_update_feedback(state, index, self.quantizer, self.plant.V)

    def predict(self, state: Hypercuboid, u) -> Hypercuboid:
        return cuboid_time_update(state, u, self.plant)


@dataclass(frozen=True)
class EllipsoidFilter:
    plant: PlantModel
    quantizer: QuantizerConfig
    mode: FilterMode

    def center(self, state: EllipsoidState) -> np.ndarray:
        return state.c

    def widths(self, state: EllipsoidState) -> np.ndarray:
        return 2.0 * state.semi_axes

    def contains(self, state: EllipsoidState, x) -> bool:
        return state.contains(x, tol=1e-6)

    def measurement_interval(self, state: EllipsoidState) -> tuple[float, float]:
        lo, hi = state.shadow
        return lo - self.plant.V / 2.0, hi + self.plant.V / 2.0

    def observer_index(self, state: EllipsoidState, y: float) -> int:
        if self.mode is FilterMode.NO_FEEDBACK:
            return quantize(y, self.quantizer)
        return subbin_index(y, *self.measurement_interval(state), self.quantizer.levels)

    def measure(self, state: EllipsoidState, index: int) -> EllipsoidState:
        interval = self.measurement_interval(state)
        if self.mode is FilterMode.NO_FEEDBACK:
            y_lo, y_hi = dequantize_bin(index, *interval, self.quantizer)
        else:
            y_lo, y_hi = subbin(index, *interval, self.quantizer.levels)
        V = self.plant.V
        return ellipsoid_meas_update(state, (y_lo - V / 2.0, y_hi + V / 2.0))

    def predict(self, state: EllipsoidState, u) -> EllipsoidState:
        return ellipsoid_time_update(state, self.plant, u)


def make_filter(kind: FilterKind | str, plant: PlantModel, quantizer: QuantizerConfig, mode: FilterMode | str) -> SetFilter:
    kind, mode = FilterKind(kind), FilterMode(mode)
    if kind is FilterKind.CUBOID:
        return CuboidFilter(plant, quantizer, mode)
    return EllipsoidFilter(plant, quantizer, mode)


def initial_set(kind: FilterKind | str, m: int, width: float):
    """Box of the given width around 0, or the ball circumscribing it."""
    if FilterKind(kind) is FilterKind.CUBOID:
        return Hypercuboid.centered(np.zeros(m), width)
    return EllipsoidState.ball(np.zeros(m), np.sqrt(m) * width / 2.0)


def indices_digest(indices) -> str:
    data = np.asarray(list(indices), dtype=np.int64).tobytes()
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class FilterCheckpoint:
    """Prior set of a step together with the digest of the indices before it."""

    time: int
    state: object
    indices_digest: str


@dataclass
class StepOutcome:
    posterior: object
    prior_next: object
    desync: bool


@dataclass
class FilterSession:
    """
    One estimator run. `checkpoints[t]` is the prior for step t, so the
    session always holds len(indices) + 1 checkpoints.
    """

    filt: SetFilter
    initial: object
    checkpoints: list[FilterCheckpoint] = field(default_factory=list)
    indices: list[int] = field(default_factory=list)
    controls: list[np.ndarray] = field(default_factory=list)
    desync: list[bool] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.checkpoints:
            self.checkpoints.append(FilterCheckpoint(0, self.initial, indices_digest([])))

    @property
    def time(self) -> int:
        return len(self.indices)

    @property
    def prior(self):
        """The set predicted for the current step."""
        return self.checkpoints[-1].state

    def _advance(self, state, index: int, u) -> StepOutcome:
        try:
            posterior = self.filt.measure(state, index)
            flagged = False
        except DesyncError as e:
            logger.warning(f"Desync at step {self.time}: {e}")
            posterior, flagged = state, True
        return StepOutcome(posterior, self.filt.predict(posterior, u), flagged)

    def step(self, index: int, u) -> StepOutcome:
        """Processes the measurement of the current step and the control applied in it."""
        u = np.asarray(u, dtype=float).reshape(-1)
        outcome = self._advance(self.prior, index, u)
        self.indices.append(int(index))
        self.controls.append(u)
        self.desync.append(outcome.desync)
        self.checkpoints.append(
            FilterCheckpoint(self.time, outcome.prior_next, indices_digest(self.indices))
        )
        return outcome

    def replay_from(self, from_time: int, indices) -> None:
        """
        Recomputes steps from_time..time-1 with revised indices and the
        recorded control inputs.

        Args:
            from_time: First step whose index may have changed.
            indices: Bin indices for every processed step.

        Raises:
            CheckpointError: If no checkpoint exists for from_time.
        """
        if not (0 <= from_time <= self.time):
            raise CheckpointError(f"no checkpoint for step {from_time}; session is at step {self.time}")
        revised = [int(i) for i in indices]
        if len(revised) < self.time:
            raise CheckpointError(f"need {self.time} indices to replay, got {len(revised)}")

        del self.checkpoints[from_time + 1 :]
        controls = self.controls
        self.indices = self.indices[:from_time]
        self.controls, self.desync = controls[:from_time], self.desync[:from_time]
        for t in range(from_time, len(controls)):
            self.step(revised[t], controls[t])
        logger.debug(f"Replayed steps {from_time}..{self.time - 1}")

    def sync(self, indices) -> int | None:
        """
        Replays from the first step whose stored index differs from `indices`.

        Returns:
            The step replay started from, or None when nothing changed.
        """
        revised = [int(i) for i in indices[: self.time]]
        for t, (old, new) in enumerate(zip(self.indices, revised)):
            if old != new:
                self.replay_from(t, revised)
                return t
        return None
