"""Linear plant in observable companion form with bounded noise."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from utils.errors import ParameterError


class FilterMode(str, Enum):
    """Whether the observer sees the applied control inputs."""

    NO_FEEDBACK = "no_feedback"
    OBSERVER_KNOWS_U = "observer_knows_u"


@dataclass(frozen=True)
class PlantModel:
    """
    x_{t+1} = F x_t + B u_t + w_t,  y_t = x_t^(1) + v_t.

    F is the companion matrix of z^m + a_1 z^{m-1} + ... + a_m with -a in the
    first column and ones on the superdiagonal, so H = e_1^T. Noise satisfies
    |w|_inf <= W/2 and |v| <= V/2.
    """

    a: tuple[float, ...]
    W: float
    V: float
    B: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if len(self.a) < 1:
            raise ParameterError("plant needs at least one coefficient")
        if self.W < 0 or self.V < 0:
            raise ParameterError(f"noise widths must be nonnegative, got W={self.W}, V={self.V}")
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        B = np.eye(self.m) if self.B is None else np.atleast_2d(np.asarray(self.B, dtype=float))
        if B.shape != (self.m, self.m):
            raise ParameterError(f"B must be {self.m}x{self.m}, got {B.shape}")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def m(self) -> int:
        return len(self.a)

    @property
    def coeffs(self) -> np.ndarray:
        return np.asarray(self.a)

    @property
    def F(self) -> np.ndarray:
        return companion(-self.coeffs)

    @property
    def F_bar(self) -> np.ndarray:
        return np.abs(self.F)

    @property
    def H(self) -> np.ndarray:
        h = np.zeros(self.m)
        h[0] = 1.0
        return h


def companion(first_column) -> np.ndarray:
    """Companion matrix with the given first column and a unit superdiagonal."""
    c = np.asarray(first_column, dtype=float).reshape(-1)
    m = c.size
    F = np.zeros((m, m))
    F[:, 0] = c
    if m > 1:
        F[np.arange(m - 1), np.arange(1, m)] = 1.0
    return F
