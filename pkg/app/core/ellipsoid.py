"""
Ellipsoidal set-membership filter.

E(P, c) = {x : (x - c)^T P^{-1} (x - c) <= 1}. The measurement update covers
the intersection of E with a slab on x^(1) by the minimum volume ellipsoid;
the time update covers the Minkowski sum of F E with the noise box.
"""

import math
from dataclasses import dataclass

import numpy as np

from core.plant import PlantModel
from utils.errors import DesyncError, ParameterError

EPS_FLOOR = 1e-9
EIG_FLOOR = 1e-12
# Slabs narrower than this, in P-metric units, are widened to keep P invertible.
MIN_SLAB = 1e-9


@dataclass(frozen=True)
class EllipsoidState:
    """Shape matrix P (SPD) and center c."""

    P: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if P.shape != (c.size, c.size):
            raise ParameterError(f"P has shape {P.shape}, center has size {c.size}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "c", c)

    @classmethod
    def ball(cls, center, radius: float) -> "EllipsoidState":
        c = np.asarray(center, dtype=float).reshape(-1)
        return cls(radius**2 * np.eye(c.size), c)

    @property
    def m(self) -> int:
        return self.c.size

    @property
    def shadow(self) -> tuple[float, float]:
        """Projection of the ellipsoid onto x^(1)."""
        r = math.sqrt(self.P[0, 0])
        return self.c[0] - r, self.c[0] + r

    @property
    def semi_axes(self) -> np.ndarray:
        """Half-widths of the bounding box of the ellipsoid."""
        return np.sqrt(np.clip(np.diag(self.P), 0.0, None))

    def log_det(self) -> float:
        sign, value = np.linalg.slogdet(self.P)
        return float(value) if sign > 0 else -math.inf

    def contains(self, x, tol: float = 1e-9) -> bool:
        d = np.asarray(x, dtype=float).reshape(-1) - self.c
        return float(d @ np.linalg.solve(self.P, d)) <= 1.0 + tol


def floor_spd(P: np.ndarray) -> np.ndarray:
    """Symmetrizes P and floors its eigenvalues at 1e-12 * trace(P) / m."""
    sym = (P + P.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    floor = EIG_FLOOR * max(float(np.trace(sym)), 0.0) / sym.shape[0]
    if np.all(vals >= floor) and floor > 0:
        return sym
    vals = np.maximum(vals, max(floor, np.finfo(float).tiny))
    return (vecs * vals) @ vecs.T


@dataclass(frozen=True)
class MinVolResult:
    """Covering parameters and the assembled shape matrix."""

    a: float
    b: float
    xi: float
    P: np.ndarray
    offset: np.ndarray


def _min_vol_params(m: int, gamma: float, delta: float) -> tuple[float, float, float]:
    if m == 1:
        # Exact interval
        return ((delta - gamma) / 2.0) ** 2, 1.0, (gamma + delta) / 2.0
    if gamma * delta <= -1.0 / m:
        return 1.0, 1.0, 0.0
    if gamma + delta == 0.0:
        return m * delta**2, m * (1.0 - delta**2) / (m - 1), 0.0

    s, prod = gamma + delta, gamma * delta
    D = m**2 * (delta**2 - gamma**2) ** 2 + 4.0 * (1.0 - gamma**2) * (1.0 - delta**2)
    xi = (m * s**2 + 2.0 * (1.0 + prod) - math.sqrt(max(D, 0.0))) / (2.0 * (m + 1) * s)
    a = m * (xi - gamma) * (delta - xi)
    b = a * (1.0 - gamma**2) / (a - (xi - gamma) ** 2)
    return a, b, xi


def min_vol_ellipsoid(P, gamma: float, delta: float) -> MinVolResult:
    """
    Minimum volume ellipsoid covering E(P, 0) cut by the slab
    gamma * sqrt(P11) <= x^(1) <= delta * sqrt(P11).

    Requires |delta| >= |gamma| and -1 <= gamma <= delta <= 1.

    Args:
        P: SPD shape matrix.
        gamma: Lower slab edge in P-metric units.
        delta: Upper slab edge in P-metric units.

    Returns:
        (a, b, xi), P_hat = b P - (b - a) P h h^T P / (h^T P h) and the center
        offset xi P h / sqrt(h^T P h), with h = e_1.

    Raises:
        ParameterError: If P is not SPD or the slab arguments are invalid.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as e:
        raise ParameterError("shape matrix is not positive definite") from e
    if not (-1.0 <= gamma <= delta <= 1.0) or abs(delta) < abs(gamma):
        raise ParameterError(f"invalid slab gamma={gamma}, delta={delta}")

    m = P.shape[0]
    a, b, xi = _min_vol_params(m, gamma, delta)
    Ph = P[:, 0]
    hPh = P[0, 0]
    P_hat = b * P - (b - a) * np.outer(Ph, Ph) / hPh
    return MinVolResult(a=a, b=b, xi=xi, P=P_hat, offset=xi * Ph / math.sqrt(hPh))


def ellipsoid_meas_update(E: EllipsoidState, slab: tuple[float, float]) -> EllipsoidState:
    """
    Covers E intersected with {slab[0] <= x^(1) <= slab[1]}.

    Raises:
        DesyncError: If the slab misses the ellipsoid.
    """
    scale = math.sqrt(E.P[0, 0])
    gamma = (slab[0] - E.c[0]) / scale
    delta = (slab[1] - E.c[0]) / scale
    if gamma > 1.0 or delta < -1.0:
        raise DesyncError(f"slab [{slab[0]:.6g}, {slab[1]:.6g}] misses the ellipsoid")

    gamma, delta = max(gamma, -1.0), min(delta, 1.0)
    if delta - gamma < MIN_SLAB:
        mid = (gamma + delta) / 2.0
        gamma, delta = max(mid - MIN_SLAB, -1.0), min(mid + MIN_SLAB, 1.0)

    reflect = abs(delta) < abs(gamma)
    if reflect:
        gamma, delta = -delta, -gamma
    result = min_vol_ellipsoid(E.P, gamma, delta)
    offset = -result.offset if reflect else result.offset
    return EllipsoidState(floor_spd(result.P), E.c + offset)


def trace_optimal_epsilon(FPF: np.ndarray, noise: np.ndarray) -> float:
    """Minimizer of trace((1+e) FPF^T + (1+1/e) Q), floored at 1e-9."""
    num, den = float(np.trace(noise)), float(np.trace(FPF))
    if num <= 0.0 or den <= 0.0:
        return EPS_FLOOR
    return max(math.sqrt(num / den), EPS_FLOOR)


def ellipsoid_time_update(E: EllipsoidState, plant: PlantModel, u=None) -> EllipsoidState:
    """
    Covers {F x + B u + w : x in E, |w|_inf <= W/2}.

    P' = (1+e) F P F^T + (1+1/e) (m W^2 / 4) I, with e minimizing trace(P').
    """
    F, m = plant.F, plant.m
    FPF = F @ E.P @ F.T
    noise = (m * plant.W**2 / 4.0) * np.eye(m)
    eps = trace_optimal_epsilon(FPF, noise)
    P_next = (1.0 + eps) * FPF + (1.0 + 1.0 / eps) * noise
    c_next = F @ E.c
    if u is not None:
        c_next = c_next + plant.B @ np.asarray(u, dtype=float).reshape(-1)
    return EllipsoidState(floor_spd(P_next), c_next)
