import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from core.ellipsoid import (
    EllipsoidState,
    ellipsoid_meas_update,
    ellipsoid_time_update,
    floor_spd,
    min_vol_ellipsoid,
    trace_optimal_epsilon,
)
from core.plant import PlantModel
from utils.errors import DesyncError, ParameterError


def _random_spd(rng: np.random.Generator, m: int) -> np.ndarray:
    A = rng.normal(size=(m, m))
    return A @ A.T + 0.5 * np.eye(m)


def _sample_inside(rng: np.random.Generator, E: EllipsoidState, count: int) -> np.ndarray:
    """Uniform points of E, plus as many points on its boundary."""
    L = np.linalg.cholesky(E.P)
    z = rng.normal(size=(2 * count, E.m))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z[:count] *= rng.uniform(size=(count, 1)) ** (1.0 / E.m)
    return E.c + z @ L.T


def test_ball_shadow_and_axes():
    """Ball shadow, semi-axes and boundary membership."""
    E = EllipsoidState.ball([1.0, -2.0], 3.0)

    assert E.shadow == (-2.0, 4.0)
    assert E.semi_axes.tolist() == [3.0, 3.0]
    assert E.contains([4.0, -2.0])
    assert not E.contains([4.1, -2.0])


def test_state_rejects_mismatched_shapes():
    """P and center dimensions must agree."""
    with pytest.raises(ParameterError):
        EllipsoidState(np.eye(2), [0.0, 0.0, 0.0])


def test_scalar_case_is_exact_interval():
    """In one dimension the cut is the exact interval."""
    result = min_vol_ellipsoid([[4.0]], -0.5, 1.0)

    # Slab [-1, 2] of the interval [-2, 2]
    assert result.P[0, 0] == pytest.approx(2.25)
    assert result.offset[0] == pytest.approx(0.5)


def test_wide_slab_keeps_ellipsoid():
    """Shallow cuts on both sides keep the original ellipsoid."""
    P = np.diag([4.0, 1.0, 2.0])
    result = min_vol_ellipsoid(P, -0.8, 0.9)

    assert (result.a, result.b, result.xi) == (1.0, 1.0, 0.0)
    assert np.allclose(result.P, P)


def test_symmetric_slab_parameters():
    """Symmetric slab in three dimensions."""
    result = min_vol_ellipsoid(np.eye(3), -0.5, 0.5)

    assert result.a == pytest.approx(0.75)
    assert result.b == pytest.approx(1.125)
    assert result.xi == 0.0


@pytest.mark.parametrize("m, gamma", [(2, -0.3), (3, 0.1), (5, -0.1)])
def test_one_sided_cut_center(m: int, gamma: float):
    """Deep cut through the unit ball gives the classic center and first axis."""
    result = min_vol_ellipsoid(np.eye(m), gamma, 1.0)

    assert result.xi == pytest.approx((m * gamma + 1.0) / (m + 1.0))
    assert np.sqrt(result.a) == pytest.approx(m * (1.0 - gamma) / (m + 1.0))


def test_min_vol_rejects_bad_input():
    """Non-SPD matrices and invalid slabs are rejected."""
    with pytest.raises(ParameterError, match="positive definite"):
        min_vol_ellipsoid(np.diag([1.0, -1.0]), -0.5, 0.5)
    with pytest.raises(ParameterError, match="invalid slab"):
        min_vol_ellipsoid(np.eye(2), 0.5, 0.2)
    with pytest.raises(ParameterError, match="invalid slab"):
        min_vol_ellipsoid(np.eye(2), -0.9, 0.2)


@pytest.mark.parametrize(
    "m, gamma, delta",
    [(3, -0.2, 0.9), (3, -0.5, 0.5), (2, 0.3, 0.9), (4, -0.2, 1.0), (2, -0.1, 0.1), (6, 0.6, 0.7)],
)
def test_min_vol_covers_slab_intersection(m: int, gamma: float, delta: float):
    """Sampled points of the cut ellipsoid lie in the cover, which is no larger."""
    rng = np.random.default_rng(m)
    E = EllipsoidState(_random_spd(rng, m), np.zeros(m))
    result = min_vol_ellipsoid(E.P, gamma, delta)
    covering = EllipsoidState(result.P, result.offset)

    scale = np.sqrt(E.P[0, 0])
    points = _sample_inside(rng, E, 10_000)
    in_slab = points[(points[:, 0] >= gamma * scale) & (points[:, 0] <= delta * scale)]
    assert len(in_slab) > 0
    assert all(covering.contains(x, tol=1e-7) for x in in_slab)
    assert covering.log_det() <= E.log_det() + 1e-12


def test_measurement_update_scalar_interval():
    """Scalar measurement update clips to the slab."""
    updated = ellipsoid_meas_update(EllipsoidState([[4.0]], [1.0]), (0.0, 10.0))

    assert updated.shadow == pytest.approx((0.0, 3.0))


def test_measurement_update_reflects_lower_cut():
    """Cuts near the lower edge move the center down and still cover."""
    rng = np.random.default_rng(2)
    E = EllipsoidState(_random_spd(rng, 2), [0.5, -0.5])
    lo, hi = E.shadow
    slab = (lo, lo + 0.25 * (hi - lo))
    updated = ellipsoid_meas_update(E, slab)

    assert updated.c[0] < E.c[0]
    points = _sample_inside(rng, E, 10_000)
    kept = points[(points[:, 0] >= slab[0]) & (points[:, 0] <= slab[1])]
    assert all(updated.contains(x, tol=1e-7) for x in kept)


def test_measurement_update_handles_degenerate_slab():
    """A zero-width slab still yields an SPD cover."""
    updated = ellipsoid_meas_update(EllipsoidState.ball([0.0, 0.0], 1.0), (0.2, 0.2))

    assert np.all(np.linalg.eigvalsh(updated.P) > 0)
    assert updated.contains([0.2, 0.0], tol=1e-3)


def test_measurement_update_reports_missed_slab():
    """A slab outside the shadow raises DesyncError."""
    with pytest.raises(DesyncError):
        ellipsoid_meas_update(EllipsoidState.ball([0.0, 0.0], 1.0), (3.0, 4.0))


def test_floor_spd_repairs_singular_matrix():
    """Singular matrices get a tiny eigenvalue floor."""
    repaired = floor_spd(np.array([[1.0, 1.0], [1.0, 1.0]]))

    assert np.all(np.linalg.eigvalsh(repaired) > 0)
    assert np.allclose(repaired, [[1.0, 1.0], [1.0, 1.0]], atol=1e-9)


def test_trace_optimal_epsilon():
    """Closed-form epsilon and its floor for zero noise."""
    assert trace_optimal_epsilon(4.0 * np.eye(2), np.eye(2)) == pytest.approx(0.5)
    assert trace_optimal_epsilon(np.eye(2), np.zeros((2, 2))) == pytest.approx(1e-9)


def test_time_update_covers_noisy_image():
    """Images of interior points plus every noise corner stay inside."""
    rng = np.random.default_rng(5)
    plant = PlantModel(a=(-2.0, -0.25, 0.5), W=1.0, V=1.0)
    E = EllipsoidState(_random_spd(rng, 3), [0.3, -0.2, 1.0])
    u = np.array([0.5, 0.0, -1.0])
    updated = ellipsoid_time_update(E, plant, u)

    corners = np.array(np.meshgrid(*[[-0.5, 0.5]] * 3)).reshape(3, -1).T
    for x in _sample_inside(rng, E, 500):
        for w in corners:
            assert updated.contains(plant.F @ x + u + w, tol=1e-7)


def _slab_log_volume(m: int, a: float, b: float) -> float:
    return 0.5 * np.log(a) + 0.5 * (m - 1) * np.log(b)


@pytest.mark.parametrize("m, gamma, delta", [(3, 0.0, 0.4), (2, -0.2, 0.6), (4, 0.1, 0.5)])
def test_general_cut_is_smallest_axis_aligned_cover(m: int, gamma: float, delta: float):
    """No centred-on-axis ellipsoid on a search grid covers the cut unit ball with less volume."""
    result = min_vol_ellipsoid(np.eye(m), gamma, delta)
    xs = np.linspace(gamma, delta, 801)

    # On x^(1) = s the cut ball is a sphere of squared radius 1 - s^2
    covering = (xs - result.xi) ** 2 / result.a + (1.0 - xs**2) / result.b
    assert covering.max() == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(result.P, np.diag([result.a] + [result.b] * (m - 1)))

    best = np.inf
    for xi in np.linspace(gamma, delta, 201):
        reach = (xs - xi) ** 2
        a = reach.max() * np.geomspace(1.0005, 50.0, 400)
        b = np.max((1.0 - xs**2) / (1.0 - reach[None, :] / a[:, None]), axis=1)
        best = min(best, float(np.min(_slab_log_volume(m, a, b))))

    assert best >= _slab_log_volume(m, result.a, result.b) - 1e-4
    assert best <= _slab_log_volume(m, result.a, result.b) + 0.02


def test_time_update_epsilon_for_identity_dynamics():
    """The closed-form epsilon agrees with a numerical minimization of the trace."""
    FPF, noise = np.eye(2), 2.0 * np.eye(2)

    def trace(e: float) -> float:
        return float(np.trace((1.0 + e) * FPF + (1.0 + 1.0 / e) * noise))

    numeric = minimize_scalar(trace, bounds=(1e-3, 10.0), method="bounded", options={"xatol": 1e-9})

    assert trace_optimal_epsilon(FPF, noise) == pytest.approx(np.sqrt(2.0))
    assert numeric.x == pytest.approx(np.sqrt(2.0), abs=1e-5)


def test_time_update_reaches_minimal_trace():
    """The updated shape matrix has the smallest trace over the whole epsilon family."""
    rng = np.random.default_rng(8)
    plant = PlantModel(a=(-2.0, -0.25, 0.5), W=2.0, V=1.0)
    E = EllipsoidState(_random_spd(rng, 3), np.zeros(3))
    FPF = plant.F @ E.P @ plant.F.T
    noise = (3 * plant.W**2 / 4.0) * np.eye(3)

    numeric = minimize_scalar(
        lambda e: float(np.trace((1.0 + e) * FPF + (1.0 + 1.0 / e) * noise)),
        bounds=(1e-4, 100.0),
        method="bounded",
        options={"xatol": 1e-10},
    )

    assert np.trace(ellipsoid_time_update(E, plant).P) == pytest.approx(numeric.fun, rel=1e-8)
