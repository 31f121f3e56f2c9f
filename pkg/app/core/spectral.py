"""
Spectral radii of companion matrices and Fujiwara's root bound.

A companion matrix with first column c and a unit superdiagonal has the
characteristic polynomial x^m - c_1 x^{m-1} - ... - c_m. For c >= 0 the
spectral radius is the unique positive root (Perron root); otherwise all
roots are found by simultaneous Aberth-Ehrlich iteration.
"""

import numpy as np
from scipy.optimize import bisect

from utils.errors import ConvergenceError
from utils.logger import get_logger

logger = get_logger()

ROOT_TOL = 1e-9
MAX_ITER = 500


def fujiwara(coeffs) -> float:
    """
    Fujiwara's bound on the largest root modulus of
    x^m + c_1 x^{m-1} + ... + c_m:
    K = 2 max{|c_1|, |c_2|^(1/2), ..., |c_{m-1}|^(1/(m-1)), |c_m / 2|^(1/m)}.
    """
    c = np.abs(np.asarray(coeffs, dtype=complex).reshape(-1))
    m = c.size
    if m == 0:
        return 0.0
    terms = [c[i] ** (1.0 / (i + 1)) for i in range(m - 1)]
    terms.append((c[m - 1] / 2.0) ** (1.0 / m))
    return float(2.0 * max(terms))


def _strip_zero_roots(c: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(c)
    return c[: nonzero[-1] + 1] if nonzero.size else c[:0]


def positive_root(first_column) -> float:
    """Perron root of a companion matrix with nonnegative first column."""
    c = _strip_zero_roots(np.asarray(first_column, dtype=float).reshape(-1))
    if c.size == 0:
        return 0.0
    if np.any(c < 0):
        raise ValueError("positive_root needs a nonnegative first column")
    m = c.size
    powers = np.arange(m - 1, -1, -1)

    def f(x: float) -> float:
        return x**m - float(c @ x**powers)

    upper = max(1.0, 1.0 + float(c.sum()))
    return float(bisect(f, 0.0, upper, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=400))


def polynomial_roots(monic, tol: float = ROOT_TOL, max_iter: int = MAX_ITER) -> np.ndarray:
    """
    All roots of a monic polynomial by Aberth-Ehrlich iteration.

    Args:
        monic: Coefficients [1, c_1, ..., c_m], highest degree first.
        tol: Relative residual |f(z)| / sum |c_i| |z|^{m-i} to stop at.
        max_iter: Iteration cap.

    Returns:
        The m roots as a complex array.

    Raises:
        ConvergenceError: If the residual is above `tol` after `max_iter`
            iterations.
    """
    p = np.asarray(monic, dtype=complex).reshape(-1)
    p = p / p[0]
    tail = _strip_zero_roots(p[1:])
    zeros = np.zeros(p.size - 1 - tail.size, dtype=complex)
    m = tail.size
    if m == 0:
        return zeros

    poly = np.concatenate([[1.0 + 0j], tail])
    deriv = np.polyder(poly)
    abs_poly = np.abs(poly)
    radius = fujiwara(tail)
    z = radius * np.exp(1j * (2.0 * np.pi * np.arange(m) / m + 0.4))

    residual = np.inf
    for _ in range(max_iter):
        values = np.polyval(poly, z)
        scale = np.polyval(abs_poly, np.abs(z))
        residual = float(np.max(np.abs(values) / scale))
        if residual <= tol:
            return np.concatenate([z, zeros])

        derivs = np.polyval(deriv, z)
        derivs = np.where(derivs == 0, np.finfo(float).eps, derivs)
        ratio = values / derivs
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        repulsion = np.sum(1.0 / diff, axis=1)
        step = ratio / (1.0 - ratio * repulsion)
        z = z - step
        if np.max(np.abs(step)) <= 1e-15 * (1.0 + np.max(np.abs(z))):
            # Stalled at the precision limit (clustered roots)
            values = np.polyval(poly, z)
            residual = float(np.max(np.abs(values) / np.polyval(abs_poly, np.abs(z))))
            if residual <= np.sqrt(tol):
                return np.concatenate([z, zeros])

    logger.error(f"Root finder stopped at residual {residual:.3e} for degree {m}")
    raise ConvergenceError(f"Aberth iteration did not converge in {max_iter} steps", residual)


def spectral_radius(first_column, nonnegative: bool = False) -> float:
    """
    Spectral radius of the companion matrix with the given first column.

    Args:
        first_column: c_1..c_m, the first column of the companion matrix.
        nonnegative: Use the Perron-root bisection; requires c >= 0.

    Returns:
        The largest eigenvalue modulus.
    """
    c = np.asarray(first_column, dtype=float).reshape(-1)
    if nonnegative:
        return positive_root(c)
    roots = polynomial_roots(np.concatenate([[1.0], -c]))
    return float(np.max(np.abs(roots))) if roots.size else 0.0
