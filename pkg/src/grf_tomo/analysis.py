"""Executable geometry-assumption checks and equidistribution diagnostics.

Two scan-type checks qualify an expansion point for the covariance limit:

* the Hessian of every scalar projection component combination must vanish
  only on a thin set of source parameters (:func:`hessian_zero_scan`);
* the directional derivative of the projection map must vanish only on a
  null set of parameters for every offset direction
  (:func:`direction_degeneracy_fraction`).

The equidistribution half of the module provides exponential sums over
shrinking lattices and lattice averages of periodic functions, whose decay
and convergence underpin the angle-average step of the covariance limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass
class ZeroSetReport:
    """Result of scanning a projection Hessian for zeros.

    ``degenerate`` is set when the scanned quantity stays below tolerance
    everywhere (identically-zero case); ``roots`` then stays empty.
    """

    roots: np.ndarray
    degenerate: bool
    resolution: int
    direction: np.ndarray
    max_abs: float

    @property
    def count(self):
        return len(self.roots)


def _second_difference(fn, y, h):
    return (fn(y + h) - 2.0 * fn(y) + fn(y - h)) / h**2


def hessian_zero_scan(geometry, x0, direction, resolution=2000, degenerate_tol=1e-9):
    """Locate parameter values where a projection-component Hessian vanishes.

    Scans ``d^2/dy^2 [direction . projection(x0, y)]`` over one parameter
    period, using central second differences with a step of one tenth of the
    grid spacing, and bisects each sign change to a root.

    Parameters
    ----------
    geometry : object
        Provides ``projection(x, y)`` with shape (..., N) and
        ``parameter_period``.
    x0 : array_like
        Expansion point.
    direction : array_like, shape (N,)
        Nonzero frequency direction; normalized internally (the zero set is
        invariant under positive scaling).
    resolution : int
        Number of scan samples over the period; at least 1000.
    degenerate_tol : float
        Declare the scan degenerate when the second difference stays below
        this everywhere (for the unit-normalized direction).

    Returns
    -------
    ZeroSetReport
    """
    direction = np.asarray(direction, dtype=float).ravel()
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    direction = direction / norm
    if resolution < 1000:
        raise ValueError("resolution must be >= 1000")

    period = geometry.parameter_period
    x0 = np.asarray(x0, dtype=float)

    def fn(y):
        return geometry.projection(x0, y) @ direction

    step = period / resolution
    h = 0.1 * step
    grid = np.arange(resolution) * step
    d2 = _second_difference(fn, grid, h)
    max_abs = float(np.max(np.abs(d2)))
    if max_abs <= degenerate_tol:
        return ZeroSetReport(np.array([]), True, resolution, direction, max_abs)

    # wrap around so sign changes across the period boundary are caught
    vals = np.append(d2, d2[0])
    ys = np.append(grid, period)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        a, b = ys[i], ys[i + 1]
        fa = _second_difference(fn, a, h)
        for _ in range(60):
            m = 0.5 * (a + b)
            fm = _second_difference(fn, m, h)
            if fa * fm <= 0:
                b = m
            else:
                a, fa = m, fm
            if b - a < 1e-13 * period:
                break
        roots.append(0.5 * (a + b) % period)
    # grid points that are exact zeros (between two opposite signs they are
    # already found by bisection; isolated exact zeros are rare and kept)
    exact = grid[d2 == 0.0]
    roots = np.unique(np.concatenate([np.asarray(roots), exact])) if len(roots) or exact.size \
        else np.array([])
    return ZeroSetReport(roots, False, resolution, direction, max_abs)


def hessian_scan_battery(geometry, x0, directions, resolution=2000, degenerate_tol=1e-9):
    """Run :func:`hessian_zero_scan` over a set of directions.

    Returns the list of reports; the point fails the thin-zero-set check if
    any direction is degenerate.
    """
    return [hessian_zero_scan(geometry, x0, d, resolution, degenerate_tol)
            for d in directions]


def direction_degeneracy_fraction(geometry, x0, offset, samples=20000, tol=1e-3):
    """Fraction of parameters where the projection derivative kills ``offset``.

    Estimates the measure of ``{y : |J(x0, y) offset| < tol * |J| |offset|}``
    with ``J`` the projection Jacobian and Frobenius norms; under the
    geometry checks this fraction must shrink linearly to zero with ``tol``.

    Raises :class:`ValueError` for a zero offset or fewer than 10^4 samples.
    """
    offset = np.asarray(offset, dtype=float).ravel()
    if np.linalg.norm(offset) == 0:
        raise ValueError("offset must be nonzero")
    if samples < 10**4:
        raise ValueError("samples must be >= 10^4")
    ys = np.arange(samples) * (geometry.parameter_period / samples)
    jac = geometry.projection_gradient(np.asarray(x0, dtype=float), ys)
    directional = np.linalg.norm(jac @ offset, axis=-1)
    scale = np.sqrt(np.sum(jac**2, axis=(-2, -1))) * np.linalg.norm(offset)
    return float(np.mean(directional < tol * scale))


def degeneracy_tolerance_scan(geometry, x0, offset, tols, samples=20000):
    """:func:`direction_degeneracy_fraction` over a list of tolerances."""
    return np.array([
        direction_degeneracy_fraction(geometry, x0, offset, samples, t) for t in tols
    ])


# ---------------------------------------------------------------------------
# exponential sums and lattice averages
# ---------------------------------------------------------------------------


def _lattice(eps, box):
    box = np.atleast_2d(np.asarray(box, dtype=float))
    if box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be a list of nondegenerate (lo, hi) pairs")
    axes = [np.arange(int(np.ceil(lo / eps)), int(np.floor(hi / eps)) + 1)
            for lo, hi in box]
    if box.shape[0] == 1:
        return eps * axes[0].astype(float), 1
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = eps * np.stack([m.ravel() for m in mesh], axis=-1).astype(float)
    return pts, box.shape[0]


def weyl_sum(fn, eps, box):
    """Normalized exponential sum ``eps^N sum exp(2 pi i f(eps j)/eps)``.

    ``fn`` receives the lattice points (flat array in one dimension, shape
    ``(m, N)`` otherwise) and returns real phases.  ``box`` is a pair
    ``(lo, hi)`` or a sequence of such pairs.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    pts, ndim = _lattice(eps, box)
    phases = np.asarray(fn(pts), dtype=float)
    return eps**ndim * complex(np.sum(np.exp(2j * np.pi * phases / eps)))


@dataclass
class WeylDecayResult:
    """Exponential sums over a family of shrinking steps and their decay rate.

    ``slope`` is the least-squares slope of ``log |sum|`` against
    ``log(1/eps)``: a magnitude decaying like ``eps^alpha`` gives slope
    ``-alpha``, so faster decay is more negative.
    """

    eps_values: np.ndarray
    sums: np.ndarray
    magnitudes: np.ndarray = field(init=False)
    slope: float = field(init=False)

    def __post_init__(self):
        self.magnitudes = np.abs(self.sums)
        self.slope = fit_log_slope(self.eps_values, self.magnitudes)


def weyl_decay_table(fn, box, exponents=(-2.0, -2.5, -3.0, -3.5, -4.0, -4.5)):
    """Evaluate :func:`weyl_sum` over a log-spaced family of steps.

    ``exponents`` are base-10 exponents of the steps.  Returns a
    :class:`WeylDecayResult` with the fitted decay slope.
    """
    eps_values = 10.0 ** np.asarray(exponents, dtype=float)
    sums = np.array([weyl_sum(fn, e, box) for e in eps_values])
    return WeylDecayResult(eps_values=eps_values, sums=sums)


def fit_log_slope(eps_values, magnitudes):
    """Slope of ``log magnitude`` against ``log(1/eps)`` by least squares.

    Decaying magnitudes give negative slopes; ``magnitude = C * eps^alpha``
    fits slope ``-alpha`` exactly.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    magnitudes = np.asarray(magnitudes, dtype=float)
    if eps_values.size < 2:
        raise ValueError("need at least two points to fit a slope")
    if np.any(magnitudes <= 0):
        raise ValueError("magnitudes must be positive for a log fit")
    return float(np.polyfit(np.log(1.0 / eps_values), np.log(magnitudes), 1)[0])


def equidistributed_average(gn, phase_map, eps, box):
    """Lattice average ``eps^N sum g(phase_map(eps j)/eps)``.

    For a 1-periodic ``g`` and a phase map with nondegenerate curvature this
    converges to ``Vol(box) * integral of g over one period`` as the step
    shrinks.  ``gn`` receives the scaled phases with the same shape the
    phase map produced.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    pts, ndim = _lattice(eps, box)
    values = np.asarray(gn(np.asarray(phase_map(pts), dtype=float) / eps), dtype=float)
    return eps**ndim * float(np.sum(values))
