"""Scan geometries: circular-trajectory cone beam and the classical 2D Radon model.

The cone-beam source moves on a circle of radius ``R`` in the ``z = 0`` plane;
the flat virtual detector passes through the origin and rotates with the
source.  A spatial point is mapped to detector coordinates ``(u, v)`` by
stereographic projection from the source.  All maps are vectorized over
leading axes and pure (no shared mutable state), so concurrent calls are safe.

Angles are in radians and are normalized into ``[0, 2*pi)`` on input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


class DegenerateProjectionError(ValueError):
    """Projection denominator fell at or below the configured floor."""


def _normalize_angle(s):
    return np.mod(np.asarray(s, dtype=float), TWO_PI)


@dataclass(frozen=True)
class ConeBeamGeometry:
    """Circular cone-beam geometry with a flat detector through the origin.

    Parameters
    ----------
    radius : float
        Source-trajectory radius ``R > 0``.
    admissible_fraction : float, optional
        Reconstruction points must satisfy ``hypot(x1, x2) <= fraction * R``.
        Used by configuration validation, not enforced per call.
    denominator_floor : float, optional
        Raise :class:`DegenerateProjectionError` when the projection
        denominator is at or below this floor.
    """

    radius: float
    admissible_fraction: float = 0.9
    denominator_floor: float = 1e-9

    parameter_period = TWO_PI

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if not 0 < self.admissible_fraction < 1:
            raise ValueError("admissible_fraction must lie in (0, 1)")

    def source_position(self, s):
        """Source point ``(R cos s, R sin s, 0)``; broadcasts over ``s``."""
        s = _normalize_angle(s)
        return np.stack(
            [self.radius * np.cos(s), self.radius * np.sin(s), np.zeros_like(s)],
            axis=-1,
        )

    def _denominator(self, x, s):
        x = np.asarray(x, dtype=float)
        s = _normalize_angle(s)
        return 1.0 - (x[..., 0] * np.cos(s) + x[..., 1] * np.sin(s)) / self.radius, x, s

    def project(self, x, s):
        """Stereographic projection of ``x`` onto the detector at angle ``s``.

        Parameters
        ----------
        x : array_like, shape (..., 3)
            Spatial point(s).
        s : float or array_like
            Source angle(s), broadcastable against ``x[..., 0]``.

        Returns
        -------
        (u, v) : tuple of ndarray
            Detector coordinates.

        Raises
        ------
        DegenerateProjectionError
            If any projection denominator is ``<= denominator_floor``.
        """
        den, x, s = self._denominator(x, s)
        if np.any(den <= self.denominator_floor):
            raise DegenerateProjectionError(
                f"projection denominator {np.min(den):.3e} at or below floor "
                f"{self.denominator_floor:.1e}"
            )
        t = 1.0 / den
        u = t * (-x[..., 0] * np.sin(s) + x[..., 1] * np.cos(s))
        v = t * x[..., 2]
        return u, v

    def projection(self, x, s):
        """Detector coordinates stacked into one array of shape (..., 2)."""
        u, v = self.project(x, s)
        return np.stack([u, v], axis=-1)

    def project_gradient(self, x, s):
        """Jacobian of ``(u, v)`` with respect to ``x``, shape (..., 2, 3).

        Analytic differentiation of the projection map, including the chain
        terms through the denominator.
        """
        den, x, s = self._denominator(x, s)
        if np.any(den <= self.denominator_floor):
            raise DegenerateProjectionError(
                f"projection denominator {np.min(den):.3e} at or below floor "
                f"{self.denominator_floor:.1e}"
            )
        cs, sn = np.cos(s), np.sin(s)
        t = 1.0 / den
        w = -x[..., 0] * sn + x[..., 1] * cs
        # dT/dx = (T^2/R) * (cos s, sin s, 0)
        tt_r = t * t / self.radius
        shape = np.broadcast_shapes(x[..., 0].shape, np.shape(s))
        grad = np.zeros(shape + (2, 3))
        grad[..., 0, 0] = -t * sn + w * tt_r * cs
        grad[..., 0, 1] = t * cs + w * tt_r * sn
        grad[..., 1, 0] = x[..., 2] * tt_r * cs
        grad[..., 1, 1] = x[..., 2] * tt_r * sn
        grad[..., 1, 2] = t
        return grad

    projection_gradient = project_gradient

    def ellipse_residual(self, x, s):
        """Defect of the algebraic identity satisfied by the projected orbit.

        For a fixed ``x`` with ``x3 != 0``, the detector track over a full
        turn satisfies ``(x1^2 + x2^2) v^2 - x3^2 u^2 - R^2 (v - x3)^2 = 0``;
        the returned value is that left-hand side, so it vanishes up to
        rounding for admissible inputs.
        """
        u, v = self.project(x, s)
        x = np.asarray(x, dtype=float)
        rho2 = x[..., 0] ** 2 + x[..., 1] ** 2
        out = rho2 * v**2 - x[..., 2] ** 2 * u**2 - self.radius**2 * (v - x[..., 2]) ** 2
        return out if np.ndim(out) else float(out)


def radon2d_psi(x, alpha):
    """Signed distance map of the classical 2D Radon family: ``x . (cos a, sin a)``."""
    x = np.asarray(x, dtype=float)
    alpha = _normalize_angle(alpha)
    out = x[..., 0] * np.cos(alpha) + x[..., 1] * np.sin(alpha)
    return out if np.ndim(out) else float(out)


def radon2d_psi_second_derivative(x, alpha):
    """Analytic second angle-derivative of :func:`radon2d_psi` (equals its negative)."""
    out = -radon2d_psi(x, alpha)
    return out


class Radon2DGeometry:
    """Classical 2D Radon parametrization, used by the assumption checks.

    Stateless; exposes the same ``projection`` / ``projection_gradient``
    interface as :class:`ConeBeamGeometry` with a 1-component data map.
    """

    parameter_period = TWO_PI

    def projection(self, x, alpha):
        return np.asarray(radon2d_psi(x, alpha))[..., None]

    def projection_gradient(self, x, alpha):
        alpha = _normalize_angle(alpha)
        shape = np.broadcast_shapes(np.shape(np.asarray(x)[..., 0]), np.shape(alpha))
        grad = np.zeros(shape + (1, 2))
        grad[..., 0, 0] = np.cos(alpha)
        grad[..., 0, 1] = np.sin(alpha)
        return grad
