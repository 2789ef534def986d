"""Compactly supported interpolation-smoothing kernel and its autocorrelations.

The kernel is the convolution of the linear-interpolation triangle
``(1 - |t|)_+`` with the normalized smoothing bump
``c * (1 - (t/a)^2)_+^l``.  Both factors have unit mass, so the kernel
integrates to one, is even, and is supported on ``[-(1 + a), 1 + a]``.

Because the triangle's second distributional derivative is a combination of
three point masses, the kernel and its derivatives reduce to differences of
shifted antiderivatives of the smoothing bump.  Everything here is evaluated
from that closed piecewise-polynomial form; no runtime quadrature is involved
except in :meth:`Kernel.autocorrelation`, which integrates products of the
piecewise polynomials exactly with per-piece Gauss-Legendre rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial


def _double_factorial(n):
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the interpolation-smoothing kernel.

    Parameters
    ----------
    half_width : float
        Half-width ``a`` of the smoothing bump, in detector-pixel units.
        Must be positive.  The kernel support radius is ``1 + half_width``.
    exponent : int
        Smoothness exponent ``l >= 1`` of the bump ``(1 - (t/a)^2)^l``.
        The kernel has ``l + 1`` continuous derivatives.
    """

    half_width: float = 2.5
    exponent: int = 3

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError(f"half_width must be > 0, got {self.half_width}")
        if int(self.exponent) != self.exponent or self.exponent < 1:
            raise ValueError(f"exponent must be an integer >= 1, got {self.exponent}")

    @property
    def support(self):
        """Support radius ``1 + a``: the kernel vanishes for ``|t| >= support``."""
        return 1.0 + self.half_width

    @property
    def smoothness(self):
        """Number of continuous derivatives of the kernel (``l + 1``)."""
        return self.exponent + 1


class Kernel:
    """Evaluator for the kernel, its derivatives, and 1D autocorrelations.

    Immutable after construction; safe for concurrent reads.

    Parameters
    ----------
    spec : KernelSpec
        Kernel parameters.
    tab_step : float, optional
        Spacing of the diagnostic tabulation of the kernel and its first two
        derivatives on ``[-support, support]``.
    """

    def __init__(self, spec=None, tab_step=1e-3):
        self.spec = spec if spec is not None else KernelSpec()
        a, l = self.spec.half_width, self.spec.exponent

        # bump = c * (1 - (t/a)^2)^l with c chosen so the bump has unit mass
        norm = _double_factorial(2 * l + 1) / (2.0 * a * _double_factorial(2 * l))
        self._bump = norm * Polynomial([1.0, 0.0, -1.0 / a**2]) ** l
        self._bump_int1 = self._bump.integ(1, lbnd=-a)      # vanishes at -a
        self._bump_int2 = self._bump_int1.integ(1, lbnd=-a)
        self._mass1 = float(self._bump_int1(a))             # 1 up to rounding
        self._mass2 = float(self._bump_int2(a))

        self.tab_step = float(tab_step)
        w = self.spec.support
        grid = np.arange(-w, w + 0.5 * tab_step, tab_step)
        self.tab_grid = grid
        self.tab_value = self.value(grid)
        self.tab_d1 = self.first_derivative(grid)
        self.tab_d2 = self.second_derivative(grid)

    # -- piecewise evaluation of the bump and its running antiderivatives --

    def _bump_eval(self, t):
        a = self.spec.half_width
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        m = np.abs(t) < a
        out[m] = self._bump(t[m])
        return out

    def _bump_cdf(self, t):
        a = self.spec.half_width
        t = np.asarray(t, dtype=float)
        out = np.where(t >= a, self._mass1, 0.0)
        m = np.abs(t) < a
        out[m] = self._bump_int1(t[m])
        return out

    def _bump_cdf2(self, t):
        a = self.spec.half_width
        t = np.asarray(t, dtype=float)
        out = np.where(t >= a, self._mass2 + self._mass1 * (t - a), 0.0)
        m = np.abs(t) < a
        out[m] = self._bump_int2(t[m])
        return out

    # -- public evaluators; scalars in, scalars out ------------------------

    def value(self, t):
        """Kernel value; even in ``t`` bit-for-bit, zero for ``|t| >= support``."""
        t = np.abs(np.asarray(t, dtype=float))
        out = self._bump_cdf2(t + 1.0) - 2.0 * self._bump_cdf2(t) + self._bump_cdf2(t - 1.0)
        out = np.where(t >= self.spec.support, 0.0, out)
        return out if out.ndim else float(out)

    def first_derivative(self, t):
        """First derivative; odd in ``t``."""
        t = np.asarray(t, dtype=float)
        y = np.abs(t)
        raw = self._bump_cdf(y + 1.0) - 2.0 * self._bump_cdf(y) + self._bump_cdf(y - 1.0)
        raw = np.where(y >= self.spec.support, 0.0, raw)
        out = np.sign(t) * raw
        return out if np.ndim(out) else float(out)

    def second_derivative(self, t):
        """Second derivative; even in ``t``, zero for ``|t| >= support``."""
        t = np.abs(np.asarray(t, dtype=float))
        out = self._bump_eval(t + 1.0) - 2.0 * self._bump_eval(t) + self._bump_eval(t - 1.0)
        return out if out.ndim else float(out)

    def __call__(self, t):
        return self.value(t)

    # -- exact autocorrelations --------------------------------------------

    @property
    def breakpoints(self):
        """Boundaries of the polynomial pieces of the kernel."""
        a = self.spec.half_width
        return np.unique([-1.0 - a, -a, 1.0 - a, a - 1.0, a, 1.0 + a])

    def autocorrelation(self, shift, which="value"):
        """Autocorrelation ``int f(shift + r) f(r) dr`` of ``f``.

        Parameters
        ----------
        shift : float or array_like
            Lag(s) at which to evaluate.
        which : {"value", "d2"}
            Correlate the kernel itself or its second derivative.

        Returns
        -------
        float or ndarray
            Exact integral per lag (Gauss-Legendre on each polynomial piece
            of the product, which is exact for polynomials of this degree).
        """
        f = {"value": self.value, "d2": self.second_derivative}[which]
        shifts = np.atleast_1d(np.asarray(shift, dtype=float))
        w = self.spec.support
        deg = 2 * self.spec.exponent + 2          # degree of one kernel piece
        nodes, weights = np.polynomial.legendre.leggauss(deg + 2)
        breaks = self.breakpoints
        out = np.zeros(shifts.shape)
        for i, th in enumerate(shifts.ravel()):
            lo, hi = max(-w, -w - th), min(w, w - th)
            if lo >= hi:
                continue
            cuts = np.concatenate([[lo, hi], breaks, breaks - th])
            cuts = np.unique(np.clip(cuts, lo, hi))
            mid = 0.5 * (cuts[:-1] + cuts[1:])
            half = 0.5 * (cuts[1:] - cuts[:-1])
            r = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
            vals = f(r + th) * f(r)
            out.flat[i] = float(np.sum(vals * (half[:, None] * weights[None, :]).ravel()))
        return out if np.ndim(shift) else float(out[0])


# Cache of tabulated autocorrelation splines, keyed by kernel parameters.
_SPLINE_CACHE = {}


def autocorrelation_spline(kernel, which, step=1e-3):
    """Cubic-spline interpolant of a kernel autocorrelation.

    Tabulates :meth:`Kernel.autocorrelation` on a uniform grid covering the
    full correlation support ``[-2*support, 2*support]`` and fits a cubic
    spline.  Cached per ``(half_width, exponent, which, step)``.

    Returns
    -------
    callable
        Vectorized evaluator that is exactly zero outside the support.
    """
    key = (kernel.spec.half_width, kernel.spec.exponent, which, step)
    hit = _SPLINE_CACHE.get(key)
    if hit is not None:
        return hit

    from scipy.interpolate import CubicSpline

    w2 = 2.0 * kernel.spec.support
    n = int(np.ceil(w2 / step))
    grid = np.linspace(-w2, w2, 2 * n + 1)
    # autocorrelations are even; tabulate one half and mirror
    half_table = kernel.autocorrelation(grid[n:], which=which)
    table = np.concatenate([half_table[:0:-1], half_table])
    spline = CubicSpline(grid, table)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        m = np.abs(x) < w2
        out[m] = spline(x[m])
        return out if out.ndim else float(out)

    _SPLINE_CACHE[key] = evaluate
    return evaluate
