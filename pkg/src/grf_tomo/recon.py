"""Discrete local-tomography reconstruction of noise and its Monte-Carlo statistics.

The reconstruction at a point ``x`` backprojects the second derivative of the
interpolated data along detector rows:

    N(x) = (delta_s / eps^2) * sum_{j,k} d2((u(x,s_j) - eps*k1)/eps)
                                  * value((v(x,s_j) - eps*k2)/eps) * eta_{j,k}.

Only detector cells inside the kernel footprint contribute, so the per-view
work is a small fixed window around the projected point.  Noise values come
from the stateless index-keyed generator in :mod:`grf_tomo.noise`; the sample
produced for a given ``(seed, realization)`` is therefore independent of the
evaluation-point set, the detector-window margins, and the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import noise as noise_mod
from .kernel import Kernel

_INDEX_BIAS = 1 << 20          # detector indices packed as 21-bit biased ints
_BATCH = 32                    # realizations per batch; fixed for determinism


def detector_response(geometry, kernel, eps, x, s, u_prime, v_prime):
    """Response of the filtered interpolation to a unit datum at ``(u', v')``.

    Equals ``(1/eps^2) * d2((u - u')/eps) * value((v - v')/eps)`` where
    ``(u, v)`` is the projection of ``x`` at angle ``s``.  The reconstruction
    is ``delta_s`` times the sum of this response against the noise over all
    data sites.
    """
    u, v = geometry.project(x, s)
    out = kernel.second_derivative((u - u_prime) / eps) \
        * kernel.value((v - v_prime) / eps) / eps**2
    return out if np.ndim(out) else float(out)


def _footprint_bounds(coord, support, margin):
    """Integer index window covering ``|coord - k| < support`` plus margin."""
    lo = np.floor(coord - support).astype(np.int64) + 1 - margin
    hi = np.ceil(coord + support).astype(np.int64) - 1 + margin
    return lo, hi


class ReconstructionPlan:
    """Precomputed footprints, weights, and noise keys for a set of points.

    Reconstruction values for any realization follow from one pass over the
    plan's site table.  Construction is the only geometry-dependent cost;
    realizations then reduce fixed weight vectors against hashed noise draws
    in a fixed order, which makes results bitwise reproducible at any thread
    count.

    Parameters
    ----------
    geometry, kernel, noise_model
        Scan geometry, reconstruction kernel, and noise description.
    points : array_like, shape (L, 3)
        Spatial evaluation points (already in absolute coordinates).
    footprint_margin : int, optional
        Extra detector indices added around each footprint.  The added sites
        carry zero weight and are excluded from the reduction, so any margin
        produces bit-identical reconstructions; exposed for testing that
        invariance.
    """

    def __init__(self, geometry, kernel, noise_model, points, footprint_margin=0):
        if not isinstance(kernel, Kernel):
            kernel = Kernel(kernel)
        self.geometry = geometry
        self.kernel = kernel
        self.noise_model = noise_model
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("points must have shape (L, 3)")

        eps = noise_model.eps
        n_views = noise_model.n_views
        support = kernel.spec.support
        s = np.arange(n_views) * noise_model.delta_s
        margin = int(footprint_margin)

        packed_per_point = []
        weights_per_point = []
        window_per_point = []
        for x in self.points:
            u, v = geometry.project(x, s)
            lo1, hi1 = _footprint_bounds(u / eps, support, margin)
            lo2, hi2 = _footprint_bounds(v / eps, support, margin)
            m1 = int(np.max(hi1 - lo1)) + 1
            m2 = int(np.max(hi2 - lo2)) + 1
            k1 = lo1[:, None] + np.arange(m1)[None, :]            # (nv, m1)
            k2 = lo2[:, None] + np.arange(m2)[None, :]            # (nv, m2)
            ok1 = k1 <= hi1[:, None]
            ok2 = k2 <= hi2[:, None]
            w1 = np.where(ok1, kernel.second_derivative(u[:, None] / eps - k1), 0.0)
            w2 = np.where(ok2, kernel.value(v[:, None] / eps - k2), 0.0)
            w = w1[:, :, None] * w2[:, None, :]                   # (nv, m1, m2)
            jj = np.broadcast_to(np.arange(n_views)[:, None, None], w.shape)
            kk1 = np.broadcast_to(k1[:, :, None], w.shape)
            kk2 = np.broadcast_to(k2[:, None, :], w.shape)
            window = ok1[:, :, None] & ok2[:, None, :]
            if np.any((np.abs(kk1[window]) >= _INDEX_BIAS)
                      | (np.abs(kk2[window]) >= _INDEX_BIAS)):
                raise ValueError("detector index exceeds packing range")
            packed = (jj.astype(np.int64) << 42) \
                | ((kk1 + _INDEX_BIAS) << 21) | (kk2 + _INDEX_BIAS)
            # noise is generated for the whole window, but zero-weight cells
            # never enter the reduction, so the summed term sequence (and
            # every output bit) is independent of window enlargement
            keep = w != 0.0
            window_per_point.append(packed[window])
            packed_per_point.append(packed[keep])
            weights_per_point.append(w[keep])

        site_pack = np.unique(np.concatenate(window_per_point))
        self.site_j = (site_pack >> 42).astype(np.int64)
        self.site_k1 = ((site_pack >> 21) & (2**21 - 1)).astype(np.int64) - _INDEX_BIAS
        self.site_k2 = (site_pack & (2**21 - 1)).astype(np.int64) - _INDEX_BIAS
        self._gather = [np.searchsorted(site_pack, p) for p in packed_per_point]
        self._weights = weights_per_point
        self._site_keys = noise_mod.site_keys(self.site_j, self.site_k1, self.site_k2)
        self._site_amp = noise_model.scale * noise_model._modulation(
            self.site_j * noise_model.delta_s, eps * self.site_k1, eps * self.site_k2
        )
        self._prefactor = noise_model.delta_s / eps**2

    @property
    def n_sites(self):
        return self.site_j.size

    def exact_covariance(self):
        """Exact covariance matrix of the reconstructions under the model.

        Sums the squared weighted responses against the per-site noise
        variances, so it carries no Monte-Carlo error; the sample covariance
        over realizations converges to this matrix.
        """
        n_points = len(self._weights)
        dense = np.zeros((self.n_sites, n_points))
        for l, (idx, w) in enumerate(zip(self._gather, self._weights)):
            np.add.at(dense[:, l], idx, w)
        site_var = self._site_amp**2 / 3.0
        return self._prefactor**2 * (dense * site_var[:, None]).T @ dense

    def _run_batch(self, realizations):
        streams = noise_mod.stream_keys(self.noise_model.seed, realizations)
        nu = noise_mod.uniform_from_keys(self._site_keys[:, None], streams[None, :])
        eta = self._site_amp[:, None] * nu
        out = np.empty((realizations.size, len(self._weights)))
        for l, (idx, w) in enumerate(zip(self._gather, self._weights)):
            out[:, l] = self._prefactor * np.add.reduce(w[:, None] * eta[idx], axis=0)
        return out

    def reconstruct(self, realizations, threads=None):
        """Reconstruction values for the given realization indices.

        Parameters
        ----------
        realizations : array_like of int
            Realization indices (each >= 0).
        threads : int, optional
            Worker threads; any value yields identical output.

        Returns
        -------
        ndarray, shape (n_realizations, L)
        """
        realizations = np.atleast_1d(np.asarray(realizations, dtype=np.int64))
        if np.any(realizations < 0):
            raise IndexError("realization index must be >= 0")
        out = np.empty((realizations.size, len(self._weights)))
        starts = range(0, realizations.size, _BATCH)

        def work(start):
            stop = min(start + _BATCH, realizations.size)
            out[start:stop] = self._run_batch(realizations[start:stop])

        if threads is not None and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, starts))
        else:
            for start in starts:
                work(start)
        return out


def reconstruct_point(geometry, kernel, noise_model, realization, point):
    """Reconstruction value at one point for one realization."""
    plan = ReconstructionPlan(geometry, kernel, noise_model, [point])
    return float(plan.reconstruct([realization])[0, 0])


def reconstruct_with_field(geometry, kernel, eps, delta_s, n_views, point, field):
    """Reconstruction against an arbitrary noise field (testing hook).

    ``field(j, k1, k2)`` receives broadcastable integer index arrays and
    returns the noise values; the reconstruction is linear in it.
    """
    if not isinstance(kernel, Kernel):
        kernel = Kernel(kernel)
    support = kernel.spec.support
    x = np.asarray(point, dtype=float)
    total = 0.0
    for j in range(n_views):
        u, v = geometry.project(x, j * delta_s)
        lo1, hi1 = _footprint_bounds(np.asarray(u / eps), support, 0)
        lo2, hi2 = _footprint_bounds(np.asarray(v / eps), support, 0)
        k1 = np.arange(lo1, hi1 + 1)
        k2 = np.arange(lo2, hi2 + 1)
        w = kernel.second_derivative(u / eps - k1)[:, None] \
            * kernel.value(v / eps - k2)[None, :]
        total += float(np.sum(w * field(j, k1[:, None], k2[None, :])))
    return delta_s / eps**2 * total


# ---------------------------------------------------------------------------
# sample statistics
# ---------------------------------------------------------------------------


@dataclass
class SampleStats:
    """Monte-Carlo statistics over realizations at a set of offsets.

    ``samples`` has shape (n_realizations, L); ``covariance`` is the unbiased
    sample covariance.  Moments are accumulated by merging fixed-size chunks
    in realization-index order, so they are reproducible bit-for-bit.
    """

    offsets: np.ndarray
    n_realizations: int
    mean: np.ndarray
    variance: np.ndarray
    covariance: np.ndarray
    samples: np.ndarray


def streaming_moments(samples, chunk=1024):
    """Mean and comoment matrix via ordered pairwise chunk merging."""
    samples = np.asarray(samples, dtype=float)
    n_total, width = samples.shape
    count = 0
    mean = np.zeros(width)
    com = np.zeros((width, width))
    for start in range(0, n_total, chunk):
        block = samples[start:start + chunk]
        nb = block.shape[0]
        mb = np.add.reduce(block, axis=0) / nb
        centered = block - mb
        cb = np.einsum("ni,nj->ij", centered, centered)
        if count == 0:
            count, mean, com = nb, mb, cb
        else:
            delta = mb - mean
            tot = count + nb
            com = com + cb + np.outer(delta, delta) * (count * nb / tot)
            mean = mean + delta * (nb / tot)
            count = tot
    return count, mean, com


def run_experiment(config, threads=None):
    """Monte-Carlo reconstruction statistics for an experiment configuration.

    ``config`` must provide ``geometry``, ``kernel``, ``noise``, ``center``,
    ``offsets``, ``eps`` and ``realizations``.  Returns :class:`SampleStats`;
    output is deterministic given the configuration and seed at any thread
    count.
    """
    if config.realizations < 2:
        raise ValueError("need at least 2 realizations for sample variances")
    points = np.asarray(config.center, dtype=float) \
        + config.eps * np.atleast_2d(np.asarray(config.offsets, dtype=float))
    plan = ReconstructionPlan(config.geometry, config.kernel, config.noise, points)
    samples = plan.reconstruct(np.arange(config.realizations), threads=threads)
    count, mean, com = streaming_moments(samples)
    cov = com / (count - 1)
    return SampleStats(
        offsets=np.atleast_2d(np.asarray(config.offsets, dtype=float)),
        n_realizations=count,
        mean=mean,
        variance=np.diag(cov).copy(),
        covariance=cov,
        samples=samples,
    )


# ---------------------------------------------------------------------------
# histograms and density comparison
# ---------------------------------------------------------------------------


@dataclass
class HistogramDensity:
    """Uniform-bin, density-normalized histogram in one or two dimensions.

    ``edges`` is a tuple of per-axis edge arrays; ``density`` integrates to
    one over the binned range (samples falling outside the range are
    excluded before normalization).
    """

    edges: tuple
    density: np.ndarray

    @property
    def ndim(self):
        return len(self.edges)

    @property
    def centers(self):
        return tuple(0.5 * (e[:-1] + e[1:]) for e in self.edges)

    @property
    def bin_measure(self):
        out = 1.0
        for e in self.edges:
            out *= e[1] - e[0]
        return out


def _default_range(values):
    # mean +/- 4.5 standard deviations keeps essentially all Gaussian mass;
    # clip to the observed extremes so the range never exceeds the data
    mu, sd = float(np.mean(values)), float(np.std(values))
    lo = max(mu - 4.5 * sd, float(np.min(values)))
    hi = min(mu + 4.5 * sd, float(np.max(values)))
    if hi - lo <= 0:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def histogram_density(samples, bins, bin_range=None):
    """1D density histogram with uniform bins.

    ``bin_range`` defaults to the sample mean plus/minus 4.5 standard
    deviations, clipped to the sample extremes.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    lo, hi = _default_range(samples) if bin_range is None else map(float, bin_range)
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    total = counts.sum()
    if total == 0:
        raise ValueError("no samples fall inside the bin range")
    width = edges[1] - edges[0]
    return HistogramDensity(edges=(edges,), density=counts / (total * width))


def histogram_density_2d(samples, bins, ranges=None):
    """2D density histogram over sample pairs of shape (n, 2)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] == 0:
        raise ValueError("need a nonempty (n, 2) sample array")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if ranges is None:
        ranges = (_default_range(samples[:, 0]), _default_range(samples[:, 1]))
    counts, ex, ey = np.histogram2d(samples[:, 0], samples[:, 1],
                                    bins=bins, range=ranges)
    total = counts.sum()
    if total == 0:
        raise ValueError("no samples fall inside the bin ranges")
    area = (ex[1] - ex[0]) * (ey[1] - ey[0])
    return HistogramDensity(edges=(ex, ey), density=counts / (total * area))


def gaussian_on_bins(mean, cov, histogram):
    """Normal density evaluated at the bin centers of a histogram.

    ``cov`` must be symmetric positive definite (a positive scalar variance
    in one dimension); raises :class:`ValueError` otherwise.
    """
    if histogram.ndim == 1:
        var = float(np.asarray(cov).reshape(()))
        if var <= 0:
            raise ValueError("variance must be positive")
        c = histogram.centers[0]
        return np.exp(-0.5 * (c - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)
    cov = np.asarray(cov, dtype=float).reshape(2, 2)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc
    cx, cy = histogram.centers
    pts = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1) - np.asarray(mean)
    z = np.linalg.solve(chol, pts.reshape(-1, 2).T)
    quad = np.sum(z**2, axis=0).reshape(len(cx), len(cy))
    det = chol[0, 0] * chol[1, 1]
    return np.exp(-0.5 * quad) / (2.0 * np.pi * det)


def density_mismatch(observed, predicted):
    """Relative l1 mismatch ``sum|obs - pred| / sum|pred|`` over equal grids."""
    observed = np.asarray(observed, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if observed.shape != predicted.shape:
        raise ValueError(
            f"shape mismatch: {observed.shape} vs {predicted.shape}"
        )
    return float(np.sum(np.abs(observed - predicted)) / np.sum(np.abs(predicted)))
