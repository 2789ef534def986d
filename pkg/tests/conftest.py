import numpy as np
import pytest

from grf_tomo import ConeBeamGeometry, Kernel, KernelSpec, NoiseModel

# reference experiment layout used across the suite
CENTER = np.array([2.7, -3.1, 0.8])
OFFSET_A = np.array([2.159, 3.075, -0.418])
OFFSET_B = np.array([2.546, -2.974, 0.983])
EPS = 0.05
N_VIEWS = 500
DELTA_S = 2.0 * np.pi / N_VIEWS


@pytest.fixture(scope="session")
def geometry():
    return ConeBeamGeometry(radius=10.0)


@pytest.fixture(scope="session")
def kernel():
    return Kernel(KernelSpec(half_width=2.5, exponent=3))


@pytest.fixture(scope="session")
def noise_model():
    return NoiseModel(eps=EPS, delta_s=DELTA_S, seed=20240601)


def admissible_points(geometry, rng, count, z_range=(-3.0, 3.0)):
    """Random points inside the admissible cylinder."""
    rho = geometry.admissible_fraction * geometry.radius * np.sqrt(rng.uniform(size=count))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    z = rng.uniform(*z_range, size=count)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def quad2d_response_correlation(kernel, theta):
    """Independent oracle: tensor Gauss-Legendre quadrature of the full 2D
    correlation integral of the response, with cells aligned to the
    polynomial seams of both factors."""
    w = kernel.spec.support
    deg = 2 * kernel.spec.exponent + 2
    nodes, weights = np.polynomial.legendre.leggauss(deg + 2)

    def axis_nodes(shift):
        lo, hi = max(-w, -w - shift), min(w, w - shift)
        if lo >= hi:
            return None, None
        cuts = np.unique(np.clip(np.concatenate(
            [[lo, hi], kernel.breakpoints, kernel.breakpoints - shift]), lo, hi))
        mid = 0.5 * (cuts[:-1] + cuts[1:])
        half = 0.5 * (cuts[1:] - cuts[:-1])
        return (mid[:, None] + half[:, None] * nodes[None, :]).ravel(), \
               (half[:, None] * weights[None, :]).ravel()

    r1, w1 = axis_nodes(theta[0])
    r2, w2 = axis_nodes(theta[1])
    if r1 is None or r2 is None:
        return 0.0
    resp = lambda a, b: kernel.second_derivative(a) * kernel.value(b)
    grid = resp(theta[0] + r1[:, None], theta[1] + r2[None, :]) \
        * resp(r1[:, None], r2[None, :])
    return float(w1 @ grid @ w2)
