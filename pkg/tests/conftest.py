import numpy as np
import pytest

from schur_icp.bench import benchmark_clouds
from schur_icp.linearize import HessianSystem
from schur_icp.scenes import SceneSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_system(rng, m=40, scale=1.0):
    """Hessian assembled from a random m x 6 Jacobian, as the linearizer would."""
    J = rng.normal(size=(m, 6))
    J[:, :3] *= scale
    r = rng.normal(size=m)
    return HessianSystem.from_dense(J.T @ J, J.T @ r), J, r


@pytest.fixture(scope="session")
def cylinder_cloud():
    """Benchmark cylinder with normals left for registration to estimate."""
    return benchmark_clouds(SceneSpec())
