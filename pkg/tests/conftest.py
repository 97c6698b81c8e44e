import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def random_causal_ar(rng, d, p, radius=0.7):
    """Random AR(p) with companion spectral radius scaled to ``radius``."""
    from tsfit.core import companion_matrix, spectral_radius

    ar = [rng.normal(size=(d, d)) for _ in range(p)]
    rho = spectral_radius(companion_matrix(ar, d).matrix)
    # scaling A_k by c**k scales every companion eigenvalue by c
    c = radius / rho
    ar = [a * c ** (k + 1) for k, a in enumerate(ar)]
    return ar


def random_spd(rng, d, floor=0.3):
    m = rng.normal(size=(d, d))
    return m @ m.T / d + floor * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
