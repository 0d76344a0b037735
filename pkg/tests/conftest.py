import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from torusquant.fourier import FourierPolynomial

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

coeff = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, dim=None, radius=3, max_terms=6):
    m = draw(st.integers(1, 3)) if dim is None else dim
    idx = st.tuples(*[st.integers(-radius, radius)] * m)
    terms = draw(st.dictionaries(idx, coeff, max_size=max_terms))
    return FourierPolynomial(m, terms)


@st.composite
def poly_pairs(draw, radius=3, max_terms=6):
    m = draw(st.integers(1, 3))
    return draw(polys(m, radius, max_terms)), draw(polys(m, radius, max_terms))


def angles(m, count, seed=0):
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, size=(count, m))


def trapezoid_grid(m, points):
    """Tensor grid of the periodic trapezoid rule on T^m."""
    axis = 2 * np.pi * np.arange(points) / points
    mesh = np.meshgrid(*[axis] * m, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
