import numpy as np
import pytest

from trajloc import ArrayConfig, TrajectoryModel, TrajectoryParams, build_grid

FOUR_LINEAR = ((-11.0, 3.5), (20.0, 1.5), (61.0, -2.25), (-52.0, -4.75))


@pytest.fixture
def array():
    return ArrayConfig(10)


@pytest.fixture
def linear_model():
    return TrajectoryModel.polynomial(1)


@pytest.fixture
def linear_grid(linear_model):
    return build_grid(
        [("phi", -85, 2, 85), ("alpha1", -5, 0.5, 5)], linear_model
    )


@pytest.fixture
def four_sources(linear_model):
    return [TrajectoryParams(linear_model, p, (a,)) for p, a in FOUR_LINEAR]


def random_params(model, rng, phi_range=(-80, 80), coeff_range=(-4.5, 4.5)):
    phi = rng.uniform(*phi_range)
    coeffs = rng.uniform(*coeff_range, size=model.n_params - 1)
    return TrajectoryParams(model, phi, tuple(coeffs))


def assert_allclose(a, b, **kw):
    np.testing.assert_allclose(a, b, **kw)
