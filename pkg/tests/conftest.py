"""Shared fixtures: solved fronts and presets reused across suites"""
import pytest

from models.front_solver import shoot_scalar_front, solve_front_bvp
from models.reaction_models import kpp, nagumo


@pytest.fixture(scope="session")
def kpp_front():
    """Pulled logistic front at c = 2 from 1 to 0"""
    return shoot_scalar_front(kpp(), 2.0, 1.0, 30.0, n_grid=1201)


@pytest.fixture(scope="session")
def pushed_front():
    """Pushed Nagumo front, a = -0.2, speed (1 - 2a)/sqrt(2)"""
    return solve_front_bvp(nagumo(-0.2), 1.0, (1.0,), (0.0,), 30.0, 1201)


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"
