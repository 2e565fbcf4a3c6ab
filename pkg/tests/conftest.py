import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lcgeom.funcrep import GaussianForm, PiecewiseLogAffine, box_indicator, regular_polygon_indicator

settings.register_profile(
    "lcgeom", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("lcgeom")


@pytest.fixture
def square():
    return box_indicator([-1.0, -1.0], [1.0, 1.0])


@pytest.fixture
def disk64():
    return regular_polygon_indicator(64)


@pytest.fixture
def gauss2():
    return GaussianForm(1.0, np.zeros(2), np.eye(2))


@pytest.fixture
def exp_l1_2d():
    A = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    return PiecewiseLogAffine(1.0, A, np.zeros(4), np.zeros((0, 2)), np.zeros(0))


def random_pla(rng, n=2, p=3, bounded=True):
    """Random piecewise log-affine function on a box, or exp(-|x|_1)-like when unbounded."""
    slopes = rng.normal(size=(p, n))
    offsets = rng.normal(scale=0.3, size=p)
    if bounded:
        C = np.vstack([np.eye(n), -np.eye(n)])
        d = rng.uniform(0.5, 1.5, 2 * n)
    else:
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
        slopes = np.vstack([slopes, 1.5 * signs])
        offsets = np.r_[offsets, np.zeros(len(signs))]
        C, d = np.zeros((0, n)), np.zeros(0)
    return PiecewiseLogAffine(float(rng.uniform(0.5, 2.0)), slopes, offsets, C, d)


ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'}  {detail}")
