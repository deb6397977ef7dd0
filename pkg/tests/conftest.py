import math

import numpy as np
import pytest

from idexp.synthetic import SyntheticSpec, generate


def make_model(n=30, m=4, k=3, angles=None, seed=0, **kw):
    return generate(SyntheticSpec(n=n, m=m, k=k, prescribed_angles=angles, seed=seed, **kw))


@pytest.fixture
def small_model():
    return make_model()


@pytest.fixture
def angled_model():
    return make_model(n=60, m=5, k=5, angles=[0.3, 0.7, 1.0, 1.2, 1.5], seed=11)


@pytest.fixture
def orthogonal_model():
    return make_model(n=60, m=5, k=5, angles=[math.pi / 2] * 5, seed=11)


def random_orthonormal(rng, n, p):
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return q


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
