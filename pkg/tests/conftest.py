import pytest

from mpgame.dynamics import MPParams


@pytest.fixture(scope="session")
def p1():
    return MPParams.create(1, 256)


@pytest.fixture(scope="session", params=[0.5, 1, 2], ids=lambda g: f"gamma={g}")
def params(request):
    return MPParams.create(request.param, 256)
