import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["ext", "py"])
def backend_name(request):
    from cribwatch.backend import get_backend

    try:
        get_backend(request.param)
    except ImportError:
        pytest.skip(f"backend {request.param} unavailable")
    return request.param
