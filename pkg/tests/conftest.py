import numpy as np
import pytest


def finite_difference_grads(f, params, step=1e-5):
    """Central finite differences of a scalar function over a list of arrays."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            hi = f()
            p[idx] = orig - step
            lo = f()
            p[idx] = orig
            g[idx] = (hi - lo) / (2.0 * step)
            it.iternext()
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-7):
    for a, n in zip(analytic, numeric):
        scale = np.maximum(np.abs(n), np.abs(a))
        ok = np.abs(a - n) <= atol + rtol * scale
        assert ok.all(), f"gradient mismatch: max rel err {np.abs(a - n).max()}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
