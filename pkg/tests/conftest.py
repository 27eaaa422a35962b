import numpy as np
import pytest

from jointfilter import _backend

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(params=sorted(_backend.BACKENDS))
def backend(request):
    prev = _backend.get_backend()
    _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(prev)


@pytest.fixture(autouse=True)
def restore_backend_state():
    prev = _backend.get_backend(), _backend.get_num_threads()
    yield
    _backend.set_backend(prev[0])
    _backend.set_num_threads(prev[1])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def naive_corr2d(x, w, b, pad):
    """Six nested loops; zero padding of ``pad`` pixels on every side."""
    C, H, W = x.shape
    O, _, K, _ = w.shape
    xp = np.zeros((C, H + 2 * pad, W + 2 * pad))
    xp[:, pad:pad + H, pad:pad + W] = x
    oh, ow = H + 2 * pad - K + 1, W + 2 * pad - K + 1
    out = np.zeros((O, oh, ow))
    for o in range(O):
        for i in range(oh):
            for j in range(ow):
                s = b[o]
                for c in range(C):
                    for u in range(K):
                        for v in range(K):
                            s += w[o, c, u, v] * xp[c, i + u, j + v]
                out[o, i, j] = s
    return out
