import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.linalg.norm(b.ravel())
    diff = np.linalg.norm((a - b).ravel())
    return diff if denom == 0 else diff / denom


def triple_sum_mode_product(x, p, mode):
    """Mode-n product evaluated straight from its element-wise definition."""
    I, J, K = x.shape
    dims = list(x.shape)
    dims[mode - 1] = p.shape[0]
    out = np.zeros(dims)
    for i in range(I):
        for j in range(J):
            for k in range(K):
                idx = [i, j, k]
                for a in range(p.shape[0]):
                    tgt = list(idx)
                    tgt[mode - 1] = a
                    out[tuple(tgt)] += x[i, j, k] * p[a, idx[mode - 1]]
    return out


def outer_sum(u1, u2, u3):
    """Sum of rank-1 outer products by explicit loops."""
    out = np.zeros((u1.shape[0], u2.shape[0], u3.shape[0]))
    for r in range(u1.shape[1]):
        for i in range(u1.shape[0]):
            for j in range(u2.shape[0]):
                for k in range(u3.shape[0]):
                    out[i, j, k] += u1[i, r] * u2[j, r] * u3[k, r]
    return out


def explicit_dh(ops):
    """Materialize D·H acting on vec(X) (i fastest) straight from the kernel taps."""
    dims = [op.hr_len for op in ops]
    n = int(np.prod(dims))
    taps = [op.blur[0] for op in ops]  # row 0 of each circulant: tap weight per offset

    def vec(i, j, k):
        return i + dims[0] * (j + dims[1] * k)

    h = np.zeros((n, n))
    for i in range(dims[0]):
        for j in range(dims[1]):
            for k in range(dims[2]):
                for a in range(dims[0]):
                    for b in range(dims[1]):
                        for c in range(dims[2]):
                            w = (taps[0][(a - i) % dims[0]] * taps[1][(b - j) % dims[1]]
                                 * taps[2][(c - k) % dims[2]])
                            if w:
                                h[vec(i, j, k), vec(a, b, c)] = w
    r = ops[0].rate
    lr = [d // r for d in dims]
    d = np.zeros((int(np.prod(lr)), n))
    for i in range(lr[0]):
        for j in range(lr[1]):
            for k in range(lr[2]):
                d[i + lr[0] * (j + lr[1] * k), vec(r * i, r * j, r * k)] = 1.0
    return d @ h


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
