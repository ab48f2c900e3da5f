import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank))
    return scale * A @ A.T / max(rank, 1)


def random_pd(rng, n, floor=0.3):
    return random_psd(rng, n) + floor * np.eye(n)


def random_sym(rng, n):
    A = rng.standard_normal((n, n))
    return (A + A.T) / 2


def segment_grid_value(mu, sigma, z, step=1e-3):
    """Brute-force minimum of w'Sigma w / 2 over the feasible slice of the 3-simplex.

    For three assets with distinct returns the slice ``{w >= 0, sum w = 1,
    mu'w = z}`` is a segment; its endpoints lie on the simplex edges.
    """
    mu = np.asarray(mu, dtype=float)
    pts = []
    n = mu.size
    for i in range(n):
        for j in range(i + 1, n):
            if mu[i] == mu[j]:
                if mu[i] == z:
                    pts += [np.eye(n)[i], np.eye(n)[j]]
                continue
            t = (z - mu[j]) / (mu[i] - mu[j])
            if -1e-12 <= t <= 1 + 1e-12:
                t = min(max(t, 0.0), 1.0)
                pts.append(t * np.eye(n)[i] + (1 - t) * np.eye(n)[j])
    pts = np.array(pts)
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    a, b = pts[i], pts[j]
    ts = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    W = (1 - ts)[:, None] * a + ts[:, None] * b
    return float(np.min(0.5 * np.einsum("ki,ij,kj->k", W, sigma, W)))


ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    """Store and print one acceptance line; returns ``passed`` for asserting."""
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
