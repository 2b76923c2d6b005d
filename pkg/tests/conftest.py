import numpy as np
import pytest

from windowgraph import IndexParams, WindowGraphIndex


def gaussian(n, d, seed=0):
    return np.random.default_rng(seed).normal(size=(n, d)).astype(np.float32)


def build(vectors, attrs, **kw):
    params = IndexParams(**{k: kw.pop(k) for k in ("m", "omega_c", "o", "metric", "seed") if k in kw})
    threads = kw.pop("threads", 1)
    index = WindowGraphIndex(vectors.shape[1], params, **kw)
    index.insert_many(vectors, attrs, threads=threads)
    return index


@pytest.fixture(scope="session")
def small_index():
    """n=2000, d=16, distinct shuffled attributes."""
    vecs = gaussian(2000, 16, seed=1)
    attrs = np.random.default_rng(2).permutation(2000).astype(np.int64)
    return build(vecs, attrs, omega_c=64)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
