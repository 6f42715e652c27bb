import numpy as np
import pytest

from fairgp.graph import build_graph


def make_graph(edges, n, d=1, sensitive=None, labels=None, features=None):
    feats = np.zeros((n, d)) if features is None else features
    s = np.zeros(n, dtype=int) if sensitive is None else sensitive
    y = np.zeros(n, dtype=int) if labels is None else labels
    return build_graph(edges, feats, s, y, n=n)


@pytest.fixture
def path3():
    return make_graph([(0, 1), (1, 2)], 3)


@pytest.fixture
def two_triangles():
    return make_graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)], 6)


@pytest.fixture
def two_k4():
    edges = [(u, v) for base in (0, 4) for u in range(base, base + 4) for v in range(u + 1, base + 4)]
    return make_graph(edges, 8)


def er_graph(rng, n, p, **kw):
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < p
    return make_graph(np.stack([iu[0][keep], iu[1][keep]], axis=1), n, **kw)


ACCEPTANCE_RESULTS = []


@pytest.fixture
def record_criterion():
    def record(result):
        ACCEPTANCE_RESULTS.append(result)
        print(result.line())
        return result
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for res in sorted(ACCEPTANCE_RESULTS, key=lambda r: r.number):
        terminalreporter.write_line(res.line())
    passed = sum(r.passed for r in ACCEPTANCE_RESULTS)
    terminalreporter.write_line(f"{passed}/{len(ACCEPTANCE_RESULTS)} criteria passed")
