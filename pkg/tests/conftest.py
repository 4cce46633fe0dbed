import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from oracles import random_connected_graph  # noqa: E402

from sslh.compatibility import CompatibilityMatrix  # noqa: E402
from sslh.graph import LabelMatrix, SparseGraph  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=100)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def graph_from_dense(A, directed=False):
    s, t = np.nonzero(A if directed else np.triu(A, 1))
    return SparseGraph.from_edges(s, t, n=A.shape[0], directed=directed)


def random_instance(rng, n=None, k=3, frac=0.3):
    """Connected random graph, partial one-hot labels and a random symmetric doubly stochastic H."""
    n = n or int(rng.integers(5, 40))
    A = random_connected_graph(n, int(rng.integers(0, 2 * n)), rng)
    g = graph_from_dense(A)
    classes = rng.integers(0, k, size=n)
    classes[rng.random(n) > frac] = -1
    if (classes < 0).all():
        classes[0] = 0
    X = LabelMatrix.from_classes(classes, k)
    return A, g, X, random_ds(rng, k)


def random_ds(rng, k):
    """Random symmetric doubly stochastic matrix (may have small negative entries)."""
    from sslh.compatibility import from_h, n_free_params

    h = rng.uniform(0.0, 2.0 / k, size=n_free_params(k))
    return CompatibilityMatrix(from_h(h, k))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    return graph_from_dense(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float))


@pytest.fixture
def k3():
    return graph_from_dense(np.ones((3, 3)) - np.eye(3))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
