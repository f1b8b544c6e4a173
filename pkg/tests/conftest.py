import numpy as np
import pytest
import torch
from hypothesis import HealthCheck, settings

from dyngraphgen.graph_store import make_graph

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

torch.set_default_dtype(torch.float64)


def random_adjacency(rng, n, p=0.3):
    a = (rng.random((n, n)) < p).astype(np.uint8)
    np.fill_diagonal(a, 0)
    return a


def random_graph(rng, n=6, steps=3, f=2, p=0.3):
    adj = np.stack([random_adjacency(rng, n, p) for _ in range(steps)])
    return make_graph(adj, rng.standard_normal((steps, n, f)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
