import numpy as np
import pytest

from dyntransync.graphseq import GraphSequence, ObservationSet


def random_graph_sequence(rng, n, T, p=0.5, connected_union=True):
    """Random sequence; optionally forces a connected union by adding a path at a random step."""
    iu, ju = np.triu_indices(n, 1)
    edges = []
    for _ in range(T + 1):
        mask = rng.random(iu.size) < p
        edges.append({(int(a), int(b)) for a, b in zip(iu[mask], ju[mask])})
    if connected_union:
        for i in range(n - 1):
            edges[int(rng.integers(T + 1))].add((i, i + 1))
    return GraphSequence.from_edge_lists(n, [sorted(e) for e in edges])


def random_observations(rng, g, scale=1.0):
    return ObservationSet(g, tuple(rng.normal(scale=scale, size=len(e)) for e in g.edges))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
