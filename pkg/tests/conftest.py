import pytest

from idslab.groups import cayley_graph, heisenberg, integer_lattice


@pytest.fixture(scope="session")
def z1():
    return integer_lattice(1)


@pytest.fixture(scope="session")
def z2():
    return integer_lattice(2)


@pytest.fixture(scope="session")
def heis():
    return heisenberg(max_radius=64)


@pytest.fixture(scope="session")
def g1(z1):
    return cayley_graph(z1)


@pytest.fixture(scope="session")
def g2(z2):
    return cayley_graph(z2)


@pytest.fixture(scope="session")
def gh(heis):
    return cayley_graph(heis)


# acceptance lines, printed once at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key, ok, detail in sorted(ACCEPTANCE, key=lambda r: (int(r[0].rstrip("ab")), r[0])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
