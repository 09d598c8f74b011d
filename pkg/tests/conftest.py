import numpy as np
import pytest

from gbmcheck import bhdsim, states

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def thermal_data():
    return bhdsim.generate(bhdsim.SimConfig(states.Thermal(0.1), samples=10**6, seed=11))


@pytest.fixture(scope="session")
def squeezed_data():
    return bhdsim.generate(bhdsim.SimConfig(states.reference_squeezed(), samples=10**6, seed=42))


@pytest.fixture(scope="session")
def coherent_data():
    return bhdsim.generate(bhdsim.SimConfig(states.Coherent(0.6 - 0.4j), samples=4 * 10**5, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(scope="session")
def acceptance_report():
    def report(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
