import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wicksell import plummer

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return plummer.PlummerModel(200.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sample(rng, n, ymax=10.0, zmax=3.0, ties=False):
    from wicksell import from_pairs
    y = rng.uniform(0.0, ymax, n)
    if ties:
        y = np.round(y, 0)
    z = rng.uniform(0.0, zmax, n)
    return from_pairs(np.column_stack([y, z]))


ACCEPTANCE: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
