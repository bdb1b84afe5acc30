import pytest
from hypothesis import HealthCheck, settings

from layered_blowup.dynamics import integrate_chain
from layered_blowup.schedule import ScheduleConfig, plan

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DESK = dict(C=10.0, gamma=0.5, delta=0.05, mu=0.01, zeta=0.01, eps=0.1, N=2)

# lines appended by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def desk_schedule():
    return plan(ScheduleConfig(**DESK))


@pytest.fixture(scope="session")
def desk_chain(desk_schedule):
    return integrate_chain(desk_schedule)


@pytest.fixture(scope="session")
def single_chain(desk_schedule):
    return integrate_chain(desk_schedule, N=1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
