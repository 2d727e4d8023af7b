import pytest

from robust_dividend import ModelParams, RewardFunction, build_value_function, solve_shooting


@pytest.fixture(scope="session")
def p0():
    return ModelParams(m=1.0, sigma=2.0, rho=0.5)


@pytest.fixture(scope="session")
def p0_result(p0):
    return solve_shooting(p0)


@pytest.fixture(scope="session")
def p0_vf(p0_result):
    return build_value_function(p0_result)


@pytest.fixture(scope="session")
def amb_vf():
    # kappa = 0.2 with a linear reward, an interior case
    p = ModelParams(1.0, 2.0, 0.5, 0.2, RewardFunction.linear(0.3))
    return build_value_function(solve_shooting(p))


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion and print it."""
    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
