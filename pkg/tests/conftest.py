import logging

import pytest

CRITERIA = {}


def record(number, passed, detail):
    """Store one acceptance verdict; sub-checks of a criterion are combined."""
    prev = CRITERIA.get(number)
    if prev is None:
        CRITERIA[number] = (passed, [detail])
    else:
        CRITERIA[number] = (prev[0] and passed, prev[1] + [detail])
    print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, details = CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if passed else 'FAIL'} ({'; '.join(details)})"
        )


@pytest.fixture(autouse=True)
def _quiet_singular_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="fsse.categorization")
    yield


from hypothesis import settings  # noqa: E402

# fixed example streams keep property tests reproducible run to run
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")
