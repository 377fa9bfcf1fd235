"""End-to-end acceptance criteria at their stated tolerances.

Each test prints one ``[PASS]``/``[FAIL]`` line; the lines are also collected
and repeated in the terminal summary (see ``conftest.py``).  Failures are
reported as failures: nothing here is marked expected-to-fail.
"""

import pytest

from ptwalker import acceptance

LINES: list[str] = []


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    r = acceptance.run_criterion(number)
    line = r.line()
    LINES.append(line)
    print(line)
    assert r.passed, line
