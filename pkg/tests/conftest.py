import pytest

from scrlab.history import ALPHA, BETA, GAMMA, Action, Invocation, Resp
from scrlab.openclose import OPEN, close, oc_oracle


def act(t, inv, resp):
    if isinstance(inv, str):
        inv = Invocation(inv)
    return Action(t, inv, resp if isinstance(resp, Resp) else Resp(resp))


def opn(t, fd):
    return act(t, OPEN, fd)


def cls(t, fd, resp):
    return act(t, close(fd), resp)


# histories from the open/close example
H1 = (opn(ALPHA, 1), opn(BETA, 2), cls(ALPHA, 1, "OK"))
H2 = (opn(ALPHA, 1), cls(BETA, 2, "EBADFD"))
H3 = (opn(ALPHA, 1), cls(ALPHA, 1, "OK"), cls(ALPHA, 1, "ECLOSEDFD"))
H_COMMUTE = (opn(ALPHA, 1), opn(BETA, 2))


# PASS/FAIL lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def oc3():
    return oc_oracle(3)


__all__ = ["act", "opn", "cls", "H1", "H2", "H3", "H_COMMUTE", "ALPHA", "BETA", "GAMMA"]
