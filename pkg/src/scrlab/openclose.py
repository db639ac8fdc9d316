"""File-descriptor open/close specification and its non-scalable reference implementation."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .history import Action, History, Invocation, Resp
from .spec import SpecOracle

OPEN = Invocation("open")
OK = Resp("OK")
EBADFD = Resp("EBADFD")
ECLOSEDFD = Resp("ECLOSEDFD")
ERROR_CODES = (OK, EBADFD, ECLOSEDFD)

DEFAULT_FD_BOUND = 3


class UnknownInvocation(ValueError):
    pass


def close(fd: int) -> Invocation:
    return Invocation("close", (fd,))


def Fd(n: int) -> Resp:
    if n <= 0:
        raise ValueError("file descriptors are positive")
    return Resp(n)


def is_fd(r) -> bool:
    return isinstance(r, Resp) and isinstance(r.value, int) and not isinstance(r.value, bool)


class FdStatus(enum.Enum):
    NEVER_OPENED = "never-opened"
    OPEN = "open"
    CLOSED = "closed"


def _is_open(i: Invocation) -> bool:
    return i.op == "open" and not i.args


def _is_close(i: Invocation) -> bool:
    return i.op == "close" and len(i.args) == 1


def oc_member(h: Sequence[Action]) -> bool:
    status: dict[int, FdStatus] = {}
    for a in h:
        i, r = a.invocation, a.response
        if _is_open(i):
            # an fd is never handed out twice, even after it is closed
            if not is_fd(r) or r.value <= 0 or r.value in status:
                return False
            status[r.value] = FdStatus.OPEN
        elif _is_close(i):
            fd = i.args[0]
            st = status.get(fd, FdStatus.NEVER_OPENED)
            if st is FdStatus.OPEN:
                if r != OK:
                    return False
                status[fd] = FdStatus.CLOSED
            elif st is FdStatus.CLOSED:
                if r != ECLOSEDFD:
                    return False
            elif r != EBADFD:
                return False
        else:
            return False
    return True


def oc_invocations(fd_bound: int = DEFAULT_FD_BOUND) -> tuple[Invocation, ...]:
    return (OPEN,) + tuple(close(k) for k in range(1, fd_bound + 1))


def oc_oracle(fd_bound: int = DEFAULT_FD_BOUND, threads: int = 2) -> SpecOracle:
    if fd_bound < 1:
        raise ValueError("fd_bound must be at least 1")
    invocations = oc_invocations(fd_bound)
    responses = tuple(Fd(k) for k in range(1, fd_bound + 1)) + ERROR_CODES

    def valid_invocation(h: History, t: int, i: Invocation) -> bool:
        if not 0 <= t < threads or i not in invocations:
            return False
        if _is_open(i):
            # with a finite response alphabet the fds run out
            return sum(1 for a in h if _is_open(a.invocation)) < fd_bound
        return True

    return SpecOracle(
        member=oc_member,
        responses=responses,
        invocations=invocations,
        valid_invocation=valid_invocation,
        threads=threads,
        name=f"openclose(fd_bound={fd_bound})",
    )


@dataclass(frozen=True)
class RefImplState:
    gfd: int = 0
    closed: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.gfd < 0 or any(not 0 < fd <= self.gfd for fd in self.closed):
            raise ValueError(f"inconsistent reference state gfd={self.gfd} closed={set(self.closed)}")


REF_INITIAL = RefImplState()


def ref_step(s: RefImplState, t: int, i: Invocation) -> tuple[RefImplState, Resp]:
    if _is_open(i):
        return RefImplState(s.gfd + 1, s.closed), Resp(s.gfd + 1)
    if _is_close(i):
        fd = i.args[0]
        if 0 < fd <= s.gfd and fd not in s.closed:
            return RefImplState(s.gfd, s.closed | {fd}), OK
        if fd in s.closed:
            return s, ECLOSEDFD
        return s, EBADFD
    raise UnknownInvocation(f"reference implementation does not implement {i}")


def ref_run(invs: Iterable[tuple[int, Invocation]], s: RefImplState = REF_INITIAL) -> tuple[RefImplState, History]:
    out = []
    for t, i in invs:
        s, r = ref_step(s, t, i)
        out.append(Action(t, i, r))
    return s, tuple(out)


def ref_exhibits(invs: Iterable[tuple[int, Invocation]]) -> History:
    return ref_run(invs)[1]
