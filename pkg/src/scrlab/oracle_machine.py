"""The revised construction: replay X, replay each thread's share of Y
without touching shared state, and fall back to a specification oracle
once the input diverges."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, replace

from .history import Action, History, Invocation, restrict
from .spec import CommutativityReport, SearchBounds, SpecOracle, sim_commutes


class Mode(enum.Enum):
    REPLAY = "replay"
    CONFLICT_FREE = "conflict-free"
    ORACLE = "oracle"


class SimCommutativityRejected(ValueError):
    def __init__(self, report: CommutativityReport):
        super().__init__("Y does not SIM-commute in X ⧺ Y")
        self.report = report


class NoValidResponse(RuntimeError):
    pass


class UnknownInvocation(ValueError):
    pass


@dataclass(frozen=True)
class OracleMachineState:
    x_copy: History
    y_copy: tuple[History, ...]
    x_performed: History
    y_performed: tuple[History, ...]
    oracle_performed: History
    mode: Mode

    @property
    def threads(self) -> int:
        return len(self.y_copy)


@dataclass(frozen=True)
class StepResult:
    state: OracleMachineState
    action: Action
    # which copy the step consumed; differs from state.mode on the last X step
    kind: Mode = Mode.ORACLE


def oracle_init(
    x: Sequence[Action],
    y: Sequence[Action],
    threads: int = 2,
    oracle: SpecOracle | None = None,
    bounds: SearchBounds | None = None,
) -> OracleMachineState:
    """Build the initial state for history x ⧺ y.

    When ``oracle`` is given, y must SIM-commute after x within ``bounds``
    or :class:`SimCommutativityRejected` is raised.
    """
    x, y = tuple(x), tuple(y)
    if any(not 0 <= a.thread < threads for a in x + y):
        raise ValueError(f"history uses a thread outside 0..{threads - 1}")
    if oracle is not None:
        report = sim_commutes(oracle, x, y, bounds or SearchBounds(max(len(y), 0), 2))
        if not report.commutes:
            raise SimCommutativityRejected(report)
    return OracleMachineState(
        x_copy=x,
        y_copy=tuple(restrict(y, t) for t in range(threads)),
        x_performed=(),
        y_performed=((),) * threads,
        oracle_performed=(),
        mode=Mode.REPLAY if x else Mode.CONFLICT_FREE,
    )


def _head_matches(copy: History, t: int, i: Invocation) -> bool:
    return bool(copy) and copy[0].thread == t and copy[0].invocation == i


def next_mode(s: OracleMachineState, t: int, i: Invocation) -> Mode:
    if s.mode is Mode.ORACLE:
        return Mode.ORACLE
    if s.mode is Mode.REPLAY and s.x_copy:
        if not _head_matches(s.x_copy, t, i):
            return Mode.ORACLE
        # the last X action hands off straight into conflict-free mode
        return Mode.CONFLICT_FREE if len(s.x_copy) == 1 else Mode.REPLAY
    return Mode.CONFLICT_FREE if _head_matches(s.y_copy[t], t, i) else Mode.ORACLE


def consistent_history(s: OracleMachineState) -> History:
    """X_performed, then each thread's Y_performed in thread order, then the oracle's actions."""
    h = s.x_performed
    for part in s.y_performed:
        h = h + part
    return h + s.oracle_performed


def machine_act(s: OracleMachineState, t: int, i: Invocation, o: SpecOracle) -> StepResult:
    if not 0 <= t < s.threads:
        raise ValueError(f"thread {t} outside 0..{s.threads - 1}")
    if i not in o.invocations:
        raise UnknownInvocation(f"{i} is not in the oracle's invocation alphabet")
    mode = next_mode(s, t, i)

    if mode is Mode.ORACLE:
        prior = consistent_history(s)
        for r in o.responses:
            a = Action(t, i, r)
            if o.member(prior + (a,)):
                new = replace(s, mode=Mode.ORACLE, oracle_performed=s.oracle_performed + (a,))
                return StepResult(new, a, Mode.ORACLE)
        raise NoValidResponse(f"no response to {i} on thread {t} keeps the history in the spec")

    if s.mode is Mode.REPLAY and s.x_copy:
        a = s.x_copy[0]
        new = replace(s, x_copy=s.x_copy[1:], x_performed=s.x_performed + (a,), mode=mode)
        return StepResult(new, a, Mode.REPLAY)

    a = s.y_copy[t][0]
    y_copy = list(s.y_copy)
    y_perf = list(s.y_performed)
    y_copy[t] = y_copy[t][1:]
    y_perf[t] = y_perf[t] + (a,)
    new = replace(s, y_copy=tuple(y_copy), y_performed=tuple(y_perf), mode=mode)
    return StepResult(new, a, Mode.CONFLICT_FREE)


@dataclass(frozen=True)
class Transition:
    before: OracleMachineState
    thread: int
    invocation: Invocation
    kind: Mode
    after: OracleMachineState
    action: Action


def run_script(
    s: OracleMachineState,
    script: Iterable[tuple[int, Invocation]],
    o: SpecOracle,
) -> Iterator[Transition]:
    for t, i in script:
        step = machine_act(s, t, i, o)
        yield Transition(s, t, i, step.kind, step.state, step.action)
        s = step.state
