"""The original replay / conflict-free / emulate construction driven by a reference implementation.

Each thread carries its own replay list ``X ⧺ [COMMUTE] ⧺ Y|t``. Once a thread
diverges, the machine must bring the reference implementation to a state
consistent with everything performed so far. When the performed history is
one the reference implementation cannot exhibit, no such witness exists and
the step fails with :class:`NoWitness`.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, replace
from typing import Union

from .history import Action, History, Invocation, Response, is_reordering, restrict
from .openclose import (
    DEFAULT_FD_BOUND,
    REF_INITIAL,
    RefImplState,
    oc_invocations,
    ref_run,
    ref_step,
)


class _Marker:
    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return self.name


COMMUTE = _Marker("COMMUTE")
EMULATE = _Marker("EMULATE")

ReplayEntry = Union[Action, _Marker]


@dataclass(frozen=True)
class RuleMachineState:
    h: tuple                         # per thread: tuple of ReplayEntry, or EMULATE
    commute: tuple[bool, ...]
    refstate: RefImplState = REF_INITIAL
    # Bookkeeping the witness search needs: everything returned so far, and
    # how many of those actions were replayed before the commutative region.
    performed: History = ()
    replayed: int = 0
    alphabet: tuple[Invocation, ...] = field(default_factory=oc_invocations)

    @property
    def threads(self) -> int:
        return len(self.h)

    @property
    def emulating(self) -> bool:
        return any(lst is EMULATE for lst in self.h)


def rule_init(
    x: Sequence[Action],
    y: Sequence[Action],
    threads: int = 2,
    fd_bound: int = DEFAULT_FD_BOUND,
) -> RuleMachineState:
    x, y = tuple(x), tuple(y)
    return RuleMachineState(
        h=tuple(x + (COMMUTE,) + restrict(y, t) for t in range(threads)),
        commute=(False,) * threads,
        alphabet=oc_invocations(fd_bound),
    )


@dataclass(frozen=True)
class Found:
    witness: tuple[tuple[int, Invocation], ...]
    tried: int


@dataclass(frozen=True)
class NotFound:
    bound: int
    tried: int


WitnessResult = Union[Found, NotFound]


class NoWitness(Exception):
    """No invocation sequence within the bound reproduces the performed history."""

    def __init__(self, state: RuleMachineState, thread: int, invocation: Invocation,
                 target: History, result: NotFound):
        super().__init__(
            f"no witness for {[str(a) for a in target]} within {result.bound} invocations "
            f"({result.tried} sequences tried)"
        )
        self.state = state
        self.thread = thread
        self.invocation = invocation
        self.target = target
        self.result = result


def _consistent(exhibited: Sequence[Action], target: History, region_start: int) -> bool:
    n = len(target)
    if len(exhibited) < n:
        return False
    return (tuple(exhibited[:region_start]) == target[:region_start]
            and is_reordering(exhibited[region_start:n], target[region_start:]))


def candidate_sequences(
    wb: int,
    threads: int = 2,
    alphabet: Sequence[Invocation] | None = None,
) -> Iterator[tuple[tuple[tuple[int, Invocation], ...], RefImplState, History]]:
    """Yield (sequence, reference state, exhibited history) for every invocation
    sequence of length <= wb, ordered by length then lexicographically over
    (thread, invocation) pairs."""
    letters = [(t, i) for t in range(threads) for i in (alphabet or oc_invocations())]

    def rec(depth, seq, s, hist):
        if depth == 0:
            yield tuple(seq), s, tuple(hist)
            return
        for t, i in letters:
            s2, r = ref_step(s, t, i)
            seq.append((t, i))
            hist.append(Action(t, i, r))
            yield from rec(depth - 1, seq, s2, hist)
            seq.pop()
            hist.pop()

    for length in range(wb + 1):
        yield from rec(length, [], REF_INITIAL, [])


def find_witness(
    target: Sequence[Action],
    wb: int,
    threads: int = 2,
    alphabet: Sequence[Invocation] | None = None,
    region_start: int | None = None,
) -> WitnessResult:
    """Search for an invocation sequence whose exhibited history starts with ``target``.

    Actions at index ``region_start`` and later belong to the commutative
    region and may come out in any reordering; responses must still match
    exactly. The default leaves no room for reordering.
    """
    target = tuple(target)
    if wb < 0:
        raise ValueError("witness bound must be non-negative")
    start = len(target) if region_start is None else region_start
    tried = 0
    for seq, _, exhibited in candidate_sequences(wb, threads, alphabet):
        tried += 1
        if _consistent(exhibited, target, start):
            return Found(seq, tried)
    return NotFound(wb, tried)


@dataclass(frozen=True)
class RuleStep:
    state: RuleMachineState
    response: Response
    mode: str
    witness: Found | None = None


def rule_step(s: RuleMachineState, t: int, i: Invocation, wb: int) -> RuleStep:
    if not 0 <= t < s.threads:
        raise ValueError(f"thread {t} outside 0..{s.threads - 1}")
    h = list(s.h)
    commute = list(s.commute)
    mine = h[t]
    if mine is not EMULATE and mine and mine[0] is COMMUTE:
        commute[t] = True
        mine = mine[1:]
        h[t] = mine
    refstate = s.refstate
    replayed = s.replayed
    found = None

    head = mine[0] if mine is not EMULATE and mine else None
    if isinstance(head, Action) and head.thread == t and head.invocation == i:
        r = head.response
        if commute[t]:
            h[t] = mine[1:]
            mode = "conflict-free"
        else:
            h = [lst[1:] for lst in h]
            replayed += 1
            mode = "replay"
    else:
        if mine is not EMULATE:
            result = find_witness(s.performed, wb, s.threads, s.alphabet, region_start=replayed)
            if isinstance(result, NotFound):
                at_failure = replace(s, h=tuple(h), commute=tuple(commute))
                raise NoWitness(at_failure, t, i, s.performed, result)
            found = result
            refstate, _ = ref_run(result.witness)
            h = [EMULATE] * s.threads
        refstate, r = ref_step(refstate, t, i)
        mode = "emulate"

    new = replace(
        s,
        h=tuple(h),
        commute=tuple(commute),
        refstate=refstate,
        performed=s.performed + (Action(t, i, r),),
        replayed=replayed,
    )
    return RuleStep(new, r, mode, found)


@dataclass(frozen=True)
class Consequence:
    candidate: tuple[tuple[int, Invocation], ...]
    history: History
    rejected_at: int | None

    @property
    def rejected(self) -> bool:
        return self.rejected_at is not None


def candidate_consequences(
    performed: Sequence[Action],
    continuation: Sequence[tuple[int, Invocation]],
    wb: int,
    member,
    threads: int = 2,
    alphabet: Sequence[Invocation] | None = None,
) -> list[Consequence]:
    """For every candidate initialization of the reference implementation,
    run ``continuation`` from it and record the first response ``member``
    rejects when appended to ``performed``."""
    performed = tuple(performed)
    out = []
    for seq, s, _ in candidate_sequences(wb, threads, alphabet):
        hist = performed
        rejected_at = None
        for k, (t, i) in enumerate(continuation):
            s, r = ref_step(s, t, i)
            hist = hist + (Action(t, i, r),)
            if rejected_at is None and not member(hist):
                rejected_at = k
        out.append(Consequence(seq, hist, rejected_at))
    return out
