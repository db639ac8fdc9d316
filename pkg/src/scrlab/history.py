"""Actions, histories and the enumeration primitives built on them.

A history is a plain tuple of :class:`Action` values in chronological order
(index 0 is the earliest action). Every action is a completed operation:
thread id, invocation and response together.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Any, Union

ALPHA, BETA, GAMMA = 0, 1, 2
THREAD_NAMES = ("α", "β", "γ", "δ")

DEFAULT_BOUND = 8


class BoundExceeded(ValueError):
    """An enumeration was asked to go past its configured bound."""


@dataclass(frozen=True, order=True)
class Invocation:
    op: str
    args: tuple[int, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.op
        return f"{self.op}({','.join(map(str, self.args))})"


class _NoResp:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NoResp"

    def __reduce__(self):
        return (_NoResp, ())


NO_RESP = _NoResp()


@dataclass(frozen=True)
class Resp:
    value: int | str

    def __str__(self) -> str:
        return str(self.value)


Response = Union[Resp, _NoResp]


@dataclass(frozen=True)
class Action:
    thread: int
    invocation: Invocation
    response: Response

    def __str__(self) -> str:
        return f"{thread_name(self.thread)}:{self.invocation}->{self.response}"


History = tuple[Action, ...]


def thread_name(t: int) -> str:
    return THREAD_NAMES[t] if 0 <= t < len(THREAD_NAMES) else f"t{t}"


def restrict(h: Sequence[Action], t: int) -> History:
    return tuple(a for a in h if a.thread == t)


def threads_of(h: Iterable[Action]) -> list[int]:
    return sorted({a.thread for a in h})


def is_reordering(h1: Sequence[Action], h2: Sequence[Action]) -> bool:
    if len(h1) != len(h2):
        return False
    for t in set(threads_of(h1)) | set(threads_of(h2)):
        if restrict(h1, t) != restrict(h2, t):
            return False
    return True


def enumerate_reorderings(h: Sequence[Action], bound: int = DEFAULT_BOUND) -> Iterator[History]:
    """Yield every reordering of ``h`` exactly once.

    Order is lexicographic in the sequence of thread ids picked at each
    position, so the first history yielded interleaves lower thread ids
    as early as possible.
    """
    h = tuple(h)
    if len(h) > bound:
        raise BoundExceeded(f"history of length {len(h)} exceeds enumeration bound {bound}")
    lanes = {t: restrict(h, t) for t in threads_of(h)}
    order = sorted(lanes)
    pos = dict.fromkeys(order, 0)
    out: list[Action] = []

    def rec() -> Iterator[History]:
        if len(out) == len(h):
            yield tuple(out)
            return
        for t in order:
            i = pos[t]
            if i < len(lanes[t]):
                out.append(lanes[t][i])
                pos[t] = i + 1
                yield from rec()
                pos[t] = i
                out.pop()

    yield from rec()


def prefixes(h: Sequence[Action]) -> list[History]:
    h = tuple(h)
    return [h[:k] for k in range(len(h) + 1)]


# JSON wire format ---------------------------------------------------------

def invocation_to_json(thread: int, inv: Invocation) -> dict[str, Any]:
    return {"thread": thread, "op": inv.op, "args": list(inv.args)}


def action_to_json(a: Action) -> dict[str, Any]:
    if not isinstance(a.response, Resp):
        raise ValueError("NoResp cannot appear in a stored history")
    d = invocation_to_json(a.thread, a.invocation)
    d["resp"] = a.response.value
    return d


def history_to_json(h: Sequence[Action]) -> list[dict[str, Any]]:
    return [action_to_json(a) for a in h]


def _parse_thread(obj: dict) -> int:
    t = obj["thread"]
    if not isinstance(t, int) or isinstance(t, bool) or t < 0:
        raise ValueError(f"thread must be a non-negative integer, got {t!r}")
    return t


def _parse_invocation(obj: dict) -> Invocation:
    op = obj["op"]
    if not isinstance(op, str) or not op:
        raise ValueError(f"op must be a non-empty string, got {op!r}")
    args = obj.get("args", [])
    if not isinstance(args, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in args):
        raise ValueError(f"args must be a list of integers, got {args!r}")
    return Invocation(op, tuple(args))


def invocation_from_json(obj: dict) -> tuple[int, Invocation]:
    return _parse_thread(obj), _parse_invocation(obj)


def action_from_json(obj: dict) -> Action:
    resp = obj["resp"]
    if isinstance(resp, bool) or not isinstance(resp, (int, str)):
        raise ValueError(f"resp must be a string or integer, got {resp!r}")
    return Action(_parse_thread(obj), _parse_invocation(obj), Resp(resp))


def history_from_json(data: list) -> History:
    if not isinstance(data, list):
        raise ValueError("history must be a JSON array")
    return tuple(action_from_json(obj) for obj in data)
