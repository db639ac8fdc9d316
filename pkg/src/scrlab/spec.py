"""Specification oracles and brute-force SI / SIM commutativity checkers."""

from __future__ import annotations

import enum
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .history import (
    DEFAULT_BOUND,
    Action,
    BoundExceeded,
    History,
    Invocation,
    Response,
    enumerate_reorderings,
)

# Upper limit on the number of histories check_prefix_closed will build.
MAX_PREFIX_CHECK = 5_000_000


@dataclass(frozen=True)
class SpecOracle:
    """A decidable specification over finite alphabets.

    ``member`` must be pure. ``threads`` is the number of thread ids the
    suffix and history enumerators range over.
    """

    member: Callable[[History], bool]
    responses: tuple[Response, ...]
    invocations: tuple[Invocation, ...]
    valid_invocation: Callable[[History, int, Invocation], bool]
    threads: int = 2
    name: str = "spec"

    def __post_init__(self):
        if not self.responses:
            raise ValueError("a specification needs at least one response")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def actions(self) -> tuple[Action, ...]:
        """The action alphabet ordered by thread, then invocation, then response."""
        return tuple(
            Action(t, i, r)
            for t in range(self.threads)
            for i in self.invocations
            for r in self.responses
        )


def oracle_query(o: SpecOracle, h: Sequence[Action]) -> bool:
    return bool(o.member(tuple(h)))


class Verdict(enum.Enum):
    COMMUTES = "Commutes"
    FAILS_TO_COMMUTE = "FailsToCommute"


@dataclass(frozen=True)
class Witness:
    """Evidence that a region fails to commute.

    ``original`` is x ⧺ prefix ⧺ suffix and ``reordered`` is
    x ⧺ reordering ⧺ suffix; their memberships disagree.
    """

    prefix: History
    reordering: History
    suffix: History
    original: History
    reordered: History
    member_original: bool
    member_reordered: bool


@dataclass(frozen=True)
class CommutativityReport:
    verdict: Verdict
    witness: Witness | None = None
    checked: int = 0

    @property
    def commutes(self) -> bool:
        return self.verdict is Verdict.COMMUTES


@dataclass(frozen=True)
class SearchBounds:
    max_region_len: int = 4
    max_suffix_len: int = 2

    def __post_init__(self):
        if self.max_region_len < 0 or self.max_suffix_len < 0:
            raise ValueError("search bounds must be non-negative")
        if self.max_region_len > DEFAULT_BOUND:
            raise BoundExceeded(f"max_region_len {self.max_region_len} exceeds {DEFAULT_BOUND}")


def _first_disagreement(
    o: SpecOracle,
    base: History,
    alt: History,
    max_suffix_len: int,
    prune: bool,
) -> tuple[History | None, bool, bool, int]:
    """Search suffixes z in length-then-lexicographic order for
    member(base ⧺ z) != member(alt ⧺ z).

    With ``prune`` a suffix rejected under both bases is not extended;
    prefix closure makes every extension a non-member on both sides too.
    """
    alphabet = o.actions()
    frontier: list[History] = [()]
    checked = 0
    for depth in range(max_suffix_len + 1):
        live: list[History] = []
        for z in frontier:
            checked += 1
            m1 = o.member(base + z)
            m2 = o.member(alt + z)
            if m1 != m2:
                return z, m1, m2, checked
            if m1 or not prune:
                live.append(z)
        if depth == max_suffix_len:
            break
        frontier = [z + (a,) for z in live for a in alphabet]
    return None, False, False, checked


def si_commutes(
    o: SpecOracle,
    x: Sequence[Action],
    y: Sequence[Action],
    b: SearchBounds,
    *,
    prune: bool = True,
    _prefix: History | None = None,
) -> CommutativityReport:
    x, y = tuple(x), tuple(y)
    if len(y) > b.max_region_len:
        raise BoundExceeded(f"region length {len(y)} exceeds max_region_len {b.max_region_len}")
    checked = 0
    for y2 in enumerate_reorderings(y):
        if y2 == y:
            continue
        z, m1, m2, n = _first_disagreement(o, x + y, x + y2, b.max_suffix_len, prune)
        checked += n
        if z is not None:
            w = Witness(
                prefix=y if _prefix is None else _prefix,
                reordering=y2,
                suffix=z,
                original=x + y + z,
                reordered=x + y2 + z,
                member_original=m1,
                member_reordered=m2,
            )
            return CommutativityReport(Verdict.FAILS_TO_COMMUTE, w, checked)
    return CommutativityReport(Verdict.COMMUTES, None, checked)


def sim_commutes(
    o: SpecOracle,
    x: Sequence[Action],
    y: Sequence[Action],
    b: SearchBounds,
    *,
    prune: bool = True,
) -> CommutativityReport:
    """Check that every prefix of every reordering of ``y`` SI-commutes after ``x``."""
    x, y = tuple(x), tuple(y)
    if len(y) > b.max_region_len:
        raise BoundExceeded(f"region length {len(y)} exceeds max_region_len {b.max_region_len}")
    seen: set[History] = set()
    checked = 0
    for r in enumerate_reorderings(y):
        for k in range(len(r) + 1):
            p = r[:k]
            if p in seen:
                continue
            seen.add(p)
            rep = si_commutes(o, x, p, b, prune=prune, _prefix=p)
            checked += rep.checked
            if not rep.commutes:
                return CommutativityReport(rep.verdict, rep.witness, checked)
    return CommutativityReport(Verdict.COMMUTES, None, checked)


@dataclass(frozen=True)
class PrefixClosureResult:
    ok: bool
    witness: tuple[History, History] | None = None
    checked: int = field(default=0, compare=False)

    def __bool__(self) -> bool:
        return self.ok


def check_prefix_closed(o: SpecOracle, max_len: int) -> PrefixClosureResult:
    """Exhaustively look for a member history whose one-shorter prefix is not a member.

    Checking immediate prefixes is enough: a non-member prefix anywhere
    below a member forces a non-member to member step somewhere on the chain.
    """
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    alphabet = o.actions()
    if max_len > DEFAULT_BOUND or len(alphabet) ** max_len > MAX_PREFIX_CHECK:
        raise BoundExceeded(f"{len(alphabet)}^{max_len} histories is past the check limit")
    if not o.member(()):
        return PrefixClosureResult(False, ((), ()), 1)
    level: dict[History, bool] = {(): True}
    checked = 1
    for _ in range(max_len):
        nxt: dict[History, bool] = {}
        for h, parent_ok in level.items():
            for a in alphabet:
                h2 = h + (a,)
                ok = bool(o.member(h2))
                checked += 1
                if ok and not parent_ok:
                    return PrefixClosureResult(False, (h2, h), checked)
                nxt[h2] = ok
        level = nxt
    return PrefixClosureResult(True, None, checked)
