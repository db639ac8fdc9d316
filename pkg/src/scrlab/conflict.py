"""Executable conflict-freedom checks over oracle-machine state snapshots.

Writes are checked exactly. Reads quantify over every state that agrees with
the calling thread's components and the mode; that quantifier is approximated
by a structured-then-random sweep of perturbed states, so a ``False`` reads
verdict is a genuine counterexample while ``True`` holds only for the states
tried.
"""

from __future__ import annotations

import random
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, replace

from .history import Action, History, Invocation
from .openclose import RefImplState, ref_step
from .oracle_machine import OracleMachineState, machine_act
from .spec import SpecOracle


def diff_histories_tid_set(m1: Sequence[History], m2: Sequence[History]) -> frozenset[int]:
    if len(m1) != len(m2):
        raise ValueError("per-thread maps cover different thread sets")
    return frozenset(t for t, (a, b) in enumerate(zip(m1, m2)) if a != b)


def diff_states_tid_set(s1: OracleMachineState, s2: OracleMachineState) -> frozenset[int]:
    return (diff_histories_tid_set(s1.y_performed, s2.y_performed)
            | diff_histories_tid_set(s1.y_copy, s2.y_copy))


@dataclass(frozen=True)
class ClauseCheck:
    ok: bool
    evidence: str | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ConflictVerdict:
    writes_ok: bool
    reads_ok: bool | None
    evidence: str | None = None
    perturbations: int = 0

    @property
    def conflict_free(self) -> bool:
        return bool(self.writes_ok and self.reads_ok)

    def to_json(self) -> dict:
        return {
            "conflict_free": None if self.reads_ok is None else self.conflict_free,
            "writes_ok": self.writes_ok,
            "reads_ok": self.reads_ok,
            "evidence": self.evidence,
            "perturbations": self.perturbations,
        }


_GLOBALS = ("mode", "x_copy", "x_performed", "oracle_performed")


def conflict_free_writes(t: int, s1: OracleMachineState, s2: OracleMachineState) -> ClauseCheck:
    # the diff may be empty: a step that writes nothing cannot conflict
    for name in _GLOBALS:
        if getattr(s1, name) != getattr(s2, name):
            return ClauseCheck(False, f"global component {name} changed")
    touched = diff_states_tid_set(s1, s2)
    if not touched <= {t}:
        others = sorted(touched - {t})
        return ClauseCheck(False, f"per-thread state of threads {others} changed by a step on thread {t}")
    return ClauseCheck(True)


def _random_history(rng: random.Random, o: SpecOracle, threads: Sequence[int], max_len: int = 3) -> History:
    return tuple(
        Action(rng.choice(threads), rng.choice(o.invocations), rng.choice(o.responses))
        for _ in range(rng.randint(0, max_len))
    )


def perturbed_states(
    t: int,
    s: OracleMachineState,
    o: SpecOracle,
    count: int,
    seed: int = 0,
) -> Iterator[OracleMachineState]:
    """Yield ``count`` states that share ``s``'s mode and thread ``t``'s
    Y_copy / Y_performed but differ elsewhere.

    Structured edits come first (clearing or extending one component at a
    time), then random fills.
    """
    others = [u for u in range(s.threads) if u != t]
    all_threads = list(range(s.threads))
    filler = o.actions()[0] if o.actions() else None

    def with_thread(field: str, u: int, value: History) -> OracleMachineState:
        m = list(getattr(s, field))
        m[u] = value
        return replace(s, **{field: tuple(m)})

    structured: list[OracleMachineState] = []
    blank = replace(
        s,
        x_copy=(), x_performed=(), oracle_performed=(),
        y_copy=tuple(s.y_copy[u] if u == t else () for u in all_threads),
        y_performed=tuple(s.y_performed[u] if u == t else () for u in all_threads),
    )
    structured.append(blank)
    for name in ("x_copy", "x_performed", "oracle_performed"):
        structured.append(replace(s, **{name: ()}))
        if filler is not None:
            structured.append(replace(s, **{name: getattr(s, name) + (filler,)}))
    for u in others:
        for name in ("y_copy", "y_performed"):
            structured.append(with_thread(name, u, ()))
            structured.append(with_thread(name, u, s.y_copy[t]))
            if filler is not None:
                structured.append(with_thread(name, u, getattr(s, name)[u] + (replace(filler, thread=u),)))

    produced = 0
    for p in structured:
        if produced == count:
            return
        produced += 1
        yield p

    rng = random.Random(seed)
    while produced < count:
        y_copy = list(s.y_copy)
        y_perf = list(s.y_performed)
        for u in others:
            y_copy[u] = _random_history(rng, o, [u])
            y_perf[u] = _random_history(rng, o, [u])
        produced += 1
        yield replace(
            s,
            x_copy=_random_history(rng, o, all_threads),
            x_performed=_random_history(rng, o, all_threads),
            oracle_performed=_random_history(rng, o, all_threads),
            y_copy=tuple(y_copy),
            y_performed=tuple(y_perf),
        )


def _outcome(s: OracleMachineState, t: int, i: Invocation, o: SpecOracle):
    try:
        step = machine_act(s, t, i, o)
    except Exception as exc:  # a perturbed state may be one no run can reach
        return None, f"{type(exc).__name__}: {exc}"
    return step, None


def conflict_free_reads(
    t: int,
    i: Invocation,
    s: OracleMachineState,
    o: SpecOracle,
    perturbations: int = 100,
    seed: int = 0,
) -> ClauseCheck:
    if perturbations < 1:
        raise ValueError("perturbations must be at least 1")
    base, err = _outcome(s, t, i, o)
    if base is None:
        return ClauseCheck(False, f"step fails from the unperturbed state: {err}")
    if base.state.mode is not s.mode:
        return ClauseCheck(False, f"step moves mode {s.mode.value} -> {base.state.mode.value}")
    for k, s2 in enumerate(perturbed_states(t, s, o, perturbations, seed)):
        step, err = _outcome(s2, t, i, o)
        if step is None:
            return ClauseCheck(False, f"perturbation {k}: {err}")
        if step.action != base.action:
            return ClauseCheck(False, f"perturbation {k}: returns {step.action} instead of {base.action}")
        if step.state.mode is not s.mode:
            return ClauseCheck(False, f"perturbation {k}: mode moves to {step.state.mode.value}")
    return ClauseCheck(True)


def conflict_free_step(
    t: int,
    i: Invocation,
    s1: OracleMachineState,
    s2: OracleMachineState,
    o: SpecOracle,
    perturbations: int = 100,
    seed: int = 0,
) -> ConflictVerdict:
    w = conflict_free_writes(t, s1, s2)
    r = conflict_free_reads(t, i, s1, o, perturbations, seed)
    evidence = "; ".join(e for e in (w.evidence, r.evidence) if e) or None
    return ConflictVerdict(w.ok, r.ok, evidence, perturbations)


def ref_conflict_free_step(
    t: int,
    i: Invocation,
    s: RefImplState,
    perturbations: int = 100,
    seed: int = 0,
    fd_bound: int = 3,
) -> ConflictVerdict:
    """Same analysis for the reference implementation, whose whole state
    (gfd and closed) is global: any write conflicts, and any response that
    depends on that state is a conflicting read."""
    s_after, r = ref_step(s, t, i)
    writes_ok = s_after == s
    evidence = [] if writes_ok else [f"global state changed {s} -> {s_after}"]

    def states() -> Iterator[RefImplState]:
        for gfd in range(fd_bound + 1):
            for mask in range(1 << gfd):
                yield RefImplState(gfd, frozenset(k + 1 for k in range(gfd) if mask >> k & 1))
        rng = random.Random(seed)
        while True:
            gfd = rng.randint(0, fd_bound + 2)
            yield RefImplState(gfd, frozenset(k for k in range(1, gfd + 1) if rng.random() < 0.5))

    reads_ok = True
    for k, s2 in zip(range(perturbations), states()):
        _, r2 = ref_step(s2, t, i)
        if r2 != r:
            reads_ok = False
            evidence.append(f"perturbation {k} ({s2}) returns {r2} instead of {r}")
            break
    return ConflictVerdict(writes_ok, reads_ok, "; ".join(evidence) or None, perturbations)


def rule_conflict_free_writes(t: int, s1, s2) -> ConflictVerdict:
    """Writes-only verdict for a rule-machine step: h[t] and commute[t] are
    thread t's state, the reference state is global. Reads are not analysed."""
    if s1.refstate != s2.refstate:
        return ConflictVerdict(False, None, "reference implementation state changed")
    touched = {u for u in range(len(s1.h)) if s1.h[u] != s2.h[u] or s1.commute[u] != s2.commute[u]}
    if not touched <= {t}:
        return ConflictVerdict(False, None, f"replay lists of threads {sorted(touched - {t})} changed")
    return ConflictVerdict(True, None)
