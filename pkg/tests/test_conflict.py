import pytest

from conftest import H_COMMUTE, cls, opn
from scrlab.conflict import (
    conflict_free_reads,
    conflict_free_step,
    conflict_free_writes,
    diff_histories_tid_set,
    diff_states_tid_set,
    perturbed_states,
    ref_conflict_free_step,
    rule_conflict_free_writes,
)
from scrlab.history import ALPHA, BETA
from scrlab.openclose import OPEN, RefImplState, close, oc_oracle
from scrlab.oracle_machine import Mode, machine_act, oracle_init
from scrlab.rule_machine import rule_init, rule_step

O3 = oc_oracle(3)


def test_diff_histories():
    a = ((opn(ALPHA, 1),), ())
    b = ((opn(ALPHA, 1),), (opn(BETA, 2),))
    assert diff_histories_tid_set(a, a) == frozenset()
    assert diff_histories_tid_set(a, b) == {BETA}
    with pytest.raises(ValueError):
        diff_histories_tid_set(a, a[:1])


def test_diff_states_sees_both_per_thread_parts():
    s = oracle_init((), H_COMMUTE)
    s2 = machine_act(s, BETA, OPEN, O3).state
    assert diff_states_tid_set(s, s2) == {BETA}
    assert diff_states_tid_set(s, s) == frozenset()


def test_writes_of_conflict_free_step():
    s = oracle_init((), H_COMMUTE)
    s2 = machine_act(s, BETA, OPEN, O3).state
    assert conflict_free_writes(BETA, s, s2)
    assert not conflict_free_writes(ALPHA, s, s2)
    assert conflict_free_writes(ALPHA, s, s)


def test_writes_of_oracle_step_conflict():
    s = machine_act(oracle_init((), H_COMMUTE), BETA, OPEN, O3).state
    s2 = machine_act(s, ALPHA, close(1), O3).state
    check = conflict_free_writes(ALPHA, s, s2)
    assert not check
    assert "oracle_performed" in check.evidence or "mode" in check.evidence


def test_reads_of_conflict_free_step():
    s = oracle_init((), H_COMMUTE)
    assert conflict_free_reads(BETA, OPEN, s, O3, perturbations=100)
    s2 = machine_act(s, BETA, OPEN, O3).state
    assert conflict_free_reads(ALPHA, OPEN, s2, O3, perturbations=100)


def test_reads_of_oracle_step_depend_on_shared_history():
    s = oracle_init((opn(ALPHA, 1),), ())
    s = machine_act(s, BETA, OPEN, O3).state
    assert s.mode is Mode.ORACLE
    check = conflict_free_reads(ALPHA, close(1), s, O3, perturbations=100)
    assert not check
    assert check.evidence.startswith("perturbation")


def test_reads_flag_mode_transition():
    s = oracle_init((), H_COMMUTE)
    check = conflict_free_reads(ALPHA, close(1), s, O3)
    assert not check and "mode" in check.evidence


def test_perturbations_preserve_thread_and_mode():
    s = machine_act(oracle_init((), H_COMMUTE), BETA, OPEN, O3).state
    ps = list(perturbed_states(ALPHA, s, O3, 150, seed=3))
    assert len(ps) == 150
    assert all(p.mode is s.mode and p.y_copy[ALPHA] == s.y_copy[ALPHA]
               and p.y_performed[ALPHA] == s.y_performed[ALPHA] for p in ps)
    assert len(set(ps)) > 100
    assert ps == list(perturbed_states(ALPHA, s, O3, 150, seed=3))


def test_perturbation_count_validated():
    with pytest.raises(ValueError):
        conflict_free_reads(ALPHA, OPEN, oracle_init((), H_COMMUTE), O3, perturbations=0)


def test_single_thread_step_verdict():
    y = (opn(ALPHA, 1),)
    s = oracle_init((), y, threads=1)
    o = oc_oracle(3, threads=1)
    s2 = machine_act(s, ALPHA, OPEN, o).state
    v = conflict_free_step(ALPHA, OPEN, s, s2, o)
    assert v.conflict_free
    assert v.to_json()["conflict_free"] is True


def test_reference_implementation_steps_all_conflict():
    for s in (RefImplState(), RefImplState(1), RefImplState(2, frozenset({1}))):
        for t in (ALPHA, BETA):
            for i in (OPEN, close(1), close(2)):
                v = ref_conflict_free_step(t, i, s)
                assert not v.conflict_free, (s, t, i)


def test_rule_machine_writes_verdict():
    s = rule_init((), H_COMMUTE)
    s2 = rule_step(s, BETA, OPEN, 4).state
    v = rule_conflict_free_writes(BETA, s, s2)
    assert v.writes_ok and v.reads_ok is None
    assert v.to_json()["conflict_free"] is None
    x = rule_init((opn(ALPHA, 1),), ())
    x2 = rule_step(x, ALPHA, OPEN, 4).state
    assert not rule_conflict_free_writes(ALPHA, x, x2).writes_ok
