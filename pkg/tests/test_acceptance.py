"""Acceptance gate. Each test prints exactly one PASS/FAIL line for its criterion."""

import itertools
import json
import math
import random
import time
from collections import Counter

import pytest

from conftest import ACCEPTANCE_LINES, H_COMMUTE, cls, opn
from scrlab.cli import fuzz_script, main, run_rule
from scrlab.conflict import conflict_free_reads, conflict_free_writes
from scrlab.history import ALPHA, BETA, GAMMA, NO_RESP, enumerate_reorderings
from scrlab.openclose import EBADFD, OPEN, Fd, close, oc_member, oc_oracle
from scrlab.oracle_machine import Mode, machine_act, oracle_init, run_script
from scrlab.rule_machine import NoWitness, candidate_consequences, candidate_sequences, rule_init, rule_step
from scrlab.scenario import load_scenario
from scrlab.spec import SearchBounds, check_prefix_closed, sim_commutes

TIME_LIMIT = 60.0


@pytest.fixture
def verdict():
    start = time.perf_counter()
    box = {}

    def record(n, ok, detail):
        box["line"] = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
        box["ok"] = ok

    yield record
    elapsed = time.perf_counter() - start
    line = box.get("line", "criterion ?: FAIL (no verdict recorded)")
    if elapsed >= TIME_LIMIT:
        line = line.replace("PASS", "FAIL") + f" [took {elapsed:.1f}s]"
    print("\n" + line)
    ACCEPTANCE_LINES.append(line)


def _report(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*argv, "--out", str(out)])
    return code, json.loads(out.read_text())


def test_criterion_1_counterexample_reproduction(tmp_path, verdict):
    code, report = _report(tmp_path, "counterexample", "--witness-bound", "4")
    steps = report["steps"]
    letters = 2 * 4
    total = sum(letters ** k for k in range(5))
    distinct = {seq for seq, _, _ in candidate_sequences(4)}
    ok = (
        code == 0
        and all(c["ok"] for c in report["checks"])
        and len(steps) == 2
        and steps[0]["thread"] == BETA and steps[0]["response"] == 2 and steps[0]["mode"] == "conflict-free"
        and steps[1]["thread"] == ALPHA and steps[1]["invocation"] == {"thread": 0, "op": "close", "args": [1]}
        and steps[1]["no_witness"]["tried"] == total == len(distinct) == 4681
    )
    verdict(1, ok, f"NoWitness after {steps[-1].get('no_witness', {}).get('tried')} of {total} sequences")
    assert ok


def test_criterion_2_failure_consequences(verdict):
    s = rule_step(rule_init((), H_COMMUTE), BETA, OPEN, 4).state
    with pytest.raises(NoWitness) as info:
        rule_step(s, ALPHA, close(1), 4)
    cons = candidate_consequences(s.performed, [(ALPHA, close(1)), (ALPHA, OPEN)], 4, oc_member)
    tried = info.value.result.tried
    rejected = sum(c.rejected for c in cons)
    ok = len(cons) == tried and rejected == len(cons)
    verdict(2, ok, f"{rejected} of {len(cons)} candidate initializations forced a rejected response")
    assert ok


def test_criterion_3_oracle_machine_success(tmp_path, verdict):
    o = oc_oracle(3)
    s = oracle_init((), H_COMMUTE, oracle=o)
    trans = list(run_script(s, [(BETA, OPEN), (ALPHA, close(1))], o))
    responses = [t.action.response for t in trans]
    history = tuple(t.action for t in trans)
    code, report = _report(tmp_path, "counterexample", "--machine", "oracle")
    ok = (responses == [Fd(2), EBADFD] and o.member(history)
          and code == 0 and [st["response"] for st in report["steps"]] == [2, "EBADFD"]
          and report["outcome"]["member"])
    verdict(3, ok, f"responses {[str(r) for r in responses]}, member={o.member(history)}")
    assert ok


def test_criterion_4_machine_correct(verdict):
    scenarios = [load_scenario("counterexample_s33"), load_scenario("three_threads")]
    violations, no_resp, steps = 0, 0, 0
    for k in range(1000):
        sc = scenarios[k % 2]
        assert sc.fd_bound == 3
        rng = random.Random(f"0:{k}")
        script, history, _, err = fuzz_script(sc, rng, max_len=8)
        steps += len(script)
        assert 1 <= len(script) <= 8
        no_resp += sum(a.response is NO_RESP for a in history)
        if err is not None or not sc.oracle.member(history):
            violations += 1
    ok = violations == 0 and no_resp == 0
    verdict(4, ok, f"1000 scripts, {steps} steps, {violations} violations, {no_resp} NoResp")
    assert ok


def _open_regions(sizes, first_fd):
    for n in sizes:
        for threads in itertools.product((ALPHA, BETA), repeat=n):
            yield tuple(opn(t, first_fd + k) for k, t in enumerate(threads))


def test_criterion_5_machine_conflict_free(verdict):
    cf_steps, failures = 0, []
    for x in ((), (opn(ALPHA, 1),)):
        for y in _open_regions((2, 3), len(x) + 1):
            o = oc_oracle(len(x) + len(y))
            s0 = oracle_init(x, y, oracle=o, bounds=SearchBounds(len(y), 2))
            for order in enumerate_reorderings(y):
                script = [(a.thread, a.invocation) for a in x + order]
                for tr in run_script(s0, script, o):
                    if tr.kind is not Mode.CONFLICT_FREE:
                        continue
                    cf_steps += 1
                    w = conflict_free_writes(tr.thread, tr.before, tr.after)
                    r = conflict_free_reads(tr.thread, tr.invocation, tr.before, o, perturbations=100)
                    if not (w and r):
                        failures.append((x, y, order, w.evidence, r.evidence))
    # negative control: the oracle step of the counterexample input writes shared state
    o = oc_oracle(3)
    s = machine_act(oracle_init((), H_COMMUTE, oracle=o), BETA, OPEN, o).state
    after = machine_act(s, ALPHA, close(1), o)
    control = after.kind is Mode.ORACLE and not conflict_free_writes(ALPHA, s, after.state)
    ok = cf_steps > 0 and not failures and control
    verdict(5, ok, f"{cf_steps} conflict-free steps checked, {len(failures)} failures, "
                   f"negative control {'rejected' if control else 'accepted'}")
    assert ok


def test_criterion_6_sim_verdicts(verdict):
    o = oc_oracle(3)
    regions = list(_open_regions((1, 2, 3), 1))
    commuting = [y for y in regions if sim_commutes(o, (), y, SearchBounds(len(y), 2)).commutes]
    mixed = (opn(ALPHA, 1), cls(BETA, 1, "OK"))
    rep = sim_commutes(o, (), mixed, SearchBounds(2, 2))
    w = rep.witness
    replayable = (w is not None
                  and o.member(w.original) == w.member_original
                  and o.member(w.reordered) == w.member_reordered
                  and w.member_original != w.member_reordered)
    ok = len(commuting) == len(regions) and not rep.commutes and replayable
    verdict(6, ok, f"{len(commuting)}/{len(regions)} open-only regions commute, "
                   f"mixed region {rep.verdict.value}, witness replayable={replayable}")
    assert ok


def test_criterion_7_divergence_taxonomy(verdict):
    found = {}
    for name in ("divergence_before_Y", "divergence_after_Y"):
        sc = load_scenario(name)
        run = run_rule(sc, sc.input_script, sc.witness_bound)
        found[name] = (not run["no_witness"] and any("witness" in st for st in run["steps"])
                       and run["member"])
    ok = all(found.values())
    verdict(7, ok, ", ".join(f"{k} witness={v}" for k, v in found.items()))
    assert ok


def _multinomial(counts):
    return math.factorial(sum(counts)) // math.prod(math.factorial(c) for c in counts)


def test_criterion_8_combinatorics(verdict):
    mismatches, histories = 0, 0
    for n in range(8):
        for threads in itertools.product((ALPHA, BETA, GAMMA), repeat=n):
            h = tuple(opn(t, k + 1) for k, t in enumerate(threads))
            histories += 1
            expected = _multinomial(Counter(threads).values())
            if sum(1 for _ in enumerate_reorderings(h)) != expected:
                mismatches += 1
    closed = check_prefix_closed(oc_oracle(3), 3)
    ok = mismatches == 0 and bool(closed)
    verdict(8, ok, f"{histories} histories, {mismatches} count mismatches, "
                   f"prefix closure at length 3 {'holds' if closed else 'fails'}")
    assert ok
