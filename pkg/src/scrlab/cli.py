"""Command-line front end.

Exit codes: 0 success, 1 the run found a failure (NoWitness, spec violation,
non-commuting region), 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .conflict import conflict_free_step, rule_conflict_free_writes
from .history import (
    NO_RESP,
    History,
    Invocation,
    Resp,
    history_to_json,
    invocation_to_json,
    thread_name,
)
from .openclose import EBADFD, Fd, close, ref_exhibits
from .oracle_machine import (
    Mode,
    NoValidResponse,
    SimCommutativityRejected,
    machine_act,
    oracle_init,
)
from .rule_machine import COMMUTE, EMULATE, NoWitness, candidate_consequences, rule_init, rule_step
from .scenario import Scenario, ScenarioError, load_scenario
from .spec import CommutativityReport, sim_commutes

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

FUZZ_MAX_SCRIPT_LEN = 8


def _resp_json(r):
    return r.value if isinstance(r, Resp) else None


def _inv_json(t: int, i: Invocation) -> dict:
    return invocation_to_json(t, i)


def _entry_json(e):
    if e is COMMUTE:
        return "COMMUTE"
    return history_to_json([e])[0]


def _rule_state_json(s) -> dict:
    return {
        "h": ["EMULATE" if lst is EMULATE else [_entry_json(e) for e in lst] for lst in s.h],
        "commute": list(s.commute),
        "refstate": {"gfd": s.refstate.gfd, "closed": sorted(s.refstate.closed)},
    }


def _oracle_state_json(s) -> dict:
    return {
        "mode": s.mode.value,
        "X_copy": history_to_json(s.x_copy),
        "Y_copy": [history_to_json(h) for h in s.y_copy],
        "X_performed": history_to_json(s.x_performed),
        "Y_performed": [history_to_json(h) for h in s.y_performed],
        "oracle_performed": history_to_json(s.oracle_performed),
    }


def _report_json(report: CommutativityReport) -> dict:
    out = {"verdict": report.verdict.value, "checked": report.checked, "witness": None}
    w = report.witness
    if w is not None:
        out["witness"] = {
            "prefix": history_to_json(w.prefix),
            "reordering": history_to_json(w.reordering),
            "suffix": history_to_json(w.suffix),
            "member_original": w.member_original,
            "member_reordered": w.member_reordered,
        }
    return out


# drivers --------------------------------------------------------------------

def run_rule(sc: Scenario, script, wb: int) -> dict:
    s = rule_init(sc.x, sc.y, sc.threads, sc.fd_bound)
    steps, failures = [], []
    history: History = ()
    for k, (t, i) in enumerate(script):
        before = s
        rec = {"step": k, "machine": "rule", "thread": t, "invocation": _inv_json(t, i)}
        try:
            res = rule_step(s, t, i, wb)
        except NoWitness as nw:
            rec.update({
                "mode": "emulate",
                "response": None,
                "conflict": None,
                "state": _rule_state_json(nw.state),
                "no_witness": {
                    "target": history_to_json(nw.target),
                    "bound": nw.result.bound,
                    "tried": nw.result.tried,
                    "degenerate": nw.result.bound == 0,
                },
            })
            steps.append(rec)
            failures.append(f"NoWitness at step {k} ({thread_name(t)}:{i}): {nw}")
            break
        s = res.state
        history = s.performed
        rec.update({
            "mode": res.mode,
            "response": _resp_json(res.response),
            "conflict": rule_conflict_free_writes(t, before, s).to_json(),
            "state": _rule_state_json(s),
        })
        if res.witness is not None:
            rec["witness"] = {"sequence": [_inv_json(u, x) for u, x in res.witness.witness],
                              "tried": res.witness.tried}
        steps.append(rec)
    member = sc.oracle.member(history)
    if not member:
        failures.append("generated history is not a member of the specification")
    return {"steps": steps, "history": history, "member": member, "failures": failures,
            "no_witness": any("no_witness" in r for r in steps)}


def run_oracle(sc: Scenario, script, perturbations: int, seed: int) -> dict:
    o = sc.oracle
    s = oracle_init(sc.x, sc.y, sc.threads, oracle=o, bounds=sc.bounds)
    steps, failures = [], []
    history: History = ()
    for k, (t, i) in enumerate(script):
        rec = {"step": k, "machine": "oracle", "thread": t, "invocation": _inv_json(t, i)}
        try:
            res = machine_act(s, t, i, o)
        except NoValidResponse as exc:
            rec.update({"mode": "oracle", "response": None, "conflict": None,
                        "state": _oracle_state_json(s)})
            steps.append(rec)
            failures.append(f"NoValidResponse at step {k}: {exc}")
            break
        verdict = conflict_free_step(t, i, s, res.state, o, perturbations, seed)
        s = res.state
        history = history + (res.action,)
        rec.update({
            "mode": res.kind.value,
            "response": _resp_json(res.action.response),
            "conflict": verdict.to_json(),
            "state": _oracle_state_json(s),
        })
        steps.append(rec)
    member = o.member(history)
    if not member:
        failures.append("generated history is not a member of the specification")
    return {"steps": steps, "history": history, "member": member, "failures": failures}


def _trace(sc: Scenario, command: str, machine: str, seed: int, run: dict, **extra) -> dict:
    out = {
        "command": command,
        "scenario": sc.name,
        "machine": machine,
        "seed": seed,
        "input_script": [_inv_json(t, i) for t, i in sc.input_script],
        "steps": run["steps"],
        "outcome": {
            "history": history_to_json(run["history"]),
            "member": run["member"],
            "failures": run["failures"],
        },
    }
    out.update(extra)
    return out


# commands -------------------------------------------------------------------

def cmd_check_sim(sc: Scenario, args) -> tuple[int, dict]:
    report = sim_commutes(sc.oracle, sc.x, sc.y, sc.bounds)
    out = {
        "command": "check-sim",
        "scenario": sc.name,
        "bounds": {"max_region_len": sc.bounds.max_region_len,
                   "max_suffix_len": sc.bounds.max_suffix_len},
        "sim": _report_json(report),
    }
    return (EXIT_OK if report.commutes else EXIT_FAIL), out


def cmd_run(sc: Scenario, args) -> tuple[int, dict]:
    seed = sc.seed if args.seed is None else args.seed
    if args.machine == "rule":
        if ref_exhibits((a.thread, a.invocation) for a in sc.x + sc.y) != sc.x + sc.y:
            raise ScenarioError("the rule machine needs X ⧺ Y exhibited by the reference implementation")
        wb = sc.witness_bound if args.witness_bound is None else args.witness_bound
        run = run_rule(sc, sc.input_script, wb)
        code = EXIT_FAIL if run["no_witness"] else EXIT_OK
        return code, _trace(sc, "run", "rule", seed, run, witness_bound=wb)
    perturbations = sc.perturbations if args.perturbations is None else args.perturbations
    run = run_oracle(sc, sc.input_script, perturbations, seed)
    code = EXIT_OK if run["member"] and not run["failures"] else EXIT_FAIL
    return code, _trace(sc, "run", "oracle", seed, run, perturbations=perturbations)


def _matches_state(got, expected_h, expected_commute) -> bool:
    return list(got.h) == expected_h and list(got.commute) == expected_commute


def cmd_counterexample(sc: Scenario, args) -> tuple[int, dict]:
    """Reproduce the broken construction on the bundled two-open scenario."""
    seed = sc.seed if args.seed is None else args.seed
    alpha, beta = 0, 1
    y_alpha, y_beta = sc.y[0], sc.y[1]
    checks: list[tuple[str, bool]] = []

    if args.machine == "oracle":
        perturbations = sc.perturbations if args.perturbations is None else args.perturbations
        run = run_oracle(sc, sc.input_script, perturbations, seed)
        responses = [st["response"] for st in run["steps"]]
        checks.append(("beta open returns fd 2 and alpha close(1) returns EBADFD",
                       responses == [Fd(2).value, EBADFD.value]))
        checks.append(("final history is a spec member", run["member"]))
        out = _trace(sc, "counterexample", "oracle", seed, run, perturbations=perturbations)
    else:
        wb = sc.witness_bound if args.witness_bound is None else args.witness_bound
        run = run_rule(sc, sc.input_script, wb)
        steps = run["steps"]
        s0 = rule_init(sc.x, sc.y, sc.threads, sc.fd_bound)
        first = rule_step(s0, beta, Invocation("open"), wb)
        checks.append(("beta open replays fd 2 in conflict-free mode",
                       first.response == Fd(2) and first.mode == "conflict-free"))
        checks.append(("after beta's open: h[alpha]=[COMMUTE, alpha open 1], h[beta]=[]",
                       _matches_state(first.state, [(COMMUTE, y_alpha), ()], [False, True])))
        nw = None
        try:
            rule_step(first.state, alpha, close(1), wb)
        except NoWitness as exc:
            nw = exc
        checks.append(("alpha close(1) ends in NoWitness", nw is not None and len(steps) == 2
                       and "no_witness" in steps[-1]))
        total = sum((sc.threads * len(s0.alphabet)) ** k for k in range(wb + 1))
        if nw is not None:
            checks.append(("at NoWitness: h[alpha]=[alpha open 1], commute[alpha] set",
                           _matches_state(nw.state, [(y_alpha,), ()], [True, True])))
            checks.append((f"witness search tried all {total} candidate sequences",
                           nw.result.tried == total))
        cons = candidate_consequences(run["history"], [(alpha, close(1)), (alpha, Invocation("open"))],
                                      wb, sc.oracle.member, sc.threads, s0.alphabet)
        unrejected = [c for c in cons if not c.rejected]
        out = _trace(sc, "counterexample", "rule", seed, run, witness_bound=wb)
        out["witness_search"] = {
            "bound": wb,
            "tried": nw.result.tried if nw else None,
            "candidates": total,
            "degenerate": wb == 0,
        }
        out["consequences"] = {
            "continuation": [_inv_json(alpha, close(1)), _inv_json(alpha, Invocation("open"))],
            "candidates": len(cons),
            "rejected": len(cons) - len(unrejected),
            "first_unrejected": None if not unrejected else {
                "candidate": [_inv_json(u, x) for u, x in unrejected[0].candidate],
                "history": history_to_json(unrejected[0].history),
            },
        }
    out["checks"] = [{"check": name, "ok": ok} for name, ok in checks]
    return (EXIT_OK if all(ok for _, ok in checks) else EXIT_FAIL), out


def fuzz_script(sc: Scenario, rng: random.Random, max_len: int = FUZZ_MAX_SCRIPT_LEN):
    """Drive the oracle machine with a random valid script; return (script, history, error)."""
    o = sc.oracle
    s = oracle_init(sc.x, sc.y, sc.threads)
    length = rng.randint(1, max_len)
    script: list[tuple[int, Invocation]] = []
    history: History = ()
    modes: list[str] = []
    for _ in range(length):
        pending = []
        if s.mode is Mode.REPLAY and s.x_copy:
            pending = [(s.x_copy[0].thread, s.x_copy[0].invocation)]
        elif s.mode is Mode.CONFLICT_FREE:
            pending = [(t, s.y_copy[t][0].invocation) for t in range(sc.threads) if s.y_copy[t]]
        if pending and rng.random() < 0.5:
            t, i = rng.choice(pending)
        else:
            t = rng.randrange(sc.threads)
            i = rng.choice([i for i in o.invocations if o.valid_invocation(history, t, i)])
        script.append((t, i))
        try:
            res = machine_act(s, t, i, o)
        except NoValidResponse as exc:
            return script, history, modes, f"NoValidResponse: {exc}"
        s = res.state
        modes.append(res.kind.value)
        if res.action.response is NO_RESP:
            return script, history, modes, "NoResp returned"
        history = history + (res.action,)
        if not o.member(history):
            return script, history, modes, "generated history left the specification"
    return script, history, modes, None


def cmd_fuzz(sc: Scenario, args) -> tuple[int, dict]:
    runs = 1000 if args.runs is None else args.runs
    if runs < 1:
        raise ScenarioError("--runs must be at least 1")
    seed = sc.seed if args.seed is None else args.seed
    oracle_init(sc.x, sc.y, sc.threads, oracle=sc.oracle, bounds=sc.bounds)
    violations = 0
    first = None
    steps = 0
    mode_counts = {m.value: 0 for m in Mode}
    for k in range(runs):
        rng = random.Random(f"{seed}:{k}")
        script, history, modes, err = fuzz_script(sc, rng)
        steps += len(script)
        for m in modes:
            mode_counts[m] += 1
        if err is not None:
            violations += 1
            if first is None:
                first = {"run": k, "error": err,
                         "script": [_inv_json(t, i) for t, i in script],
                         "history": history_to_json(history)}
    out = {
        "command": "fuzz",
        "scenario": sc.name,
        "seed": seed,
        "rng": "MT19937 (Python random.Random), run k seeded with the string '<seed>:<k>'",
        "runs": runs,
        "max_script_len": FUZZ_MAX_SCRIPT_LEN,
        "total_steps": steps,
        "modes": mode_counts,
        "violations": violations,
        "first_violation": first,
    }
    return (EXIT_OK if violations == 0 else EXIT_FAIL), out


# rendering ------------------------------------------------------------------

def render_text(out: dict) -> str:
    lines = [f"{out['command']}: {out.get('scenario', '')}"]
    if "sim" in out:
        sim = out["sim"]
        lines.append(f"  verdict: {sim['verdict']} ({sim['checked']} suffix checks)")
        if sim["witness"]:
            w = sim["witness"]
            lines.append(f"  prefix:     {_hist_text(w['prefix'])}")
            lines.append(f"  reordering: {_hist_text(w['reordering'])}")
            lines.append(f"  suffix:     {_hist_text(w['suffix'])}")
            lines.append(f"  member(original)={w['member_original']} member(reordered)={w['member_reordered']}")
    for st in out.get("steps", []) if isinstance(out.get("steps"), list) else []:
        c = st.get("conflict")
        if c is None:
            cf = ""
        elif c["reads_ok"] is None:
            cf = f"  writes_ok={c['writes_ok']}"
        else:
            cf = f"  conflict_free={c['conflict_free']}"
        inv = st["invocation"]
        name = inv["op"] + (f"({','.join(map(str, inv['args']))})" if inv["args"] else "")
        line = f"  [{st['step']}] {st['mode']:<13} {thread_name(st['thread'])}:{name} -> {st['response']}{cf}"
        if "no_witness" in st:
            nw = st["no_witness"]
            line += f"  NoWitness (tried {nw['tried']} sequences up to length {nw['bound']})"
        lines.append(line)
    if "outcome" in out:
        oc = out["outcome"]
        lines.append(f"  history: {_hist_text(oc['history'])}")
        lines.append(f"  member: {oc['member']}")
        for f in oc["failures"]:
            lines.append(f"  failure: {f}")
    if out["command"] == "fuzz":
        lines.append(f"  runs={out['runs']} steps={out['total_steps']} violations={out['violations']} modes={out['modes']}")
    for c in out.get("checks", []):
        lines.append(f"  {'PASS' if c['ok'] else 'FAIL'} {c['check']}")
    return "\n".join(lines) + "\n"


def _hist_text(h: list) -> str:
    parts = []
    for a in h:
        name = a["op"] + (f"({','.join(map(str, a['args']))})" if a["args"] else "")
        parts.append(f"{thread_name(a['thread'])}:{name}->{a['resp']}")
    return "[" + ", ".join(parts) + "]"


def _emit(out: dict, args) -> None:
    if args.format == "text":
        text = render_text(out)
    else:
        text = json.dumps(out, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON path or bundled scenario name")
    common.add_argument("--machine", choices=("rule", "oracle"), default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--witness-bound", type=int, default=None)
    common.add_argument("--perturbations", type=int, default=None)
    common.add_argument("--runs", type=int, default=None)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")

    p = argparse.ArgumentParser(prog="scrlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check-sim", parents=[common], help="bounded SIM-commutativity check of Y in X ⧺ Y")
    sub.add_parser("counterexample", parents=[common], help="reproduce the broken witness search")
    sub.add_parser("run", parents=[common], help="drive a machine over the scenario's input script")
    sub.add_parser("fuzz", parents=[common], help="random valid scripts through the oracle machine")
    return p


_COMMANDS = {
    "check-sim": cmd_check_sim,
    "counterexample": cmd_counterexample,
    "run": cmd_run,
    "fuzz": cmd_fuzz,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "counterexample":
        ref = args.scenario or "counterexample_s33"
        args.machine = args.machine or "rule"
    elif args.scenario is None:
        print(f"scrlab {args.command}: --scenario is required", file=sys.stderr)
        return EXIT_INPUT
    else:
        ref = args.scenario
        args.machine = args.machine or "oracle"
    for flag in ("witness_bound", "perturbations", "seed"):
        v = getattr(args, flag)
        if v is not None and v < (1 if flag == "perturbations" else 0):
            print(f"scrlab: --{flag.replace('_', '-')} out of range: {v}", file=sys.stderr)
            return EXIT_INPUT
    try:
        sc = load_scenario(ref)
        code, out = _COMMANDS[args.command](sc, args)
    except (ScenarioError, SimCommutativityRejected) as exc:
        print(f"scrlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(out, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
